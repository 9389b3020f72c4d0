#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fhdr {

/// Extents of a dense (batch, channel, height, width) array.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t numel() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const;
};

/// Dense 4-D real array, row-major (batch, channel, height, width).
///
/// Tensors are plain values: copying copies the data. Gradient tracking lives
/// on the nodes of an `ad::Graph`, not here.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[offset(n, c, y, x)];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[offset(n, c, y, x)];
  }
  double item() const;

  /// Pointer to the (n, c) plane.
  double* plane(std::size_t n, std::size_t c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const double* plane(std::size_t n, std::size_t c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

  void fill(double v);
  bool all_finite() const;
  /// Throws NumericError naming `what` if any value is NaN or infinite.
  void audit(const std::string& what) const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& t);
double dot(const Tensor& a, const Tensor& b);

/// Channels [begin, begin + count) of every batch item.
Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t count);
Tensor concat_channels(std::span<const Tensor> parts);
/// Stacks along the batch axis; all parts must share (c, h, w).
Tensor concat_batch(std::span<const Tensor> parts);
Tensor slice_batch(const Tensor& t, std::size_t index);
/// Rectangle [y0, y0 + h) x [x0, x0 + w) of every plane.
Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
/// Pads bottom/right by edge replication so that h and w become multiples of `multiple`.
Tensor pad_to_multiple(const Tensor& t, std::size_t multiple);

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace fhdr
