#include "fhdr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "fhdr/errors.hpp"

namespace fhdr {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor: " + std::to_string(data_.size()) + " values do not fill shape " + shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::audit(const std::string& what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double sum_squares(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

Tensor slice_channels(const Tensor& t, std::size_t begin, std::size_t count) {
  const Shape& s = t.shape();
  if (begin + count > s.c || count == 0) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") out of range for " + s.str());
  }
  Tensor out({s.n, count, s.h, s.w});
  const std::size_t p = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    std::memcpy(out.plane(n, 0), t.plane(n, begin), count * p * sizeof(double));
  }
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  Shape s = parts[0].shape();
  std::size_t total = 0;
  for (const auto& part : parts) {
    const Shape& ps = part.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw ShapeError("concat_channels: part " + ps.str() + " incompatible with " + s.str());
    }
    total += ps.c;
  }
  Tensor out({s.n, total, s.h, s.w});
  const std::size_t p = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    std::size_t c0 = 0;
    for (const auto& part : parts) {
      std::memcpy(out.plane(n, c0), part.plane(n, 0), part.shape().c * p * sizeof(double));
      c0 += part.shape().c;
    }
  }
  return out;
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no parts");
  Shape s = parts[0].shape();
  std::size_t total = 0;
  for (const auto& part : parts) {
    const Shape& ps = part.shape();
    if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
      throw ShapeError("concat_batch: part " + ps.str() + " incompatible with " + s.str());
    }
    total += ps.n;
  }
  std::vector<double> values;
  values.reserve(total * s.c * s.plane());
  for (const auto& part : parts) values.insert(values.end(), part.data().begin(), part.data().end());
  return Tensor({total, s.c, s.h, s.w}, std::move(values));
}

Tensor slice_batch(const Tensor& t, std::size_t index) {
  const Shape& s = t.shape();
  if (index >= s.n) throw ShapeError("slice_batch: index out of range for " + s.str());
  const std::size_t item = s.c * s.plane();
  std::vector<double> values(t.data().begin() + index * item, t.data().begin() + (index + 1) * item);
  return Tensor({1, s.c, s.h, s.w}, std::move(values));
}

Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  const Shape& s = t.shape();
  if (y0 + h > s.h || x0 + w > s.w || h == 0 || w == 0) {
    throw GeometryError("crop: window exceeds " + s.str());
  }
  Tensor out({s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < h; ++y)
        std::memcpy(out.plane(n, c) + y * w, t.plane(n, c) + (y0 + y) * s.w + x0, w * sizeof(double));
  return out;
}

Tensor pad_to_multiple(const Tensor& t, std::size_t multiple) {
  const Shape& s = t.shape();
  const std::size_t h = (s.h + multiple - 1) / multiple * multiple;
  const std::size_t w = (s.w + multiple - 1) / multiple * multiple;
  if (h == s.h && w == s.w) return t;
  Tensor out({s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          out.at(n, c, y, x) = t.at(n, c, std::min(y, s.h - 1), std::min(x, s.w - 1));
  return out;
}

}  // namespace fhdr
