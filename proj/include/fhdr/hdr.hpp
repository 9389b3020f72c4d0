#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "fhdr/autodiff.hpp"
#include "fhdr/tensor.hpp"

namespace fhdr {

/// Index of the medium exposure, the geometric reference of the output.
inline constexpr std::size_t kReferenceFrame = 1;

inline constexpr double kDefaultGamma = 2.2;
inline constexpr double kDefaultMu = 5000.0;
inline constexpr double kDefaultLambda = 0.25;

/// Three LDR frames of one scene plus their exposure times.
struct BracketSample {
  std::string name;
  /// Each (1, C, H, W), values in [0, 1].
  std::array<Tensor, 3> ldr;
  /// Strictly increasing exposure times t_i = 2^bias_i.
  std::array<double, 3> exposure{};
  /// Linear-domain ground truth aligned with the reference frame.
  std::optional<Tensor> gt_hdr;

  const Shape& shape() const { return ldr[0].shape(); }
  /// Throws ShapeError / ConfigError if any invariant is violated.
  void validate() const;
};

inline double exposure_from_bias(double bias) { return std::exp2(bias); }

/// H = L^gamma / t.
Tensor gamma_to_linear(const Tensor& ldr, double exposure, double gamma = kDefaultGamma);

/// I_i = concat_channels(L_i, L_i^gamma / t_i) for the three frames.
std::array<Tensor, 3> build_input(const BracketSample& sample, double gamma = kDefaultGamma);

/// T(h) = log(1 + mu h) / log(1 + mu).
double mu_law(double h, double mu = kDefaultMu);
double mu_law_derivative(double h, double mu = kDefaultMu);
/// Tonemaps max(h, 0) elementwise.
Tensor mu_law(const Tensor& h, double mu = kDefaultMu);

enum class SobelAxis { x, y };

/// 3x3 Sobel response per channel with edge-replicated borders.
///
/// x: ((-1,0,1),(-2,0,2),(-1,0,1)) correlation, y: its transpose. Each response
/// is evaluated as (positive side sum) - (negative side sum), so constant
/// images give exactly zero.
Tensor sobel(const Tensor& x, SobelAxis axis);

namespace ad {

Var mu_law(Var h, double mu);
Var sobel(Var x, SobelAxis axis);

/// mean |T(max(pred,0)) - T(max(gt,0))|.
Var reconstruction_loss(Var pred, Var gt, double mu = kDefaultMu);
/// mean |Sx T(pred) - Sx T(gt)| + mean |Sy T(pred) - Sy T(gt)|, on clamped inputs.
Var sobel_loss(Var pred, Var gt, double mu = kDefaultMu);
/// reconstruction + lambda * sobel. With lambda == 0 the Sobel branch is not recorded.
Var total_loss(Var pred, Var gt, double lambda = kDefaultLambda, double mu = kDefaultMu);

}  // namespace ad

/// Scalar evaluations of the losses on plain tensors.
double reconstruction_loss(const Tensor& pred, const Tensor& gt, double mu = kDefaultMu);
double sobel_loss(const Tensor& pred, const Tensor& gt, double mu = kDefaultMu);
double total_loss(const Tensor& pred, const Tensor& gt, double lambda = kDefaultLambda, double mu = kDefaultMu);

/// Classical static merge: per pixel, the linearized frames weighted by the
/// hat function w(L) = 1 - |2L - 1|. Where every weight vanishes, saturated
/// pixels take the shortest exposure and underexposed ones the longest.
Tensor triangle_merge(const BracketSample& sample, double gamma = kDefaultGamma);

}  // namespace fhdr
