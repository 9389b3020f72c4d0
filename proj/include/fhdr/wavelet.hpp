#pragma once

#include <string_view>
#include <vector>

#include "fhdr/autodiff.hpp"
#include "fhdr/tensor.hpp"

/// Separable single-level 2-D DWT/IDWT with periodic extension.
///
/// Conventions: the first band letter is the filter applied along the width
/// axis, the second along the height axis. LH is therefore low-pass across
/// columns and high-pass down rows, i.e. it responds to horizontal structures
/// such as horizontal stripes.
///
/// With analysis low-pass h (length L) and high-pass g[j] = (-1)^j h[L-1-j]:
///
///   lo[k] = sum_j h[j] x[(2k + j) mod N],   hi[k] = sum_j g[j] x[(2k + j) mod N]
///
/// The inverse is the exact transpose of that map, which for orthonormal
/// filters is also its inverse.
namespace fhdr::wavelet {

enum class Kind { haar, db2, db3, sym2 };

struct Filters {
  Kind kind;
  std::vector<double> analysis_lo;
  std::vector<double> analysis_hi;
  /// Time-reversed analysis filters.
  std::vector<double> synthesis_lo;
  std::vector<double> synthesis_hi;
};

/// Coefficients for `kind`; the first call validates orthonormality of every kind.
const Filters& filters(Kind kind);
/// Max deviation from the orthonormality conditions sum h^2 = 1, sum h[j]h[j+2m] = 0, sum h = sqrt(2).
double orthonormality_error(const Filters& f);

Kind parse_kind(std::string_view name);
std::string_view kind_name(Kind kind);
inline constexpr Kind kAllKinds[] = {Kind::haar, Kind::db2, Kind::db3, Kind::sym2};

struct Bands {
  Tensor ll, lh, hl, hh;
};

Bands dwt2(const Tensor& x, Kind kind);
Tensor idwt2(const Bands& bands, Kind kind);

/// Bands stacked along channels as [LL | LH | HL | HH], shape (N, 4C, H/2, W/2).
Tensor dwt2_packed(const Tensor& x, Kind kind);
Tensor idwt2_packed(const Tensor& packed, Kind kind);

Tensor pack(const Bands& bands);
Bands unpack(const Tensor& packed);

/// Band handles inside an autodiff graph.
struct VarBands {
  ad::Var ll, lh, hl, hh;
};

ad::Var dwt2(ad::Var x, Kind kind);
ad::Var idwt2(ad::Var packed, Kind kind);
VarBands split(ad::Var packed);
ad::Var join(const VarBands& bands);

}  // namespace fhdr::wavelet
