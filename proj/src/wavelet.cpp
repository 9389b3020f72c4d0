#include "fhdr/wavelet.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "fhdr/errors.hpp"

namespace fhdr::wavelet {
namespace {

// Orthonormal Daubechies-family low-pass filters in the standard published
// tables' decomposition order (as listed e.g. by PyWavelets dec_lo).
// db2 and db3 carry 17 significant digits from a 40-digit spectral
// factorization; sym2 is the published table as distributed.
constexpr std::array<double, 2> kHaarDecLo = {0.70710678118654752440, 0.70710678118654752440};
constexpr std::array<double, 4> kDb2DecLo = {-0.12940952255126038117, 0.22414386804201338103,
                                             0.83651630373780790558, 0.48296291314453414337};
constexpr std::array<double, 6> kDb3DecLo = {0.035226291885709536603, -0.085441273882026661693,
                                             -0.13501102001025458870, 0.45987750211849157010,
                                             0.80689150931109257649,  0.33267055295008261600};
constexpr std::array<double, 4> kSym2DecLo = {-0.12940952255092145, 0.22414386804185735, 0.836516303737469,
                                              0.48296291314469025};

template <std::size_t L>
Filters make_filters(Kind kind, const std::array<double, L>& dec_lo) {
  Filters f;
  f.kind = kind;
  // Correlation form uses the reversed decomposition filter.
  f.analysis_lo.assign(dec_lo.rbegin(), dec_lo.rend());
  f.analysis_hi.resize(L);
  for (std::size_t j = 0; j < L; ++j) {
    f.analysis_hi[j] = ((j % 2 == 0) ? 1.0 : -1.0) * f.analysis_lo[L - 1 - j];
  }
  f.synthesis_lo.assign(f.analysis_lo.rbegin(), f.analysis_lo.rend());
  f.synthesis_hi.assign(f.analysis_hi.rbegin(), f.analysis_hi.rend());
  return f;
}

struct Table {
  std::array<Filters, 4> all;
  Table()
      : all{make_filters(Kind::haar, kHaarDecLo), make_filters(Kind::db2, kDb2DecLo),
            make_filters(Kind::db3, kDb3DecLo), make_filters(Kind::sym2, kSym2DecLo)} {
    for (const Filters& f : all) {
      if (orthonormality_error(f) > 1e-11) {
        throw ConfigError("wavelet " + std::string(kind_name(f.kind)) + ": filters are not orthonormal");
      }
    }
  }
};

// Analysis along one axis: `src` holds `count` lines of length `n` at stride
// `line_stride`, elements at stride `elem_stride`. Writes lo and hi halves.
void analyze(const double* src, std::size_t n, std::size_t elem_stride, const Filters& f, double* lo, double* hi,
             std::size_t out_stride) {
  const std::size_t half = n / 2;
  const std::size_t taps = f.analysis_lo.size();
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (std::size_t j = 0; j < taps; ++j) {
      const double v = src[((2 * k + j) % n) * elem_stride];
      a += f.analysis_lo[j] * v;
      d += f.analysis_hi[j] * v;
    }
    lo[k * out_stride] = a;
    hi[k * out_stride] = d;
  }
}

// Transpose of analyze(): accumulates into dst.
void synthesize(const double* lo, const double* hi, std::size_t in_stride, std::size_t n, const Filters& f,
                double* dst, std::size_t elem_stride) {
  const std::size_t half = n / 2;
  const std::size_t taps = f.analysis_lo.size();
  for (std::size_t k = 0; k < half; ++k) {
    const double a = lo[k * in_stride];
    const double d = hi[k * in_stride];
    for (std::size_t j = 0; j < taps; ++j) {
      dst[((2 * k + j) % n) * elem_stride] += f.analysis_lo[j] * a + f.analysis_hi[j] * d;
    }
  }
}

void check_even(const Shape& s, const char* op) {
  if (s.h % 2 != 0 || s.w % 2 != 0 || s.h == 0 || s.w == 0) {
    throw GeometryError(std::string(op) + ": spatial extents must be even and non-zero, got " + s.str());
  }
}

}  // namespace

const Filters& filters(Kind kind) {
  static const Table table;
  return table.all[static_cast<std::size_t>(kind)];
}

double orthonormality_error(const Filters& f) {
  const auto& h = f.analysis_lo;
  double err = 0.0, sum = 0.0;
  for (std::size_t m = 0; 2 * m < h.size(); ++m) {
    double acc = 0.0;
    for (std::size_t j = 0; j + 2 * m < h.size(); ++j) acc += h[j] * h[j + 2 * m];
    err = std::max(err, std::abs(acc - (m == 0 ? 1.0 : 0.0)));
  }
  for (double v : h) sum += v;
  err = std::max(err, std::abs(sum - std::sqrt(2.0)));
  for (std::size_t j = 0; j < h.size(); ++j) {
    err = std::max(err, std::abs(f.synthesis_lo[j] - h[h.size() - 1 - j]));
    err = std::max(err, std::abs(f.synthesis_hi[j] - f.analysis_hi[h.size() - 1 - j]));
  }
  return err;
}

Kind parse_kind(std::string_view name) {
  if (name == "haar") return Kind::haar;
  if (name == "db2") return Kind::db2;
  if (name == "db3") return Kind::db3;
  if (name == "sym2") return Kind::sym2;
  throw ConfigError("unknown wavelet '" + std::string(name) + "' (expected haar, db2, db3 or sym2)");
}

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::haar: return "haar";
    case Kind::db2: return "db2";
    case Kind::db3: return "db3";
    case Kind::sym2: return "sym2";
  }
  return "?";
}

Tensor dwt2_packed(const Tensor& x, Kind kind) {
  const Shape& s = x.shape();
  check_even(s, "dwt2");
  const Filters& f = filters(kind);
  const std::size_t h2 = s.h / 2, w2 = s.w / 2;
  Tensor out({s.n, 4 * s.c, h2, w2});
  std::vector<double> row_lo(s.h * w2), row_hi(s.h * w2);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* src = x.plane(n, c);
      for (std::size_t y = 0; y < s.h; ++y) {
        analyze(src + y * s.w, s.w, 1, f, row_lo.data() + y * w2, row_hi.data() + y * w2, 1);
      }
      double* ll = out.plane(n, c);
      double* lh = out.plane(n, s.c + c);
      double* hl = out.plane(n, 2 * s.c + c);
      double* hh = out.plane(n, 3 * s.c + c);
      for (std::size_t x0 = 0; x0 < w2; ++x0) {
        analyze(row_lo.data() + x0, s.h, w2, f, ll + x0, lh + x0, w2);
        analyze(row_hi.data() + x0, s.h, w2, f, hl + x0, hh + x0, w2);
      }
    }
  }
  return out;
}

Tensor idwt2_packed(const Tensor& packed, Kind kind) {
  const Shape& s = packed.shape();
  if (s.c % 4 != 0 || s.c == 0) throw ShapeError("idwt2: packed channel count must be a multiple of 4, got " + s.str());
  const Filters& f = filters(kind);
  const std::size_t c_out = s.c / 4, h = 2 * s.h, w = 2 * s.w;
  Tensor out({s.n, c_out, h, w});
  std::vector<double> row_lo(h * s.w), row_hi(h * s.w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < c_out; ++c) {
      std::fill(row_lo.begin(), row_lo.end(), 0.0);
      std::fill(row_hi.begin(), row_hi.end(), 0.0);
      const double* ll = packed.plane(n, c);
      const double* lh = packed.plane(n, c_out + c);
      const double* hl = packed.plane(n, 2 * c_out + c);
      const double* hh = packed.plane(n, 3 * c_out + c);
      for (std::size_t x0 = 0; x0 < s.w; ++x0) {
        synthesize(ll + x0, lh + x0, s.w, h, f, row_lo.data() + x0, s.w);
        synthesize(hl + x0, hh + x0, s.w, h, f, row_hi.data() + x0, s.w);
      }
      double* dst = out.plane(n, c);
      for (std::size_t y = 0; y < h; ++y) {
        synthesize(row_lo.data() + y * s.w, row_hi.data() + y * s.w, 1, w, f, dst + y * w, 1);
      }
    }
  }
  return out;
}

Tensor pack(const Bands& b) {
  const Shape& s = b.ll.shape();
  if (b.lh.shape() != s || b.hl.shape() != s || b.hh.shape() != s) {
    throw ShapeError("wavelet bands disagree in shape: " + s.str() + ", " + b.lh.shape().str() + ", " +
                     b.hl.shape().str() + ", " + b.hh.shape().str());
  }
  const Tensor parts[] = {b.ll, b.lh, b.hl, b.hh};
  return fhdr::concat_channels(parts);
}

Bands unpack(const Tensor& packed) {
  const std::size_t c = packed.shape().c / 4;
  if (packed.shape().c % 4 != 0 || c == 0) throw ShapeError("unpack: channel count not a multiple of 4");
  return {slice_channels(packed, 0, c), slice_channels(packed, c, c), slice_channels(packed, 2 * c, c),
          slice_channels(packed, 3 * c, c)};
}

Bands dwt2(const Tensor& x, Kind kind) { return unpack(dwt2_packed(x, kind)); }

Tensor idwt2(const Bands& bands, Kind kind) { return idwt2_packed(pack(bands), kind); }

ad::Var dwt2(ad::Var x, Kind kind) {
  ad::Graph& g = ad::graph_of({x});
  Tensor out = dwt2_packed(x.value(), kind);
  return g.record(ad::OpTag::dwt2, std::move(out), {x.id}, [kind](ad::Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(ad::Var{&gr, self})[0];
    const Tensor back = idwt2_packed(gr.upstream(self), kind);
    Tensor& gx = gr.grad_buffer(in);
    for (std::size_t i = 0; i < back.numel(); ++i) gx.data()[i] += back.data()[i];
  });
}

ad::Var idwt2(ad::Var packed, Kind kind) {
  ad::Graph& g = ad::graph_of({packed});
  Tensor out = idwt2_packed(packed.value(), kind);
  return g.record(ad::OpTag::idwt2, std::move(out), {packed.id}, [kind](ad::Graph& gr, std::size_t self) {
    const std::size_t in = gr.inputs(ad::Var{&gr, self})[0];
    const Tensor back = dwt2_packed(gr.upstream(self), kind);
    Tensor& gx = gr.grad_buffer(in);
    for (std::size_t i = 0; i < back.numel(); ++i) gx.data()[i] += back.data()[i];
  });
}

VarBands split(ad::Var packed) {
  const std::size_t c = packed.shape().c / 4;
  if (packed.shape().c % 4 != 0 || c == 0) throw ShapeError("split: channel count not a multiple of 4");
  return {ad::slice_channels(packed, 0, c), ad::slice_channels(packed, c, c), ad::slice_channels(packed, 2 * c, c),
          ad::slice_channels(packed, 3 * c, c)};
}

ad::Var join(const VarBands& b) {
  const ad::Var parts[] = {b.ll, b.lh, b.hl, b.hh};
  for (const ad::Var& v : parts) {
    if (v.shape() != b.ll.shape()) throw ShapeError("join: wavelet bands disagree in shape");
  }
  return ad::concat_channels(parts);
}

}  // namespace fhdr::wavelet
