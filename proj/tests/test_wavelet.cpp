#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "common.hpp"
#include "fhdr/errors.hpp"
#include "fhdr/wavelet.hpp"

namespace fhdr {
namespace {

using testing::gradcheck;
using testing::project;
using testing::random_tensor;
using wavelet::Kind;

// Standard decomposition low-pass tables (convolution order).
const std::map<Kind, std::vector<double>> kDecLo{
    {Kind::haar, {0.7071067811865476, 0.7071067811865476}},
    {Kind::db2, {-0.12940952255126037, 0.2241438680420134, 0.8365163037378079, 0.48296291314453416}},
    {Kind::db3,
     {0.03522629188570953, -0.08544127388202666, -0.13501102001025458, 0.45987750211849154, 0.8068915093110925,
      0.33267055295008263}},
    {Kind::sym2, {-0.12940952255092145, 0.22414386804185735, 0.836516303737469, 0.48296291314469025}},
};

// Rows of the circular convolve-then-downsample map: y[k] = sum_m f[m] x[(2k + L - 1 - m) mod N].
std::vector<std::vector<double>> analysis_matrix(const std::vector<double>& f, std::size_t n) {
  const std::size_t L = f.size();
  std::vector<std::vector<double>> a(n / 2, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n / 2; ++k)
    for (std::size_t m = 0; m < L; ++m) a[k][(2 * k + L - 1 - m) % n] += f[m];
  return a;
}

struct OracleBanks {
  std::vector<std::vector<double>> lo_h, hi_h, lo_w, hi_w;
};

OracleBanks oracle_banks(Kind kind, std::size_t h, std::size_t w) {
  const auto& lo = kDecLo.at(kind);
  const std::size_t L = lo.size();
  std::vector<double> hi(L);
  for (std::size_t m = 0; m < L; ++m) hi[m] = ((m % 2) ? 1.0 : -1.0) * lo[L - 1 - m];
  return {analysis_matrix(lo, h), analysis_matrix(hi, h), analysis_matrix(lo, w), analysis_matrix(hi, w)};
}

// A_rows * X * A_cols^T for one plane.
Tensor oracle_band(const Tensor& x, const std::vector<std::vector<double>>& rows,
                   const std::vector<std::vector<double>>& cols) {
  const Shape s = x.shape();
  Tensor out({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h / 2; ++i)
        for (std::size_t j = 0; j < s.w / 2; ++j) {
          double acc = 0.0;
          for (std::size_t y = 0; y < s.h; ++y)
            for (std::size_t xx = 0; xx < s.w; ++xx) acc += rows[i][y] * x.at(n, c, y, xx) * cols[j][xx];
          out.at(n, c, i, j) = acc;
        }
  return out;
}

double band_dot(const wavelet::Bands& a, const wavelet::Bands& b) {
  return dot(a.ll, b.ll) + dot(a.lh, b.lh) + dot(a.hl, b.hl) + dot(a.hh, b.hh);
}

TEST(Filters, HaarCoefficients) {
  const auto& f = wavelet::filters(Kind::haar);
  const double s = std::sqrt(0.5);
  ASSERT_EQ(f.analysis_lo.size(), 2u);
  EXPECT_NEAR(f.analysis_lo[0], s, 1e-16);
  EXPECT_NEAR(f.analysis_lo[1], s, 1e-16);
  EXPECT_NEAR(f.analysis_hi[0], s, 1e-16);
  EXPECT_NEAR(f.analysis_hi[1], -s, 1e-16);
}

TEST(Filters, OrthonormalPairs) {
  for (Kind k : wavelet::kAllKinds) {
    const auto& f = wavelet::filters(k);
    EXPECT_LT(wavelet::orthonormality_error(f), 1e-11) << wavelet::kind_name(k);
    double slo = 0.0, shi = 0.0;
    for (double v : f.analysis_lo) slo += v * v;
    for (double v : f.analysis_hi) shi += v * v;
    EXPECT_NEAR(slo, 1.0, 1e-12);
    EXPECT_NEAR(shi, 1.0, 1e-12);
    const std::size_t L = f.analysis_lo.size();
    for (std::size_t j = 0; j < L; ++j) {
      EXPECT_EQ(f.synthesis_lo[j], f.analysis_lo[L - 1 - j]);
      EXPECT_EQ(f.synthesis_hi[j], f.analysis_hi[L - 1 - j]);
    }
  }
}

TEST(Filters, ParseKind) {
  for (Kind k : wavelet::kAllKinds) EXPECT_EQ(wavelet::parse_kind(wavelet::kind_name(k)), k);
  EXPECT_THROW(wavelet::parse_kind("db4"), ConfigError);
}

TEST(Dwt2, HaarTwoByTwo) {
  const double a = 1.5, b = -2.0, c = 0.25, d = 4.0;
  const auto bands = wavelet::dwt2(Tensor({1, 1, 2, 2}, {a, b, c, d}), Kind::haar);
  EXPECT_NEAR(bands.ll.item(), (a + b + c + d) / 2, 1e-15);
  EXPECT_NEAR(bands.lh.item(), (a + b - c - d) / 2, 1e-15);
  EXPECT_NEAR(bands.hl.item(), (a - b + c - d) / 2, 1e-15);
  EXPECT_NEAR(bands.hh.item(), (a - b - c + d) / 2, 1e-15);
}

TEST(Dwt2, ConstantImage) {
  for (auto [h, w] : {std::pair{2, 2}, {6, 10}, {16, 4}}) {
    const auto bands = wavelet::dwt2(Tensor({1, 2, std::size_t(h), std::size_t(w)}, 7.0), Kind::haar);
    for (double v : bands.ll.data()) EXPECT_NEAR(v, 14.0, 1e-12);
    for (const Tensor* t : {&bands.lh, &bands.hl, &bands.hh})
      for (double v : t->data()) EXPECT_NEAR(v, 0.0, 1e-12);
  }
  for (Kind k : wavelet::kAllKinds) {
    const auto bands = wavelet::dwt2(Tensor({1, 1, 8, 8}, 3.0), k);
    for (const Tensor* t : {&bands.lh, &bands.hl, &bands.hh})
      for (double v : t->data()) EXPECT_NEAR(v, 0.0, 1e-12) << wavelet::kind_name(k);
  }
}

TEST(Dwt2, MatchesFilterBankOracle) {
  const Tensor x = random_tensor({1, 3, 16, 16}, 42);
  for (Kind k : wavelet::kAllKinds) {
    const auto o = oracle_banks(k, 16, 16);
    const auto bands = wavelet::dwt2(x, k);
    EXPECT_LT(max_abs_diff(bands.ll, oracle_band(x, o.lo_h, o.lo_w)), 1e-10) << wavelet::kind_name(k);
    EXPECT_LT(max_abs_diff(bands.lh, oracle_band(x, o.hi_h, o.lo_w)), 1e-10) << wavelet::kind_name(k);
    EXPECT_LT(max_abs_diff(bands.hl, oracle_band(x, o.lo_h, o.hi_w)), 1e-10) << wavelet::kind_name(k);
    EXPECT_LT(max_abs_diff(bands.hh, oracle_band(x, o.hi_h, o.hi_w)), 1e-10) << wavelet::kind_name(k);
  }
}

TEST(Dwt2, NonSquareMatchesOracle) {
  const Tensor x = random_tensor({2, 1, 6, 10}, 43);
  for (Kind k : wavelet::kAllKinds) {
    const auto o = oracle_banks(k, 6, 10);
    EXPECT_LT(max_abs_diff(wavelet::dwt2(x, k).hl, oracle_band(x, o.lo_h, o.hi_w)), 1e-10);
  }
}

TEST(Dwt2, HorizontalStripesLandInLH) {
  Tensor x({1, 1, 16, 16});
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t c = 0; c < 16; ++c) x.at(0, 0, y, c) = (y % 2) ? 1.0 : 0.0;
  const auto b = wavelet::dwt2(x, Kind::haar);
  EXPECT_GT(sum_squares(b.lh), 0.0);
  EXPECT_NEAR(sum_squares(b.hl), 0.0, 1e-20);
  EXPECT_NEAR(sum_squares(b.hh), 0.0, 1e-20);
}

TEST(Idwt2, ConstantBandsInvert) {
  wavelet::Bands b{Tensor({1, 1, 3, 4}, 2.0 * 1.25), Tensor({1, 1, 3, 4}), Tensor({1, 1, 3, 4}), Tensor({1, 1, 3, 4})};
  const Tensor x = wavelet::idwt2(b, Kind::haar);
  for (double v : x.data()) EXPECT_NEAR(v, 1.25, 1e-15);
}

TEST(Idwt2, RoundTripRandomTensors) {
  std::mt19937_64 rng(5);
  for (Kind k : wavelet::kAllKinds) {
    for (int trial = 0; trial < 100; ++trial) {
      const Shape s{1 + rng() % 2, 1 + rng() % 3, 2 * (1 + rng() % 12), 2 * (1 + rng() % 12)};
      const Tensor x = random_tensor(s, rng(), -10, 10);
      EXPECT_LT(max_abs_diff(wavelet::idwt2(wavelet::dwt2(x, k), k), x), 1e-10) << s.str();
      EXPECT_LT(max_abs_diff(wavelet::idwt2_packed(wavelet::dwt2_packed(x, k), k), x), 1e-10);
    }
  }
}

TEST(Idwt2, AdjointOfDwt2) {
  for (Kind k : wavelet::kAllKinds) {
    const Tensor x = random_tensor({2, 2, 8, 12}, 1);
    const Shape bs{2, 2, 4, 6};
    const wavelet::Bands y{random_tensor(bs, 2), random_tensor(bs, 3), random_tensor(bs, 4), random_tensor(bs, 5)};
    EXPECT_NEAR(band_dot(wavelet::dwt2(x, k), y), dot(x, wavelet::idwt2(y, k)), 1e-10);
  }
}

TEST(Dwt2, ParsevalAndLinearity) {
  for (Kind k : wavelet::kAllKinds) {
    const Tensor x = random_tensor({1, 3, 10, 14}, 7), y = random_tensor({1, 3, 10, 14}, 8);
    const auto bx = wavelet::dwt2(x, k);
    const double e = sum_squares(x);
    EXPECT_LT(std::abs(band_dot(bx, bx) - e) / e, 1e-9);

    const double a = 1.7, b = -0.3;
    Tensor mix(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) mix.data()[i] = a * x.data()[i] + b * y.data()[i];
    const Tensor pm = wavelet::dwt2_packed(mix, k), px = wavelet::dwt2_packed(x, k), py = wavelet::dwt2_packed(y, k);
    for (std::size_t i = 0; i < pm.numel(); ++i) EXPECT_NEAR(pm.data()[i], a * px.data()[i] + b * py.data()[i], 1e-10);
  }
}

TEST(Packed, LayoutIsBandMajor) {
  const Tensor x = random_tensor({2, 3, 4, 4}, 9);
  const auto b = wavelet::dwt2(x, Kind::db2);
  const Tensor p = wavelet::dwt2_packed(x, Kind::db2);
  EXPECT_EQ(p.shape(), (Shape{2, 12, 2, 2}));
  EXPECT_EQ(slice_channels(p, 0, 3), b.ll);
  EXPECT_EQ(slice_channels(p, 3, 3), b.lh);
  EXPECT_EQ(slice_channels(p, 6, 3), b.hl);
  EXPECT_EQ(slice_channels(p, 9, 3), b.hh);
  const auto u = wavelet::unpack(p);
  EXPECT_EQ(wavelet::pack(u), p);
  EXPECT_THROW(wavelet::unpack(Tensor({1, 3, 2, 2})), ShapeError);
}

TEST(Dwt2, RejectsOddExtents) {
  EXPECT_THROW(wavelet::dwt2(Tensor({1, 1, 3, 4}), Kind::haar), GeometryError);
  EXPECT_THROW(wavelet::dwt2(Tensor({1, 1, 4, 5}), Kind::db3), GeometryError);
  EXPECT_THROW(wavelet::dwt2_packed(Tensor({1, 1, 0, 4}), Kind::haar), GeometryError);
}

TEST(Dwt2, GradientsMatchFiniteDifferences) {
  for (Kind k : wavelet::kAllKinds) {
    for (Shape s : {Shape{1, 1, 4, 4}, Shape{2, 2, 6, 4}, Shape{1, 3, 2, 8}}) {
      EXPECT_LT(gradcheck([&](ad::Graph& g, auto v) { return project(g, ad::sigmoid(wavelet::dwt2(v[0], k)), 1); },
                          {random_tensor(s, 11)}),
                1e-4);
      const Shape ps{s.n, 4 * s.c, s.h / 2, s.w / 2};
      EXPECT_LT(gradcheck([&](ad::Graph& g, auto v) { return project(g, ad::sigmoid(wavelet::idwt2(v[0], k)), 2); },
                          {random_tensor(ps, 12)}),
                1e-4);
    }
  }
}

TEST(Dwt2, BackwardIsIdwtOfUpstream) {
  const Tensor x = random_tensor({1, 2, 6, 6}, 3);
  const Tensor r = random_tensor({1, 8, 3, 3}, 4);
  ad::Graph g;
  const ad::Var vx = g.parameter(x);
  g.backward(ad::sum(ad::mul(wavelet::dwt2(vx, Kind::db3), g.constant(r))));
  EXPECT_LT(max_abs_diff(g.grad(vx), wavelet::idwt2_packed(r, Kind::db3)), 1e-13);
}

}  // namespace
}  // namespace fhdr
