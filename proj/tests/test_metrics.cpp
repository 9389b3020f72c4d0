#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "fhdr/errors.hpp"
#include "fhdr/metrics.hpp"

namespace fhdr {
namespace {

using testing::random_tensor;

// Direct per-window SSIM with a 2-D Gaussian, no separability.
double ssim_oracle(const Tensor& a, const Tensor& b, double L) {
  const int k = 11;
  double g[k][k], total = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) total += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const Shape s = a.shape();
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y + k <= s.h; ++y)
        for (std::size_t x = 0; x + k <= s.w; ++x) {
          double mx = 0, my = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              mx += g[i][j] / total * a.at(n, c, y + i, x + j);
              my += g[i][j] / total * b.at(n, c, y + i, x + j);
            }
          double vx = 0, vy = 0, cov = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const double dx = a.at(n, c, y + i, x + j) - mx, dy = b.at(n, c, y + i, x + j) - my;
              vx += g[i][j] / total * dx * dx;
              vy += g[i][j] / total * dy * dy;
              cov += g[i][j] / total * dx * dy;
            }
          acc += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
          ++count;
        }
  return acc / count;
}

TEST(Psnr, GoldenValues) {
  // Four of 100 pixels off by 0.5: squared error sum 1, mse 0.01.
  Tensor gt({1, 1, 10, 10}, 0.25), pred = gt;
  for (std::size_t i : {0, 17, 58, 99}) pred.data()[i] = 0.75;
  EXPECT_EQ(metrics::mse(pred, gt), 0.01);
  EXPECT_EQ(metrics::psnr(pred, gt, 1.0), 20.0);
  EXPECT_EQ(metrics::psnr_from_mse(0.01), 20.0);
  EXPECT_EQ(metrics::psnr_from_mse(0.01 * 4.0, 2.0), 20.0);
  EXPECT_EQ(metrics::psnr_from_mse(1e-30), metrics::kPsnrCap);
  EXPECT_THROW(metrics::psnr_from_mse(-1.0), ConfigError);
  EXPECT_EQ(metrics::psnr(gt, gt), metrics::kPsnrCap);
  EXPECT_EQ(metrics::kPsnrCap, 99.0);
  EXPECT_THROW(metrics::psnr(gt, gt, 0.0), ConfigError);
  EXPECT_THROW(metrics::psnr(gt, Tensor({1, 1, 10, 9})), ShapeError);
}

TEST(Psnr, MatchesScalarLoopAndIsSymmetric) {
  const Tensor a = random_tensor({2, 3, 9, 7}, 1, 0, 1), b = random_tensor({2, 3, 9, 7}, 2, 0, 1);
  double mse = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) mse += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  mse /= a.numel();
  EXPECT_NEAR(metrics::psnr(a, b), -10 * std::log10(mse), 1e-9);
  EXPECT_EQ(metrics::psnr(a, b), metrics::psnr(b, a));
}

TEST(Psnr, DecreasesWithNoise) {
  const Tensor gt = random_tensor({1, 3, 16, 16}, 3, 0, 1);
  const Tensor noise = random_tensor(gt.shape(), 4);
  double prev = 1e9;
  for (double amp : {0.01, 0.05, 0.2}) {
    Tensor p = gt;
    for (std::size_t i = 0; i < p.numel(); ++i) p.data()[i] += amp * noise.data()[i];
    const double v = metrics::psnr(p, gt);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Ssim, IdentityIsExactlyOne) {
  const Tensor a = random_tensor({1, 3, 20, 17}, 5, 0, 1);
  EXPECT_EQ(metrics::ssim(a, a), 1.0);
  EXPECT_EQ(metrics::ssim(Tensor({1, 1, 11, 11}, 0.3), Tensor({1, 1, 11, 11}, 0.3)), 1.0);
}

TEST(Ssim, InvertedImageIsFarFromOne) {
  Tensor a({1, 1, 24, 24});
  for (std::size_t y = 0; y < 24; ++y)
    for (std::size_t x = 0; x < 24; ++x) a.at(0, 0, y, x) = ((x / 2 + y / 3) % 2) ? 0.95 : 0.05;
  Tensor inv = a;
  for (double& v : inv.data()) v = 1.0 - v;
  const double s = metrics::ssim(inv, a);
  EXPECT_LT(s, 0.5);
  EXPECT_GT(s, -1.0);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  const Tensor a = random_tensor({1, 2, 16, 19}, 6, 0, 1), b = random_tensor({1, 2, 16, 19}, 7, 0, 1);
  EXPECT_NEAR(metrics::ssim(a, b), ssim_oracle(a, b, 1.0), 1e-6);
  EXPECT_NEAR(metrics::ssim(a, b), metrics::ssim(b, a), 1e-15);
  EXPECT_THROW(metrics::ssim(Tensor({1, 1, 10, 30}), Tensor({1, 1, 10, 30})), GeometryError);
}

TEST(Score, MuLawMetricsAreLinearMetricsOfTonemappedImages) {
  const Tensor p = random_tensor({1, 3, 16, 16}, 8, 0, 2), g = random_tensor({1, 3, 16, 16}, 9, 0, 2);
  const auto s = metrics::score(p, g);
  EXPECT_EQ(s.psnr_mu, metrics::psnr(mu_law(p), mu_law(g)));
  EXPECT_EQ(s.ssim_mu, metrics::ssim(mu_law(p), mu_law(g)));
  EXPECT_EQ(s.psnr_l, metrics::psnr(p, g));
}

BracketSample tiny_sample(const std::string& name, std::uint64_t seed, bool with_gt = true) {
  BracketSample s;
  s.name = name;
  for (std::size_t i = 0; i < 3; ++i) s.ldr[i] = random_tensor({1, 3, 16, 16}, seed + i, 0, 1);
  s.exposure = {0.25, 1, 4};
  if (with_gt) s.gt_hdr = random_tensor({1, 3, 16, 16}, seed + 5, 0, 1);
  return s;
}

TEST(Evaluate, IdentityPredictorIsPerfect) {
  const std::vector<BracketSample> ds{tiny_sample("only", 1)};
  const auto r = metrics::evaluate(ds, [](const BracketSample& s) { return *s.gt_hdr; });
  ASSERT_EQ(r.samples.size(), 1u);
  EXPECT_EQ(r.mean.psnr_mu, 99.0);
  EXPECT_EQ(r.mean.psnr_l, 99.0);
  EXPECT_EQ(r.mean.ssim_mu, 1.0);
  EXPECT_EQ(r.mean.ssim_l, 1.0);
}

TEST(Evaluate, MeansAndSkips) {
  const std::vector<BracketSample> ds{tiny_sample("a", 1), tiny_sample("b", 10), tiny_sample("c", 20, false)};
  const auto r = metrics::evaluate(ds, [](const BracketSample& s) { return triangle_merge(s); });
  ASSERT_EQ(r.samples.size(), 2u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.mean.psnr_mu, (r.samples[0].psnr_mu + r.samples[1].psnr_mu) / 2);
  EXPECT_EQ(r.mean.ssim_l, (r.samples[0].ssim_l + r.samples[1].ssim_l) / 2);
}

TEST(EvalReport, KeyValueRoundTrip) {
  const std::vector<BracketSample> ds{tiny_sample("a", 1), tiny_sample("b b", 10)};
  auto r = metrics::evaluate(ds, [](const BracketSample& s) { return triangle_merge(s); });
  r.config_digest = "0123456789abcdef";
  r.checkpoint_digest = "fedcba9876543210";
  r.skipped = 4;
  const auto back = metrics::EvalReport::from_kv(KvFile::parse(r.to_kv().str(), "mem"));
  EXPECT_EQ(back, r);
  EXPECT_NE(r.table().find("b b"), std::string::npos);
}

}  // namespace
}  // namespace fhdr
