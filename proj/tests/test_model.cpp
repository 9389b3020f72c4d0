#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "common.hpp"
#include "fhdr/errors.hpp"
#include "fhdr/hdr.hpp"
#include "fhdr/model.hpp"

namespace fhdr {
namespace {

using model::BoundParams;
using model::ModelConfig;
using model::ModelParams;
using testing::random_tensor;

ModelConfig tiny_config(std::size_t width = 8) {
  ModelConfig cfg;
  cfg.width = width;
  cfg.res_blocks = 2;
  return cfg;
}

// Initialized params with every zero-initialized array replaced by small noise.
ModelParams perturbed_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = model::init_params(cfg, seed);
  std::uint64_t k = seed * 7919;
  for (auto& [name, t] : p) {
    bool all_zero = true;
    for (double v : t.data()) all_zero = all_zero && v == 0.0;
    if (all_zero) t = random_tensor(t.shape(), ++k, -0.05, 0.05);
  }
  return p;
}

std::array<Tensor, 3> random_inputs(const ModelConfig& cfg, std::size_t n, std::size_t h, std::size_t w,
                                    std::uint64_t seed) {
  return {random_tensor({n, 2 * cfg.image_channels, h, w}, seed, 0.0, 1.0),
          random_tensor({n, 2 * cfg.image_channels, h, w}, seed + 1, 0.0, 1.0),
          random_tensor({n, 2 * cfg.image_channels, h, w}, seed + 2, 0.0, 1.0)};
}

std::array<ad::Var, 3> constants(ad::Graph& g, const std::array<Tensor, 3>& t) {
  return {g.constant(t[0]), g.constant(t[1]), g.constant(t[2])};
}

TEST(Encoder, ShapesHalvePerLevel) {
  ModelConfig cfg;
  cfg.width = 64;
  const ModelParams p = model::init_params(cfg, 1);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const auto enc = model::encode(constants(g, random_inputs(cfg, 1, 64, 64, 3)), bp, cfg);
  for (const auto& f : enc.frames) {
    EXPECT_EQ(f.features.shape(), (Shape{1, 64, 64, 64}));
    const auto l1 = wavelet::split(f.level1), l2 = wavelet::split(f.level2);
    for (const ad::Var* b : {&l1.ll, &l1.lh, &l1.hl, &l1.hh}) EXPECT_EQ(b->shape(), (Shape{1, 64, 32, 32}));
    for (const ad::Var* b : {&l2.ll, &l2.lh, &l2.hl, &l2.hh}) EXPECT_EQ(b->shape(), (Shape{1, 64, 16, 16}));
  }
}

TEST(Encoder, SharedWeightsGiveIdenticalFrames) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = model::init_params(cfg, 2);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const ad::Var x = g.constant(random_tensor({1, 6, 16, 16}, 5, 0.0, 1.0));
  const auto enc = model::encode({x, x, x}, bp, cfg);
  EXPECT_EQ(enc.frames[0].level2.value(), enc.frames[1].level2.value());
  EXPECT_EQ(enc.frames[2].level1.value(), enc.frames[1].level1.value());
}

TEST(Encoder, ZeroInputZeroBiasGivesZero) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = model::init_params(cfg, 3);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const ad::Var z = g.constant(Tensor({1, 6, 16, 16}));
  for (const auto& f : model::encode({z, z, z}, bp, cfg).frames) {
    EXPECT_EQ(sum_squares(f.level1.value()), 0.0);
    EXPECT_EQ(sum_squares(f.level2.value()), 0.0);
  }
}

TEST(Encoder, RejectsIndivisibleExtents) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = model::init_params(cfg, 3);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const ad::Var x = g.constant(Tensor({1, 6, 12, 16}));
  EXPECT_THROW(model::encode({x, x, x}, bp, cfg), GeometryError);
}

TEST(Attention, MaskStrictlyInsideUnitInterval) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = perturbed_params(cfg, 4);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const ad::Var m = model::attention_mask(g.constant(random_tensor({2, 8, 4, 4}, 1, -5, 5)),
                                          g.constant(random_tensor({2, 8, 4, 4}, 2, -5, 5)), bp, "merge.att1", 0.01);
  for (double v : m.value().data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Attention, ZeroWeightsGiveHalf) {
  const ModelConfig cfg = tiny_config();
  ModelParams p = model::init_params(cfg, 5);
  for (auto& [name, t] : p)
    if (name.find("merge.att3") == 0) t.fill(0.0);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const ad::Var m = model::attention_mask(g.constant(random_tensor({1, 8, 4, 4}, 1)),
                                          g.constant(random_tensor({1, 8, 4, 4}, 2)), bp, "merge.att3", 0.01);
  for (double v : m.value().data()) EXPECT_EQ(v, 0.5);
}

TEST(Attention, ShapeFollowsSupport) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig cfg = tiny_config(1 + rng() % 6);
    const ModelParams p = model::init_params(cfg, rng());
    ad::Graph g;
    BoundParams bp(g, p, false);
    const Shape s{1 + rng() % 3, cfg.width, 1 + rng() % 9, 1 + rng() % 9};
    const ad::Var m = model::attention_mask(g.constant(random_tensor(s, rng())), g.constant(random_tensor(s, rng())),
                                            bp, "fgu1.att1", 0.01);
    EXPECT_EQ(m.shape(), s);
  }
}

TEST(Merge, PreservesShape) {
  ModelConfig cfg;
  cfg.width = 64;
  const ModelParams p = model::init_params(cfg, 7);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const std::array<ad::Var, 3> lows{g.constant(random_tensor({1, 64, 16, 16}, 1)),
                                    g.constant(random_tensor({1, 64, 16, 16}, 2)),
                                    g.constant(random_tensor({1, 64, 16, 16}, 3))};
  EXPECT_EQ(model::merge(lows, bp, cfg).shape(), (Shape{1, 64, 16, 16}));
}

TEST(Merge, ZeroInitResidualStackIsIdentity) {
  ModelConfig with = tiny_config();
  with.res_blocks = 9;
  ModelConfig without = with;
  without.res_blocks = 0;
  const ModelParams p = model::init_params(with, 8);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const std::array<ad::Var, 3> lows{g.constant(random_tensor({1, 8, 4, 4}, 1)), g.constant(random_tensor({1, 8, 4, 4}, 2)),
                                    g.constant(random_tensor({1, 8, 4, 4}, 3))};
  EXPECT_EQ(model::merge(lows, bp, with).value(), model::merge(lows, bp, without).value());
}

TEST(Merge, SymmetricUnderSupportFrameSwap) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = perturbed_params(cfg, 9);
  ModelParams q = p;
  for (const char* part : {".conv_a.weight", ".conv_a.bias", ".conv_b.weight", ".conv_b.bias"}) {
    std::swap(q.at(std::string("merge.att1") + part), q.at(std::string("merge.att3") + part));
  }
  // Swap the input-channel blocks of the fusion conv that see frames 1 and 3.
  Tensor& fw = q.at("merge.fuse.weight");
  const Tensor orig = fw;
  const std::size_t w = cfg.width;
  for (std::size_t o = 0; o < w; ++o)
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t k = 0; k < 9; ++k) {
        fw.at(o, i, k / 3, k % 3) = orig.at(o, 2 * w + i, k / 3, k % 3);
        fw.at(o, 2 * w + i, k / 3, k % 3) = orig.at(o, i, k / 3, k % 3);
      }
  const Tensor a = random_tensor({1, 8, 4, 4}, 1), b = random_tensor({1, 8, 4, 4}, 2), c = random_tensor({1, 8, 4, 4}, 3);
  ad::Graph g;
  BoundParams bp(g, p, false), bq(g, q, false);
  const Tensor lhs = model::merge({g.constant(a), g.constant(b), g.constant(c)}, bp, cfg).value();
  const Tensor rhs = model::merge({g.constant(c), g.constant(b), g.constant(a)}, bq, cfg).value();
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
  // Identical inputs with mirrored weights.
  const Tensor same = model::merge({g.constant(b), g.constant(b), g.constant(b)}, bp, cfg).value();
  const Tensor same_q = model::merge({g.constant(b), g.constant(b), g.constant(b)}, bq, cfg).value();
  EXPECT_LT(max_abs_diff(same, same_q), 1e-12);
}

std::array<wavelet::VarBands, 3> random_bands(ad::Graph& g, Shape s, std::uint64_t seed) {
  std::array<wavelet::VarBands, 3> out;
  for (auto& b : out) {
    b = {g.constant(random_tensor(s, ++seed)), g.constant(random_tensor(s, ++seed)),
         g.constant(random_tensor(s, ++seed)), g.constant(random_tensor(s, ++seed))};
  }
  return out;
}

TEST(Fgu, DoublesExtents) {
  ModelConfig cfg;
  cfg.width = 64;
  const ModelParams p = model::init_params(cfg, 10);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const auto bands = random_bands(g, {1, 64, 16, 16}, 1);
  EXPECT_EQ(model::fgu(bands, g.constant(random_tensor({1, 64, 16, 16}, 99)), bp, cfg, "fgu2").shape(),
            (Shape{1, 64, 32, 32}));
}

Tensor leaky(Tensor t, double slope) {
  for (double& v : t.data()) v = v > 0 ? v : slope * v;
  return t;
}

// Expected FGU output given the three fused high bands, recomputed with plain tensor ops.
Tensor fgu_oracle(const ModelParams& p, const ModelConfig& cfg, const std::array<wavelet::VarBands, 3>& bands,
                  const Tensor& below, const Tensor& lh, const Tensor& hl, const Tensor& hh) {
  auto conv = [&](const Tensor& x, const std::string& name) {
    return conv2d(x, p.at(name + ".weight"), p.at(name + ".bias"));
  };
  const Tensor parts[] = {bands[0].ll.value(), bands[1].ll.value(), bands[2].ll.value(), below};
  const Tensor ll = leaky(conv(concat_channels(parts), "fgu1.ll_fuse"), cfg.leaky_slope);
  const Tensor up = wavelet::idwt2({ll, lh, hl, hh}, cfg.wavelet);
  return leaky(conv(up, "fgu1.squeeze"), cfg.leaky_slope);
}

TEST(Fgu, ZeroHighFrequencyWeightsLeaveOnlyLowBand) {
  ModelConfig cfg = tiny_config();
  cfg.attention = false;
  ModelParams p = perturbed_params(cfg, 11);
  for (auto& [name, t] : p) {
    if (name.find(".hf_") != std::string::npos) t.fill(0.0);
    if (name.find("fgu1.squeeze.bias") == 0 || name.find("fgu1.ll_fuse.bias") == 0) t.fill(0.0);
  }
  ad::Graph g;
  BoundParams bp(g, p, false);
  const Shape s{1, 8, 4, 4};
  const auto bands = random_bands(g, s, 2);
  const Tensor below = random_tensor(s, 50);
  const Tensor got = model::fgu(bands, g.constant(below), bp, cfg, "fgu1").value();
  const Tensor zero(s);
  EXPECT_LT(max_abs_diff(got, fgu_oracle(p, cfg, bands, below, zero, zero, zero)), 1e-12);
}

TEST(Fgu, AverageFusionIsPixelMean) {
  ModelConfig cfg = tiny_config();
  cfg.attention = false;
  cfg.avg_hf_fusion = true;
  const ModelParams p = perturbed_params(cfg, 12);
  ad::Graph g;
  BoundParams bp(g, p, false);
  const Shape s{1, 8, 4, 4};
  const auto bands = random_bands(g, s, 3);
  const Tensor below = random_tensor(s, 51);
  std::array<Tensor, 3> means{Tensor(s), Tensor(s), Tensor(s)};
  for (std::size_t i = 0; i < s.numel(); ++i) {
    means[0].data()[i] = (bands[0].lh.value().data()[i] + bands[1].lh.value().data()[i] + bands[2].lh.value().data()[i]) / 3;
    means[1].data()[i] = (bands[0].hl.value().data()[i] + bands[1].hl.value().data()[i] + bands[2].hl.value().data()[i]) / 3;
    means[2].data()[i] = (bands[0].hh.value().data()[i] + bands[1].hh.value().data()[i] + bands[2].hh.value().data()[i]) / 3;
  }
  const Tensor got = model::fgu(bands, g.constant(below), bp, cfg, "fgu1").value();
  EXPECT_LT(max_abs_diff(got, fgu_oracle(p, cfg, bands, below, means[0], means[1], means[2])), 1e-12);
}

TEST(Forward, ShapeAndDeterminism) {
  ModelConfig cfg;
  cfg.width = 16;
  const ModelParams p = model::init_params(cfg, 13);
  const auto in = random_inputs(cfg, 1, 64, 64, 20);
  auto run = [&] {
    ad::Graph g;
    BoundParams bp(g, p, false);
    return model::forward(constants(g, in), bp, cfg).value();
  };
  const Tensor a = run();
  EXPECT_EQ(a.shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(a, run());
}

TEST(Forward, ShapeContractForEveryAblation) {
  for (int variant = 0; variant < 5; ++variant) {
    ModelConfig cfg = tiny_config();
    cfg.attention = variant != 1;
    cfg.avg_hf_fusion = variant == 2;
    cfg.forward_all_bands = variant == 3;
    cfg.wavelet = variant == 4 ? wavelet::Kind::db3 : wavelet::Kind::haar;
    const ModelParams p = model::init_params(cfg, 14);
    for (auto [h, w] : {std::pair{8, 8}, {16, 24}, {32, 8}}) {
      ad::Graph g;
      BoundParams bp(g, p, false);
      const Tensor out =
          model::forward(constants(g, random_inputs(cfg, 2, std::size_t(h), std::size_t(w), 1)), bp, cfg).value();
      EXPECT_EQ(out.shape(), (Shape{2, 3, std::size_t(h), std::size_t(w)}));
      EXPECT_TRUE(out.all_finite());
    }
  }
}

TEST(Forward, EndToEndGradientMatchesFiniteDifferences) {
  // One random element of every parameter array, for a few parameter draws.
  // The step balances round-off on tiny gradients against the kinks of
  // leaky ReLU, the clamp and the L1 loss.
  const ModelConfig cfg = tiny_config();
  for (std::uint64_t seed : {15, 115, 215}) {
    const ModelParams p = perturbed_params(cfg, seed);
    const auto in = random_inputs(cfg, 1, 16, 16, seed + 30);
    const Tensor gt = random_tensor({1, 3, 16, 16}, seed + 33, 0.0, 1.0);
    auto loss_of = [&](const ModelParams& params) {
      ad::Graph g;
      BoundParams bp(g, params, false);
      return ad::total_loss(model::forward(constants(g, in), bp, cfg), g.constant(gt), 0.25, 5000.0).value().item();
    };
    ad::Graph g;
    BoundParams bp(g, p, true);
    g.backward(ad::total_loss(model::forward(constants(g, in), bp, cfg), g.constant(gt), 0.25, 5000.0));
    const NamedTensors grads = bp.gradients();
    std::mt19937_64 rng(seed + 1);
    std::size_t checked = 0;
    for (const auto& [name, t] : p) {
      const std::size_t idx = rng() % t.numel();
      const double step = 1e-5;
      ModelParams up = p, down = p;
      up.at(name).data()[idx] += step;
      down.at(name).data()[idx] -= step;
      const double numeric = (loss_of(up) - loss_of(down)) / (2 * step);
      const double analytic = grads.at(name).data()[idx];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
      EXPECT_LT(std::abs(numeric - analytic) / denom, 1e-3) << name << "[" << idx << "] seed " << seed;
      ++checked;
    }
    EXPECT_EQ(checked, p.size());
  }
}

TEST(Forward, EveryParameterReceivesGradient) {
  for (bool all_bands : {false, true}) {
    ModelConfig cfg = tiny_config();
    cfg.forward_all_bands = all_bands;
    const ModelParams p = perturbed_params(cfg, 17);
    ad::Graph g;
    BoundParams bp(g, p, true);
    const auto in = random_inputs(cfg, 2, 16, 16, 40);
    const Tensor gt = random_tensor({2, 3, 16, 16}, 41, 0.0, 1.0);
    g.backward(ad::total_loss(model::forward(constants(g, in), bp, cfg), g.constant(gt), 0.25, 5000.0));
    for (const auto& [name, grad] : bp.gradients()) EXPECT_GT(sum_squares(grad), 0.0) << name;
  }
}

TEST(Params, InitIsSeedDeterministic) {
  const ModelConfig cfg = tiny_config();
  EXPECT_EQ(model::init_params(cfg, 1), model::init_params(cfg, 1));
  EXPECT_NE(model::init_params(cfg, 1), model::init_params(cfg, 2));
}

TEST(Params, InitStdFollowsFanIn) {
  ModelConfig cfg;
  cfg.width = 4;
  cfg.res_blocks = 1;
  std::map<std::string, std::vector<double>> draws;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const ModelParams p = model::init_params(cfg, seed);
    for (const auto& spec : model::param_specs(cfg)) {
      if (spec.init != model::InitRule::fan_in || spec.init_std == 0.0) continue;
      auto& v = draws[spec.name];
      for (double x : p.at(spec.name).data())
        if (v.size() < 1000) v.push_back(x);
    }
  }
  for (const auto& spec : model::param_specs(cfg)) {
    if (spec.init != model::InitRule::fan_in || spec.init_std == 0.0) continue;
    const double gain = spec.name == "out.conv.weight" ? model::kOutputGainInit : 1.0;
    EXPECT_NEAR(spec.init_std, gain * std::sqrt(2.0 / (spec.shape.c * 9)), 1e-15);
    const auto& v = draws.at(spec.name);
    ASSERT_EQ(v.size(), 1000u);
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    const double sd = std::sqrt(s / (v.size() - 1));
    EXPECT_LT(std::abs(sd - spec.init_std) / spec.init_std, 0.2) << spec.name;
  }
}

TEST(Params, OutputHeadStartsInsideTheLiveRegion) {
  const ModelParams p = model::init_params(tiny_config(), 3);
  for (double v : p.at("out.conv.bias").data()) EXPECT_EQ(v, model::kOutputBiasInit);
  for (const auto& spec : model::param_specs(tiny_config())) {
    if (spec.init != model::InitRule::zero) continue;
    for (double v : p.at(spec.name).data()) ASSERT_EQ(v, 0.0) << spec.name;
  }
}

TEST(Params, NamesDependOnlyOnConfig) {
  auto names = [](const ModelConfig& cfg) {
    std::set<std::string> out;
    for (const auto& s : model::param_specs(cfg)) EXPECT_TRUE(out.insert(s.name).second) << s.name;
    return out;
  };
  const ModelConfig base = tiny_config();
  const auto base_names = names(base);
  ModelConfig no_att = base;
  no_att.attention = false;
  for (const auto& n : names(no_att)) EXPECT_TRUE(base_names.count(n));
  for (const auto& n : base_names) {
    if (n.find(".att") == std::string::npos) {
      EXPECT_TRUE(names(no_att).count(n)) << n;
    }
  }
  ModelConfig avg = base;
  avg.avg_hf_fusion = true;
  for (const auto& n : names(avg)) EXPECT_EQ(n.find(".hf_"), std::string::npos);
  ModelConfig all = base;
  all.forward_all_bands = true;
  EXPECT_EQ(names(all), base_names);
  const auto s_all = model::param_specs(all), s_base = model::param_specs(base);
  for (std::size_t i = 0; i < s_all.size(); ++i) {
    const bool changed = s_all[i].shape != s_base[i].shape;
    const bool expected = s_all[i].name == "enc.conv2.weight" || s_all[i].name.find("merge.att") == 0 ||
                          s_all[i].name == "merge.fuse.weight";
    EXPECT_EQ(changed, expected) << s_all[i].name;
  }
}

TEST(Params, CheckParamsRejectsMismatch) {
  const ModelConfig cfg = tiny_config();
  ModelParams p = model::init_params(cfg, 1);
  EXPECT_NO_THROW(model::check_params(p, cfg));
  ModelConfig wider = cfg;
  wider.width = 9;
  EXPECT_THROW(model::check_params(p, wider), ShapeError);
  p.erase("out.conv.bias");
  EXPECT_THROW(model::check_params(p, cfg), ShapeError);
}

TEST(Predict, PadsAndCropsTransparently) {
  const ModelConfig cfg = tiny_config();
  const ModelParams p = perturbed_params(cfg, 18);
  const auto in = random_inputs(cfg, 1, 13, 21, 60);
  const Tensor out = model::predict(p, cfg, in);
  EXPECT_EQ(out.shape(), (Shape{1, 3, 13, 21}));
  for (double v : out.data()) EXPECT_GE(v, 0.0);
  EXPECT_EQ(out, model::predict(p, cfg, in));
}

}  // namespace
}  // namespace fhdr
