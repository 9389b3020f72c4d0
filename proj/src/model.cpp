#include "fhdr/model.hpp"

#include <cmath>
#include <random>

#include "fhdr/errors.hpp"
#include "fhdr/hdr.hpp"

namespace fhdr::model {

void ModelConfig::validate() const {
  if (image_channels == 0) throw ConfigError("model: image_channels must be positive");
  if (width == 0) throw ConfigError("model: width must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("model: leaky_slope must lie in [0, 1)");
}

namespace {

void add_conv(std::vector<ParamSpec>& specs, const std::string& name, std::size_t cout, std::size_t cin,
              InitRule rule = InitRule::fan_in) {
  const std::size_t fan_in = cin * 9;
  specs.push_back({name + ".weight", {cout, cin, 3, 3}, rule, rule == InitRule::zero ? 0.0 : std::sqrt(2.0 / fan_in)});
  specs.push_back({name + ".bias", {1, cout, 1, 1}, InitRule::zero, 0.0});
}

void add_attention(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t channels) {
  add_conv(specs, prefix + ".conv_a", channels, 2 * channels);
  add_conv(specs, prefix + ".conv_b", channels, channels);
}

void add_fgu(std::vector<ParamSpec>& specs, const ModelConfig& cfg, const std::string& prefix) {
  const std::size_t w = cfg.width;
  if (cfg.attention) {
    add_attention(specs, prefix + ".att1", w);
    add_attention(specs, prefix + ".att3", w);
  }
  if (!cfg.avg_hf_fusion) {
    for (const char* band : {"lh", "hl", "hh"}) {
      add_conv(specs, prefix + ".hf_" + band + ".conv_a", w, 3 * w);
      add_conv(specs, prefix + ".hf_" + band + ".conv_b", w, w);
    }
  }
  add_conv(specs, prefix + ".ll_fuse", w, 4 * w);
  add_conv(specs, prefix + ".squeeze", w, w);
}

std::string res_name(std::size_t k) { return "merge.res" + std::to_string(k); }

struct Conv {
  ad::Var weight, bias;
};

Conv conv_params(const BoundParams& p, const std::string& name) { return {p[name + ".weight"], p[name + ".bias"]}; }

ad::Var conv(ad::Var x, const BoundParams& p, const std::string& name) {
  const Conv c = conv_params(p, name);
  return ad::conv2d(x, c.weight, c.bias, {1, 1});
}

ad::Var conv_act(ad::Var x, const BoundParams& p, const std::string& name, double slope) {
  return ad::leaky_relu(conv(x, p, name), slope);
}

ad::Var band(const wavelet::VarBands& b, int which) {
  switch (which) {
    case 1: return b.lh;
    case 2: return b.hl;
    default: return b.hh;
  }
}

}  // namespace

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t w = cfg.width;
  const std::size_t c_in = 2 * cfg.image_channels;
  const std::size_t merge_ch = cfg.forward_all_bands ? 4 * w : w;
  std::vector<ParamSpec> specs;
  add_conv(specs, "enc.conv1", w, c_in);
  add_conv(specs, "enc.conv2", w, cfg.forward_all_bands ? 4 * w : w);
  if (cfg.attention) {
    add_attention(specs, "merge.att1", merge_ch);
    add_attention(specs, "merge.att3", merge_ch);
  }
  add_conv(specs, "merge.fuse", w, 3 * merge_ch);
  for (std::size_t k = 0; k < cfg.res_blocks; ++k) {
    add_conv(specs, res_name(k) + ".conv_a", w, w);
    add_conv(specs, res_name(k) + ".conv_b", w, w, InitRule::zero);
  }
  add_fgu(specs, cfg, "fgu2");
  add_fgu(specs, cfg, "fgu1");
  add_conv(specs, "out.conv", cfg.image_channels, w);
  specs[specs.size() - 2].init_std *= kOutputGainInit;
  specs.back().init = InitRule::constant;
  specs.back().init_value = kOutputBiasInit;
  return specs;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  for (const ParamSpec& spec : param_specs(cfg)) {
    Tensor t(spec.shape);
    if (spec.init == InitRule::fan_in && spec.init_std > 0.0) {
      std::normal_distribution<double> dist(0.0, spec.init_std);
      for (double& v : t.data()) v = dist(rng);
    } else if (spec.init == InitRule::constant) {
      t.fill(spec.init_value);
    }
    params.emplace(spec.name, std::move(t));
  }
  return params;
}

void check_params(const ModelParams& params, const ModelConfig& cfg) {
  const auto specs = param_specs(cfg);
  if (specs.size() != params.size()) {
    throw ShapeError("parameter set has " + std::to_string(params.size()) + " arrays, config expects " +
                     std::to_string(specs.size()));
  }
  for (const ParamSpec& spec : specs) {
    auto it = params.find(spec.name);
    if (it == params.end()) throw ShapeError("missing parameter '" + spec.name + "'");
    if (it->second.shape() != spec.shape) {
      throw ShapeError("parameter '" + spec.name + "' has shape " + it->second.shape().str() + ", expected " +
                       spec.shape.str());
    }
  }
}

BoundParams::BoundParams(ad::Graph& graph, const ModelParams& params, bool trainable) : graph_(&graph) {
  for (const auto& [name, t] : params) vars_.emplace(name, trainable ? graph.parameter(t) : graph.constant(t));
}

ad::Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ShapeError("model references unknown parameter '" + name + "'");
  return it->second;
}

NamedTensors BoundParams::gradients() const {
  NamedTensors out;
  for (const auto& [name, v] : vars_) out.emplace(name, graph_->grad(v));
  return out;
}

EncoderOutput encode(const std::array<ad::Var, 3>& inputs, const BoundParams& p, const ModelConfig& cfg) {
  const Shape& s = inputs[0].shape();
  if (s.h % kSpatialMultiple != 0 || s.w % kSpatialMultiple != 0) {
    throw GeometryError("encode: spatial extents must be multiples of 8, got " + s.str());
  }
  EncoderOutput out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (inputs[i].shape() != s) throw ShapeError("encode: frames disagree in shape");
    FrameFeatures& f = out.frames[i];
    f.features = conv_act(inputs[i], p, "enc.conv1", cfg.leaky_slope);
    f.level1 = wavelet::dwt2(f.features, cfg.wavelet);
    const ad::Var next = cfg.forward_all_bands ? f.level1 : wavelet::split(f.level1).ll;
    f.level2 = wavelet::dwt2(conv_act(next, p, "enc.conv2", cfg.leaky_slope), cfg.wavelet);
  }
  return out;
}

ad::Var attention_mask(ad::Var ref, ad::Var sup, const BoundParams& p, const std::string& prefix, double slope) {
  if (ref.shape() != sup.shape()) {
    throw ShapeError("attention_mask: reference " + ref.shape().str() + " vs support " + sup.shape().str());
  }
  const ad::Var parts[] = {ref, sup};
  const ad::Var hidden = conv_act(ad::concat_channels(parts), p, prefix + ".conv_a", slope);
  return ad::sigmoid(conv(hidden, p, prefix + ".conv_b"));
}

ad::Var merge(const std::array<ad::Var, 3>& lows, const BoundParams& p, const ModelConfig& cfg) {
  for (const ad::Var& v : lows) {
    if (v.shape() != lows[1].shape()) throw ShapeError("merge: inputs disagree in shape");
  }
  ad::Var l1 = lows[0], l3 = lows[2];
  if (cfg.attention) {
    l1 = ad::mul(attention_mask(lows[1], lows[0], p, "merge.att1", cfg.leaky_slope), lows[0]);
    l3 = ad::mul(attention_mask(lows[1], lows[2], p, "merge.att3", cfg.leaky_slope), lows[2]);
  }
  const ad::Var parts[] = {l1, lows[1], l3};
  const ad::Var fused = conv_act(ad::concat_channels(parts), p, "merge.fuse", cfg.leaky_slope);
  wavelet::VarBands level3 = wavelet::split(wavelet::dwt2(fused, cfg.wavelet));
  ad::Var r = level3.ll;
  for (std::size_t k = 0; k < cfg.res_blocks; ++k) {
    const ad::Var h = conv_act(r, p, res_name(k) + ".conv_a", cfg.leaky_slope);
    r = ad::add(r, conv(h, p, res_name(k) + ".conv_b"));
  }
  level3.ll = r;
  return wavelet::idwt2(wavelet::join(level3), cfg.wavelet);
}

ad::Var fgu(const std::array<wavelet::VarBands, 3>& bands, ad::Var fused_below, const BoundParams& p,
            const ModelConfig& cfg, const std::string& prefix) {
  const Shape& s = bands[1].ll.shape();
  for (const auto& b : bands) {
    if (b.ll.shape() != s) throw ShapeError(prefix + ": frames' bands disagree in shape");
  }
  if (fused_below.shape() != s) {
    throw ShapeError(prefix + ": fused features " + fused_below.shape().str() + " do not match bands " + s.str());
  }
  static constexpr const char* kNames[] = {"", "lh", "hl", "hh"};
  wavelet::VarBands out;
  for (int which = 1; which <= 3; ++which) {
    ad::Var fused;
    if (cfg.avg_hf_fusion) {
      fused = ad::scale(ad::add(ad::add(band(bands[0], which), band(bands[1], which)), band(bands[2], which)), 1.0 / 3.0);
    } else {
      const ad::Var group[] = {band(bands[0], which), band(bands[1], which), band(bands[2], which)};
      const std::string name = prefix + ".hf_" + kNames[which];
      fused = conv(conv_act(ad::concat_channels(group), p, name + ".conv_a", cfg.leaky_slope), p, name + ".conv_b");
    }
    (which == 1 ? out.lh : which == 2 ? out.hl : out.hh) = fused;
  }
  ad::Var l1 = bands[0].ll, l3 = bands[2].ll;
  if (cfg.attention) {
    l1 = ad::mul(attention_mask(bands[1].ll, bands[0].ll, p, prefix + ".att1", cfg.leaky_slope), bands[0].ll);
    l3 = ad::mul(attention_mask(bands[1].ll, bands[2].ll, p, prefix + ".att3", cfg.leaky_slope), bands[2].ll);
  }
  const ad::Var lows[] = {l1, bands[1].ll, l3, fused_below};
  out.ll = conv_act(ad::concat_channels(lows), p, prefix + ".ll_fuse", cfg.leaky_slope);
  const ad::Var up = wavelet::idwt2(wavelet::join(out), cfg.wavelet);
  return conv_act(up, p, prefix + ".squeeze", cfg.leaky_slope);
}

ad::Var forward(const std::array<ad::Var, 3>& inputs, const BoundParams& p, const ModelConfig& cfg) {
  const EncoderOutput enc = encode(inputs, p, cfg);
  std::array<ad::Var, 3> lows;
  std::array<wavelet::VarBands, 3> level2, level1;
  for (std::size_t i = 0; i < 3; ++i) {
    level2[i] = wavelet::split(enc.frames[i].level2);
    level1[i] = wavelet::split(enc.frames[i].level1);
    lows[i] = cfg.forward_all_bands ? enc.frames[i].level2 : level2[i].ll;
  }
  const ad::Var merged = merge(lows, p, cfg);
  const ad::Var d2 = fgu(level2, merged, p, cfg, "fgu2");
  const ad::Var d1 = fgu(level1, d2, p, cfg, "fgu1");
  const ad::Var skip = ad::add(d1, enc.frames[kReferenceFrame].features);
  return conv(skip, p, "out.conv");
}

Tensor predict(const ModelParams& params, const ModelConfig& cfg, const std::array<Tensor, 3>& inputs) {
  const Shape s = inputs[0].shape();
  ad::Graph g;
  BoundParams bound(g, params, false);
  std::array<ad::Var, 3> vars;
  for (std::size_t i = 0; i < 3; ++i) vars[i] = g.constant(pad_to_multiple(inputs[i], kSpatialMultiple));
  const ad::Var out = forward(vars, bound, cfg);
  Tensor pred = crop(out.value(), 0, 0, s.h, s.w);
  for (double& v : pred.data()) v = std::max(v, 0.0);
  return pred;
}

}  // namespace fhdr::model
