#include "fhdr/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "fhdr/checkpoint.hpp"
#include "fhdr/data.hpp"
#include "fhdr/errors.hpp"

namespace fhdr::train {

std::vector<LrStage> parse_lr_schedule(const std::string& text) {
  std::vector<LrStage> stages;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("lr schedule: expected step:lr, got '" + item + "'");
    try {
      stages.push_back({parse_uint(item.substr(0, colon), "lr schedule step"),
                        parse_real(item.substr(colon + 1), "lr schedule rate")});
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    pos = comma + 1;
  }
  return stages;
}

std::string format_lr_schedule(const std::vector<LrStage>& stages) {
  std::string out;
  for (const auto& s : stages) {
    if (!out.empty()) out += ',';
    out += std::to_string(s.start) + ":" + format_real(s.lr);
  }
  return out;
}

std::vector<LrStage> default_lr_schedule(std::uint64_t steps) {
  const std::vector<LrStage> raw{{0, 2e-4}, {steps / 3, 2e-5}, {2 * steps / 3, 2e-6}};
  std::vector<LrStage> out;
  for (const auto& s : raw) {
    if (!out.empty() && out.back().start == s.start) out.back() = s;
    else out.push_back(s);
  }
  return out;
}

namespace {

void check_schedule(const std::vector<LrStage>& stages) {
  if (stages.empty()) return;
  if (stages.front().start != 0) throw ConfigError("lr schedule must start at step 0");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (!(stages[i].lr > 0.0) || !std::isfinite(stages[i].lr)) throw ConfigError("lr schedule: rates must be positive");
    if (i > 0 && stages[i].start <= stages[i - 1].start) {
      throw ConfigError("lr schedule: step thresholds must be strictly increasing");
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("batch must be positive");
  if (crop == 0 || crop % model::kSpatialMultiple != 0) throw ConfigError("crop must be a positive multiple of 8");
  check_schedule(lr_schedule);
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  model.validate();
}

std::vector<LrStage> TrainConfig::effective_schedule() const {
  return lr_schedule.empty() ? default_lr_schedule(steps) : lr_schedule;
}

double TrainConfig::lr_at(std::uint64_t step) const {
  const auto stages = effective_schedule();
  double lr = stages.front().lr;
  for (const auto& s : stages) {
    if (s.start <= step) lr = s.lr;
  }
  return lr;
}

namespace {

void put_model(KvFile& kv, const model::ModelConfig& m) {
  kv.set("image_channels", static_cast<std::uint64_t>(m.image_channels));
  kv.set("width", static_cast<std::uint64_t>(m.width));
  kv.set("wavelet", std::string(wavelet::kind_name(m.wavelet)));
  kv.set("attention", m.attention);
  kv.set("avg_hf_fusion", m.avg_hf_fusion);
  kv.set("forward_all_bands", m.forward_all_bands);
  kv.set("res_blocks", static_cast<std::uint64_t>(m.res_blocks));
  kv.set("leaky_slope", m.leaky_slope);
}

// Applies one key to either config; returns false if the key is unknown.
bool apply_model_key(model::ModelConfig& m, const std::string& key, const std::string& value) {
  const std::string ctx = "config key '" + key + "'";
  if (key == "image_channels") m.image_channels = parse_uint(value, ctx);
  else if (key == "width") m.width = parse_uint(value, ctx);
  else if (key == "wavelet") m.wavelet = wavelet::parse_kind(value);
  else if (key == "attention") m.attention = parse_bool(value, ctx);
  else if (key == "avg_hf_fusion") m.avg_hf_fusion = parse_bool(value, ctx);
  else if (key == "forward_all_bands") m.forward_all_bands = parse_bool(value, ctx);
  else if (key == "res_blocks") m.res_blocks = parse_uint(value, ctx);
  else if (key == "leaky_slope") m.leaky_slope = parse_real(value, ctx);
  else return false;
  return true;
}

bool apply_train_key(TrainConfig& c, const std::string& key, const std::string& value) {
  const std::string ctx = "config key '" + key + "'";
  if (key == "steps") c.steps = parse_uint(value, ctx);
  else if (key == "batch") c.batch = parse_uint(value, ctx);
  else if (key == "crop") c.crop = parse_uint(value, ctx);
  else if (key == "lr_schedule") c.lr_schedule = value.empty() || value == "default" ? std::vector<LrStage>{}
                                                                                     : parse_lr_schedule(value);
  else if (key == "lambda") c.lambda = parse_real(value, ctx);
  else if (key == "mu") c.mu = parse_real(value, ctx);
  else if (key == "gamma") c.gamma = parse_real(value, ctx);
  else if (key == "sobel") c.sobel = parse_bool(value, ctx);
  else if (key == "init_seed") c.init_seed = parse_uint(value, ctx);
  else if (key == "shuffle_seed") c.shuffle_seed = parse_uint(value, ctx);
  else if (key == "augment_seed") c.augment_seed = parse_uint(value, ctx);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_uint(value, ctx);
  else if (key == "beta1") c.beta1 = parse_real(value, ctx);
  else if (key == "beta2") c.beta2 = parse_real(value, ctx);
  else if (key == "eps") c.eps = parse_real(value, ctx);
  else return apply_model_key(c.model, key, value);
  return true;
}

}  // namespace

KvFile TrainConfig::to_kv() const {
  KvFile kv;
  kv.set("steps", steps);
  kv.set("batch", batch);
  kv.set("crop", crop);
  kv.set("lr_schedule", lr_schedule.empty() ? std::string("default") : format_lr_schedule(lr_schedule));
  kv.set("lambda", lambda);
  kv.set("mu", mu);
  kv.set("gamma", gamma);
  kv.set("sobel", sobel);
  put_model(kv, model);
  kv.set("init_seed", init_seed);
  kv.set("shuffle_seed", shuffle_seed);
  kv.set("augment_seed", augment_seed);
  kv.set("checkpoint_every", checkpoint_every);
  kv.set("beta1", beta1);
  kv.set("beta2", beta2);
  kv.set("eps", eps);
  return kv;
}

void TrainConfig::merge(const KvFile& kv) {
  for (const auto& [key, value] : kv.entries()) {
    bool known = false;
    try {
      known = apply_train_key(*this, key, value);
    } catch (const IoError& e) {
      throw ConfigError(kv.origin() + ": " + e.what());
    }
    if (!known) throw ConfigError(kv.origin() + ": unknown key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_kv(const KvFile& kv) {
  TrainConfig c;
  c.merge(kv);
  return c;
}

KvFile ArchConfig::to_kv() const {
  KvFile kv;
  put_model(kv, model);
  kv.set("gamma", gamma);
  kv.set("mu", mu);
  return kv;
}

ArchConfig ArchConfig::from_kv(const KvFile& kv) {
  ArchConfig a;
  for (const auto& [key, value] : kv.entries()) {
    try {
      if (key == "gamma") a.gamma = parse_real(value, "gamma");
      else if (key == "mu") a.mu = parse_real(value, "mu");
      else if (!apply_model_key(a.model, key, value)) throw ConfigError(kv.origin() + ": unknown key '" + key + "'");
    } catch (const IoError& e) {
      throw ConfigError(kv.origin() + ": " + e.what());
    }
  }
  a.model.validate();
  return a;
}

std::filesystem::path arch_path_for(const std::filesystem::path& ckpt) {
  auto p = ckpt;
  p.replace_extension(".cfg");
  return p;
}

std::uint64_t augmentation_seed(std::uint64_t base, std::uint64_t step, std::uint64_t slot) {
  // splitmix64 finalizer over a simple combination
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (step + 1) + 0xBF58476D1CE4E5B9ULL * (slot + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

void check_samples(const std::vector<BracketSample>& samples, std::uint64_t crop) {
  if (samples.empty()) throw IoError("training set is empty");
  const std::size_t channels = samples.front().shape().c;
  for (const auto& s : samples) {
    s.validate();
    if (!s.gt_hdr) throw IoError("sample '" + s.name + "' has no ground truth");
    if (s.shape().c != channels) throw IoError("sample '" + s.name + "' has a different channel count");
    if (s.shape().h < crop || s.shape().w < crop) {
      throw GeometryError("sample '" + s.name + "' (" + s.shape().str() + ") is smaller than the crop " +
                          std::to_string(crop));
    }
  }
}

void save_model(const std::filesystem::path& path, const model::ModelParams& params, const ArchConfig& arch) {
  save_checkpoint(path, params);
  write_text_atomic(arch_path_for(path), arch.to_kv().str());
}

}  // namespace

TrainResult run(const TrainConfig& cfg, const std::vector<BracketSample>& samples, const std::filesystem::path& out,
                const ProgressFn& progress) {
  cfg.validate();
  check_samples(samples, cfg.crop);

  TrainConfig effective = cfg;
  effective.model.image_channels = samples.front().shape().c;
  ArchConfig arch{effective.model, cfg.gamma, cfg.mu};

  std::filesystem::create_directories(out);
  write_text_atomic(out / kConfigSnapshot, effective.to_kv().str());
  std::filesystem::remove(out / kAbortFile);

  TrainResult result;
  result.params = model::init_params(effective.model, cfg.init_seed);
  AdamState adam;
  AdamOptions opts;
  opts.beta1 = cfg.beta1;
  opts.beta2 = cfg.beta2;
  opts.eps = cfg.eps;

  std::ofstream log(out / kLossLog, std::ios::trunc);
  if (!log) throw IoError((out / kLossLog).string() + ": cannot open");

  auto abort_at = [&](std::uint64_t step, const std::string& what) {
    write_text_atomic(out / kAbortFile, "step=" + std::to_string(step) + "\nreason=" + what + "\n");
    throw NumericError("step " + std::to_string(step) + ": " + what);
  };

  data::BatchSampler sampler(samples.size(), cfg.batch, cfg.shuffle_seed);
  for (std::uint64_t step = 0; step < cfg.steps; ++step) {
    const auto indices = sampler.next();
    std::array<std::vector<Tensor>, 3> frames;
    std::vector<Tensor> gts;
    for (std::size_t slot = 0; slot < indices.size(); ++slot) {
      const BracketSample crop =
          data::crop_augment(samples[indices[slot]], cfg.crop, augmentation_seed(cfg.augment_seed, step, slot));
      const auto input = build_input(crop, cfg.gamma);
      for (std::size_t f = 0; f < 3; ++f) frames[f].push_back(input[f]);
      gts.push_back(*crop.gt_hdr);
    }

    ad::Graph g;
    model::BoundParams bound(g, result.params, true);
    std::array<ad::Var, 3> inputs;
    for (std::size_t f = 0; f < 3; ++f) inputs[f] = g.constant(concat_batch(frames[f]));
    const ad::Var gt = g.constant(concat_batch(gts));
    const ad::Var pred = model::forward(inputs, bound, effective.model);
    const ad::Var loss = ad::total_loss(pred, gt, cfg.effective_lambda(), cfg.mu);
    const double value = loss.value().item();
    if (!std::isfinite(value)) abort_at(step, "non-finite loss");
    g.backward(loss);

    const double lr = cfg.lr_at(step);
    opts.lr = lr;
    adam_step(result.params, bound.gradients(), adam, opts);
    for (const auto& [name, t] : result.params) {
      if (!t.all_finite()) abort_at(step, "non-finite values in parameter " + name);
    }

    char line[64];
    std::snprintf(line, sizeof(line), "%" PRIu64 " %.17g\n", step, value);
    log << line;
    log.flush();
    result.losses.push_back(value);
    if (progress) progress(step, value, lr);

    if (cfg.checkpoint_every != 0 && (step + 1) % cfg.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof(name), "step_%08" PRIu64 ".ckpt", step + 1);
      save_model(out / name, result.params, arch);
    }
  }
  save_model(out / kFinalCheckpoint, result.params, arch);
  return result;
}

std::vector<double> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::vector<double> out;
  std::string line;
  for (std::uint64_t expected = 0; std::getline(in, line); ++expected) {
    const auto space = line.find(' ');
    if (space == std::string::npos) throw IoError(path.string() + ": malformed line '" + line + "'");
    if (parse_uint(line.substr(0, space), path.string()) != expected) {
      throw IoError(path.string() + ": steps out of order");
    }
    out.push_back(parse_real(line.substr(space + 1), path.string()));
  }
  return out;
}

}  // namespace fhdr::train
