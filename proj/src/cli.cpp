#include "fhdr/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>

#include "fhdr/data.hpp"
#include "fhdr/errors.hpp"
#include "fhdr/hdr.hpp"
#include "fhdr/image_io.hpp"
#include "fhdr/kvfile.hpp"
#include "fhdr/metrics.hpp"
#include "fhdr/model.hpp"
#include "fhdr/train.hpp"

namespace fhdr::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kBandNames[4] = {"LL", "LH", "HL", "HH"};

const Tensor& band_of(const wavelet::Bands& b, std::size_t i) {
  switch (i) {
    case 0: return b.ll;
    case 1: return b.lh;
    case 2: return b.hl;
    default: return b.hh;
  }
}

}  // namespace

NamedTensors decompose(const Tensor& image, std::size_t level, wavelet::Kind kind) {
  if (level == 0) throw GeometryError("inspect-subbands: level must be at least 1");
  const std::size_t m = std::size_t{1} << std::min<std::size_t>(level, 62);
  if (level > 30 || image.shape().h % m != 0 || image.shape().w % m != 0) {
    throw GeometryError("inspect-subbands: image " + image.shape().str() + " cannot be decomposed to level " +
                        std::to_string(level));
  }
  NamedTensors out;
  Tensor ll = image;
  for (std::size_t l = 1; l <= level; ++l) {
    wavelet::Bands b = wavelet::dwt2(ll, kind);
    const std::string prefix = "L" + std::to_string(l) + ".";
    out[prefix + "LH"] = b.lh;
    out[prefix + "HL"] = b.hl;
    out[prefix + "HH"] = b.hh;
    ll = b.ll;
  }
  out["L" + std::to_string(level) + ".LL"] = ll;
  return out;
}

Tensor reconstruct(const NamedTensors& bands, std::size_t level, wavelet::Kind kind) {
  auto get = [&](const std::string& key) -> const Tensor& {
    const auto it = bands.find(key);
    if (it == bands.end()) throw IoError("band file lacks '" + key + "'");
    return it->second;
  };
  Tensor ll = get("L" + std::to_string(level) + ".LL");
  for (std::size_t l = level; l >= 1; --l) {
    const std::string prefix = "L" + std::to_string(l) + ".";
    ll = wavelet::idwt2({ll, get(prefix + "LH"), get(prefix + "HL"), get(prefix + "HH")}, kind);
  }
  return ll;
}

Tensor normalize_panel(const Tensor& band) {
  Tensor out = band;
  if (band.numel() == 0) return out;
  double lo = band.data()[0], hi = lo;
  for (double v : band.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  for (double& v : out.data()) v = range > 0.0 ? (v - lo) / range : 0.5;
  return out;
}

std::string panel_name(const std::string& prefix, std::size_t level, const std::string& band, std::size_t channels) {
  return prefix + "_L" + std::to_string(level) + "_" + band + (channels == 1 ? ".pgm" : ".ppm");
}

namespace {

struct TrainArgs {
  std::string dataset, out, config;
  std::optional<std::uint64_t> seed, steps, width, batch, crop, checkpoint_every;
  std::optional<std::string> wavelet, lr_schedule;
  bool no_attention = false, avg_hf = false, no_sobel = false, all_bands = false, quiet = false;
};

struct InferArgs {
  std::string checkpoint, config, sample, exposure, out;
  std::vector<std::string> ldr;
};

struct EvalArgs {
  std::string checkpoint, config, dataset, out, baseline;
};

struct InspectArgs {
  std::string image, checkpoint, config, sample, out, wavelet = "haar";
  std::size_t level = 1;
};

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0, count = 10, width = 128, height = 128, channels = 3;
  double max_motion = 8.0;
  unsigned bit_depth = 8;
  std::string biases = "-2,0,2";
};

void add_wavelet_option(CLI::App& app, std::optional<std::string>& target) {
  app.add_option("--wavelet", target, "Wavelet kind")->check(CLI::IsMember({"haar", "db2", "db3", "sym2"}));
}


int cmd_train(const TrainArgs& a) {
  train::TrainConfig cfg;
  if (!a.config.empty()) {
    KvFile kv;
    try {
      kv = KvFile::load(a.config);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    cfg.merge(kv);
  }
  if (a.steps) cfg.steps = *a.steps;
  if (a.batch) cfg.batch = *a.batch;
  if (a.crop) cfg.crop = *a.crop;
  if (a.width) cfg.model.width = *a.width;
  if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
  if (a.lr_schedule) cfg.lr_schedule = train::parse_lr_schedule(*a.lr_schedule);
  if (a.seed) {
    cfg.init_seed = *a.seed;
    cfg.shuffle_seed = *a.seed + 1;
    cfg.augment_seed = *a.seed + 2;
  }
  if (a.wavelet) cfg.model.wavelet = wavelet::parse_kind(*a.wavelet);
  if (a.no_attention) cfg.model.attention = false;
  if (a.avg_hf) cfg.model.avg_hf_fusion = true;
  if (a.no_sobel) cfg.sobel = false;
  if (a.all_bands) cfg.model.forward_all_bands = true;
  cfg.validate();

  const auto samples = data::load_dataset(a.dataset);
  const std::uint64_t report_every = std::max<std::uint64_t>(1, cfg.steps / 20);
  train::ProgressFn progress;
  if (!a.quiet) {
    progress = [&](std::uint64_t step, double loss, double lr) {
      if (step % report_every == 0 || step + 1 == cfg.steps) {
        std::cerr << "step " << step << "  loss " << loss << "  lr " << lr << "\n";
      }
    };
  }
  train::run(cfg, samples, a.out, progress);
  std::cerr << "wrote " << (fs::path(a.out) / train::kFinalCheckpoint).string() << "\n";
  return kOk;
}

struct LoadedModel {
  model::ModelParams params;
  train::ArchConfig arch;
  std::string config_digest, checkpoint_digest;
};

LoadedModel load_model(const std::string& checkpoint, const std::string& config) {
  const fs::path cfg_path = config.empty() ? train::arch_path_for(checkpoint) : fs::path(config);
  const auto cfg_bytes = read_file(cfg_path);
  const std::string cfg_text(cfg_bytes.begin(), cfg_bytes.end());
  LoadedModel m;
  m.arch = train::ArchConfig::from_kv(KvFile::parse(cfg_text, cfg_path.string()));
  const auto ckpt_bytes = read_file(checkpoint);
  m.params = decode_checkpoint(ckpt_bytes, checkpoint);
  model::check_params(m.params, m.arch.model);
  m.config_digest = fnv1a_hex(cfg_text);
  m.checkpoint_digest = fnv1a_hex(ckpt_bytes);
  return m;
}

int cmd_infer(const InferArgs& a) {
  const LoadedModel m = load_model(a.checkpoint, a.config);
  BracketSample sample;
  if (!a.sample.empty()) {
    sample = data::load_sample(a.sample);
  } else {
    if (a.ldr.size() != 3 || a.exposure.empty()) {
      throw ConfigError("infer: give --sample DIR or three --ldr paths and --exposure");
    }
    const auto biases = data::read_exposure_biases(a.exposure);
    for (std::size_t i = 0; i < 3; ++i) {
      sample.ldr[i] = image_io::read_image(a.ldr[i]);
      sample.exposure[i] = exposure_from_bias(biases[i]);
    }
    for (std::size_t i = 1; i < 3; ++i) {
      if (!(sample.ldr[i].shape() == sample.ldr[0].shape())) {
        throw IoError("infer: " + a.ldr[i] + " is " + sample.ldr[i].shape().str() + " but " + a.ldr[0] + " is " +
                      sample.ldr[0].shape().str());
      }
    }
  }
  sample.validate();
  if (sample.shape().c != m.arch.model.image_channels) throw IoError("infer: channel count does not match the model");

  const Tensor hdr = model::predict(m.params, m.arch.model, build_input(sample, m.arch.gamma));
  const fs::path out(a.out);
  fs::create_directories(out);
  image_io::write_pfm(out / "hdr.pfm", hdr);
  // The preview is computed from the HDR exactly as stored.
  const Tensor stored = image_io::read_pfm(out / "hdr.pfm");
  const Tensor preview = mu_law(stored, m.arch.mu);
  image_io::write_pfm(out / "preview.pfm", preview);
  image_io::write_pnm8(out / (preview.shape().c == 1 ? "preview.pgm" : "preview.ppm"), preview);

  KvFile snap;
  snap.set("command", "infer");
  snap.set("checkpoint", fs::absolute(a.checkpoint).string());
  snap.set("checkpoint_digest", m.checkpoint_digest);
  snap.set("config_digest", m.config_digest);
  if (!a.sample.empty()) {
    snap.set("sample", fs::absolute(a.sample).string());
  } else {
    for (std::size_t i = 0; i < 3; ++i) snap.set("ldr_" + std::to_string(i + 1), fs::absolute(a.ldr[i]).string());
    snap.set("exposure", fs::absolute(a.exposure).string());
  }
  snap.save(out / "infer.cfg");
  return kOk;
}

int cmd_eval(const EvalArgs& a) {
  metrics::EvalReport report;
  KvFile snap;
  snap.set("command", "eval");
  snap.set("dataset", fs::absolute(a.dataset).string());
  if (!a.baseline.empty()) {
    if (!a.checkpoint.empty()) throw ConfigError("eval: --baseline and --checkpoint are exclusive");
    const auto samples = data::load_dataset(a.dataset);
    metrics::Predictor predict;
    if (a.baseline == "triangle") {
      predict = [](const BracketSample& s) { return triangle_merge(s, kDefaultGamma); };
    } else {
      predict = [](const BracketSample& s) { return *s.gt_hdr; };
    }
    report = metrics::evaluate(samples, predict, kDefaultMu);
    report.config_digest = "baseline-" + a.baseline;
    report.checkpoint_digest = "none";
    snap.set("baseline", a.baseline);
  } else {
    if (a.checkpoint.empty()) throw ConfigError("eval: --checkpoint or --baseline is required");
    const LoadedModel m = load_model(a.checkpoint, a.config);
    report = metrics::evaluate_model(m.params, m.arch.model, a.dataset, m.arch.gamma, m.arch.mu);
    report.config_digest = m.config_digest;
    report.checkpoint_digest = m.checkpoint_digest;
    snap.set("checkpoint", fs::absolute(a.checkpoint).string());
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  write_text_atomic(out / "report.txt", report.table());
  report.to_kv().save(out / "report.kv");
  snap.save(out / "eval.cfg");
  std::cout << report.table();
  return kOk;
}

void write_panels(const NamedTensors& bands, std::size_t level, const std::string& prefix, const fs::path& out) {
  for (const char* b : kBandNames) {
    const Tensor& band = bands.at("L" + std::to_string(level) + "." + b);
    image_io::write_pnm16(out / panel_name(prefix, level, b, band.shape().c), normalize_panel(band));
  }
}

int cmd_inspect(const InspectArgs& a) {
  const wavelet::Kind kind = wavelet::parse_kind(a.wavelet);
  const fs::path out(a.out);
  KvFile snap;
  snap.set("command", "inspect-subbands");
  snap.set("wavelet", a.wavelet);
  snap.set("level", static_cast<std::uint64_t>(a.level));

  if (!a.image.empty()) {
    const Tensor img = image_io::read_image(a.image);
    const NamedTensors bands = decompose(img, a.level, kind);
    fs::create_directories(out);
    write_panels(bands, a.level, "image", out);
    save_checkpoint(out / "image_bands.bin", bands);
    snap.set("image", fs::absolute(a.image).string());
  } else if (!a.checkpoint.empty() && !a.sample.empty()) {
    const LoadedModel m = load_model(a.checkpoint, a.config);
    if (a.level != 1 && a.level != 2) throw GeometryError("inspect-subbands: feature maps exist at levels 1 and 2");
    const BracketSample s = data::load_sample(a.sample);
    const Tensor& ref = s.ldr[kReferenceFrame];
    const NamedTensors bands = decompose(ref, a.level, kind);
    fs::create_directories(out);
    write_panels(bands, a.level, "image", out);
    save_checkpoint(out / "image_bands.bin", bands);

    // Encoder bands of the reference frame, averaged over feature channels.
    const Shape& sh = ref.shape();
    const std::size_t m8 = model::kSpatialMultiple;
    if (sh.h % m8 != 0 || sh.w % m8 != 0) throw GeometryError("inspect-subbands: sample extents must be multiples of 8");
    ad::Graph g;
    model::BoundParams p(g, m.params, false);
    const auto inputs = build_input(s, m.arch.gamma);
    std::array<ad::Var, 3> vars;
    for (std::size_t i = 0; i < 3; ++i) vars[i] = g.constant(inputs[i]);
    const auto enc = model::encode(vars, p, m.arch.model);
    const auto& frame = enc.frames[kReferenceFrame];
    const wavelet::Bands fb = wavelet::unpack((a.level == 1 ? frame.level1 : frame.level2).value());
    for (std::size_t bi = 0; bi < 4; ++bi) {
      const Tensor& band = band_of(fb, bi);
      const Shape bs = band.shape();
      Tensor mean({1, 1, bs.h, bs.w});
      for (std::size_t c = 0; c < bs.c; ++c) {
        const double* src = band.plane(0, c);
        for (std::size_t i = 0; i < bs.plane(); ++i) mean.raw()[i] += src[i] / static_cast<double>(bs.c);
      }
      image_io::write_pnm16(out / panel_name("feature", a.level, kBandNames[bi], 1), normalize_panel(mean));
    }
    snap.set("checkpoint", fs::absolute(a.checkpoint).string());
    snap.set("sample", fs::absolute(a.sample).string());
  } else {
    throw ConfigError("inspect-subbands: give --image, or --checkpoint with --sample");
  }
  snap.save(out / "inspect.cfg");
  return kOk;
}

std::array<double, 3> parse_biases(const std::string& text) {
  std::array<double, 3> b{};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto comma = text.find(',', pos);
    if ((i < 2) == (comma == std::string::npos)) throw ConfigError("--biases needs three comma-separated values");
    try {
      b[i] = parse_real(text.substr(pos, i < 2 ? comma - pos : std::string::npos), "--biases");
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    pos = comma + 1;
  }
  return b;
}

int cmd_make_synthetic(const SynthArgs& a) {
  data::RenderOptions opts;
  opts.biases = parse_biases(a.biases);
  opts.bit_depth = a.bit_depth;
  if (a.bit_depth == 0 || a.bit_depth > 16) throw ConfigError("--bit-depth must lie in [1, 16]");
  const fs::path out(a.out);
  fs::create_directories(out);
  for (std::uint64_t i = 0; i < a.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04llu", static_cast<unsigned long long>(i));
    const auto spec = data::random_scene_spec(a.seed * 1000003ULL + i, a.width, a.height, a.channels, a.max_motion);
    data::save_sample(data::synth_sample(spec, opts, name), out / name);
  }
  KvFile snap;
  snap.set("command", "make-synthetic");
  snap.set("seed", a.seed);
  snap.set("count", a.count);
  snap.set("width", a.width);
  snap.set("height", a.height);
  snap.set("channels", a.channels);
  snap.set("max_motion", a.max_motion);
  snap.set("bit_depth", static_cast<std::uint64_t>(a.bit_depth));
  snap.set("biases", a.biases);
  snap.save(out / "synthetic.cfg");
  return kOk;
}

}  // namespace


int main(int argc, const char* const* argv) {
  CLI::App app{"Frequency-guided HDR fusion: training, inference and evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset directory");
  train_cmd->add_option("--dataset", ta.dataset, "Dataset root")->required();
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_option("--config", ta.config, "Training config file (key=value); flags override it");
  train_cmd->add_option("--seed", ta.seed, "Base seed for init, shuffling and augmentation");
  train_cmd->add_option("--steps", ta.steps, "Optimizer steps");
  train_cmd->add_option("--width", ta.width, "Feature channels");
  train_cmd->add_option("--batch", ta.batch, "Batch size");
  train_cmd->add_option("--crop", ta.crop, "Crop size (multiple of 8)");
  train_cmd->add_option("--lr-schedule", ta.lr_schedule, "step:lr,step:lr,...");
  train_cmd->add_option("--checkpoint-every", ta.checkpoint_every, "Numbered checkpoint cadence in steps");
  add_wavelet_option(*train_cmd, ta.wavelet);
  train_cmd->add_flag("--no-attention", ta.no_attention, "Disable attention masks");
  train_cmd->add_flag("--avg-hf-fusion", ta.avg_hf, "Average high-frequency bands instead of fusing them");
  train_cmd->add_flag("--no-sobel", ta.no_sobel, "Drop the Sobel term of the loss");
  train_cmd->add_flag("--forward-all-bands", ta.all_bands, "Forward all sub-bands into the merger");
  train_cmd->add_flag("--quiet", ta.quiet, "No progress output");

  InferArgs ia;
  auto* infer_cmd = app.add_subcommand("infer", "Fuse one bracket into an HDR image");
  infer_cmd->add_option("--checkpoint", ia.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--config", ia.config, "Architecture file (default: checkpoint with .cfg extension)");
  infer_cmd->add_option("--sample", ia.sample, "Sample directory");
  infer_cmd->add_option("--ldr", ia.ldr, "Three LDR images, shortest exposure first")->expected(3);
  infer_cmd->add_option("--exposure", ia.exposure, "Exposure bias file");
  infer_cmd->add_option("--out", ia.out, "Output directory")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint or a baseline on a dataset");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Model checkpoint");
  eval_cmd->add_option("--config", ea.config, "Architecture file (default: checkpoint with .cfg extension)");
  eval_cmd->add_option("--baseline", ea.baseline, "Score a fixed predictor instead of a model")
      ->check(CLI::IsMember({"triangle", "ground-truth"}));
  eval_cmd->add_option("--dataset", ea.dataset, "Dataset root")->required();
  eval_cmd->add_option("--out", ea.out, "Output directory")->required();

  InspectArgs na;
  std::optional<std::string> inspect_wavelet;
  auto* inspect_cmd = app.add_subcommand("inspect-subbands", "Write wavelet sub-band panels");
  inspect_cmd->add_option("--image", na.image, "Input image (.ppm, .pgm, .pfm)");
  inspect_cmd->add_option("--checkpoint", na.checkpoint, "Model checkpoint, for encoder feature bands");
  inspect_cmd->add_option("--config", na.config, "Architecture file");
  inspect_cmd->add_option("--sample", na.sample, "Sample directory (with --checkpoint)");
  inspect_cmd->add_option("--level", na.level, "Decomposition level");
  add_wavelet_option(*inspect_cmd, inspect_wavelet);
  inspect_cmd->add_option("--out", na.out, "Output directory")->required();

  SynthArgs sa;
  auto* synth_cmd = app.add_subcommand("make-synthetic", "Generate a synthetic bracket dataset");
  synth_cmd->add_option("--out", sa.out, "Dataset root")->required();
  synth_cmd->add_option("--seed", sa.seed, "Generator seed");
  synth_cmd->add_option("--count", sa.count, "Number of samples");
  synth_cmd->add_option("--width", sa.width, "Image width");
  synth_cmd->add_option("--height", sa.height, "Image height");
  synth_cmd->add_option("--channels", sa.channels, "1 or 3");
  synth_cmd->add_option("--max-motion", sa.max_motion, "Largest shape displacement in pixels");
  synth_cmd->add_option("--bit-depth", sa.bit_depth, "LDR quantization depth");
  synth_cmd->add_option("--biases", sa.biases, "Three exposure biases in EV, e.g. -2,0,2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*infer_cmd) return cmd_infer(ia);
    if (*eval_cmd) return cmd_eval(ea);
    if (*inspect_cmd) {
      if (inspect_wavelet) na.wavelet = *inspect_wavelet;
      return cmd_inspect(na);
    }
    if (*synth_cmd) return cmd_make_synthetic(sa);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"fhdrnet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fhdr::cli
