#include "fhdr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fhdr/checkpoint.hpp"
#include "fhdr/errors.hpp"
#include "fhdr/image_io.hpp"
#include "fhdr/kvfile.hpp"

namespace fhdr::data {

void SceneSpec::validate() const {
  if (width == 0 || height == 0) throw ConfigError("scene: degenerate canvas " + std::to_string(width) + "x" + std::to_string(height));
  if (channels != 1 && channels != 3) throw ConfigError("scene: channels must be 1 or 3");
  if (!(bg_base >= 0.0)) throw ConfigError("scene: background radiance must be non-negative");
  for (double t : bg_tint) {
    if (!(t >= 0.0)) throw ConfigError("scene: background tint must be non-negative");
  }
  for (const auto& s : shapes) {
    for (double r : s.radiance) {
      if (!(r >= 0.0)) throw ConfigError("scene: shape radiance must be non-negative");
    }
    if (s.displacement[kReferenceFrame][0] != 0.0 || s.displacement[kReferenceFrame][1] != 0.0) {
      throw ConfigError("scene: the reference frame must have zero displacement");
    }
    if (s.kind == ShapeKind::striped_rectangle && !(s.stripe_period > 0.0)) {
      throw ConfigError("scene: stripe period must be positive");
    }
  }
}

SceneSpec random_scene_spec(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t channels,
                            double max_motion) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  SceneSpec spec;
  spec.seed = seed;
  spec.width = width;
  spec.height = height;
  spec.channels = channels;
  spec.bg_base = uni(0.05, 0.15);
  spec.bg_log_grad_x = uni(-1.5, 1.5);
  spec.bg_log_grad_y = uni(-1.5, 1.5);
  for (double& t : spec.bg_tint) t = channels == 1 ? 1.0 : uni(0.7, 1.3);

  const double dim = static_cast<double>(std::min(width, height));
  auto tint = [&](double level) {
    std::array<double, 3> r{};
    for (std::size_t c = 0; c < 3; ++c) r[c] = channels == 1 && c > 0 ? r[0] : level * uni(0.6, 1.4);
    return r;
  };

  ForegroundShape shadow;
  shadow.kind = ShapeKind::rectangle;
  shadow.half_w = dim * uni(0.08, 0.14);
  shadow.half_h = dim * uni(0.08, 0.14);
  shadow.cx = uni(shadow.half_w, width - shadow.half_w);
  shadow.cy = uni(shadow.half_h, height - shadow.half_h);
  shadow.radiance = tint(2e-6 * spec.bg_base);
  spec.shapes.push_back(shadow);

  constexpr ShapeKind kKinds[] = {ShapeKind::disc, ShapeKind::striped_rectangle, ShapeKind::rectangle};
  for (std::size_t k = 0; k < 3; ++k) {
    ForegroundShape s;
    s.kind = kKinds[k];
    s.half_w = dim * uni(0.09, 0.18);
    s.half_h = s.kind == ShapeKind::disc ? s.half_w : dim * uni(0.09, 0.18);
    s.cx = uni(0.15 * width, 0.85 * width);
    s.cy = uni(0.15 * height, 0.85 * height);
    s.radiance = tint(spec.bg_base * uni(0.3, 3.0));
    s.stripe_period = uni(2.5, 5.0);
    s.stripes_horizontal = uni(0.0, 1.0) < 0.5;
    if (k < 2 && max_motion > 0.0) {
      for (std::size_t f : {std::size_t{0}, std::size_t{2}}) {
        const double angle = uni(0.0, 2.0 * M_PI);
        const double mag = max_motion * uni(0.5, 1.0);
        s.displacement[f] = {mag * std::cos(angle), mag * std::sin(angle)};
      }
    }
    spec.shapes.push_back(s);
  }

  ForegroundShape lamp;
  lamp.kind = ShapeKind::disc;
  lamp.half_w = lamp.half_h = std::max(1.5, 0.045 * dim);
  lamp.cx = uni(lamp.half_w, width - lamp.half_w);
  lamp.cy = uni(lamp.half_h, height - lamp.half_h);
  lamp.radiance = tint(40.0 * spec.bg_base);
  spec.shapes.push_back(lamp);
  return spec;
}

namespace {

bool inside(const ForegroundShape& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  if (s.kind == ShapeKind::disc) return dx * dx + dy * dy <= s.half_w * s.half_w;
  return std::abs(dx) <= s.half_w && std::abs(dy) <= s.half_h;
}

double shape_radiance(const ForegroundShape& s, std::size_t c, double x, double y) {
  double r = s.radiance[c];
  if (s.kind == ShapeKind::striped_rectangle) {
    const double u = (s.stripes_horizontal ? y - s.cy : x - s.cx) / s.stripe_period;
    if (std::fmod(std::floor(u), 2.0) != 0.0) r *= 0.3;
  }
  return r;
}

}  // namespace

Tensor synth_scene(const SceneSpec& spec, std::size_t frame) {
  spec.validate();
  if (frame > 2) throw ConfigError("synth_scene: frame index must be 0, 1 or 2");
  Tensor out({1, spec.channels, spec.height, spec.width});
  const double w = static_cast<double>(spec.width), h = static_cast<double>(spec.height);
  for (std::size_t y = 0; y < spec.height; ++y) {
    for (std::size_t x = 0; x < spec.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double bg = spec.bg_base * std::exp(spec.bg_log_grad_x * (px / w - 0.5) + spec.bg_log_grad_y * (py / h - 0.5));
      for (std::size_t c = 0; c < spec.channels; ++c) {
        double v = bg * spec.bg_tint[c];
        for (const auto& s : spec.shapes) {
          const double sx = px - s.displacement[frame][0], sy = py - s.displacement[frame][1];
          if (inside(s, sx, sy)) v = shape_radiance(s, c, sx, sy);
        }
        out.at(0, c, y, x) = v;
      }
    }
  }
  return out;
}

BracketSample render_bracket(const std::array<Tensor, 3>& radiance, const RenderOptions& opts) {
  if (opts.bit_depth < 1 || opts.bit_depth > 16) throw ConfigError("render: bit depth must be in [1, 16]");
  if (!(opts.gamma > 0.0)) throw ConfigError("render: gamma must be positive");
  for (const Tensor& r : radiance) {
    require_same_shape(r, radiance[0], "render_bracket");
    for (double v : r.data()) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("render: radiance must be finite and non-negative");
    }
  }
  BracketSample sample;
  for (std::size_t i = 0; i < 3; ++i) sample.exposure[i] = exposure_from_bias(opts.biases[i]);

  const double t_ref = sample.exposure[kReferenceFrame];
  std::vector<double> values(radiance[kReferenceFrame].data().begin(), radiance[kReferenceFrame].data().end());
  const std::size_t idx = static_cast<std::size_t>(std::floor(0.99 * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + idx, values.end());
  const double p99 = values[idx] * t_ref;
  const double scale = p99 > 0.0 ? 1.0 / p99 : 1.0;

  const double levels = std::exp2(static_cast<double>(opts.bit_depth)) - 1.0;
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor ldr(radiance[i].shape());
    for (std::size_t k = 0; k < ldr.numel(); ++k) {
      const double exposed = radiance[i].data()[k] * scale * sample.exposure[i];
      const double l = std::clamp(std::pow(exposed, 1.0 / opts.gamma), 0.0, 1.0);
      ldr.data()[k] = std::round(l * levels) / levels;
    }
    sample.ldr[i] = std::move(ldr);
  }
  Tensor gt(radiance[kReferenceFrame].shape());
  for (std::size_t k = 0; k < gt.numel(); ++k) {
    gt.data()[k] = static_cast<double>(static_cast<float>(radiance[kReferenceFrame].data()[k] * scale));
  }
  sample.gt_hdr = std::move(gt);
  sample.validate();
  return sample;
}

BracketSample synth_sample(const SceneSpec& spec, const RenderOptions& opts, std::string name) {
  const std::array<Tensor, 3> radiance{synth_scene(spec, 0), synth_scene(spec, 1), synth_scene(spec, 2)};
  BracketSample s = render_bracket(radiance, opts);
  s.name = std::move(name);
  return s;
}

bool spans_bracket(const BracketSample& sample) {
  const auto& shortest = sample.ldr[0].data();
  const auto& longest = sample.ldr[2].data();
  const bool saturates = std::any_of(shortest.begin(), shortest.end(), [](double v) { return v >= 1.0; });
  const bool underflows = std::any_of(longest.begin(), longest.end(), [](double v) { return v < 0.01; });
  return saturates && underflows;
}

std::string ldr_file_name(std::size_t frame) { return "ldr_" + std::to_string(frame + 1) + ".ppm"; }

namespace {
std::string ldr_path_name(std::size_t frame, std::size_t channels) {
  std::string name = ldr_file_name(frame);
  if (channels == 1) name.replace(name.size() - 3, 3, "pgm");
  return name;
}
}  // namespace

void save_sample(const BracketSample& sample, const std::filesystem::path& dir) {
  sample.validate();
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < 3; ++i) {
    image_io::write_pnm16(dir / ldr_path_name(i, sample.shape().c), sample.ldr[i]);
  }
  std::string text;
  for (double t : sample.exposure) text += format_real(std::log2(t)) + "\n";
  write_text_atomic(dir / kExposureFile, text);
  if (sample.gt_hdr) image_io::write_pfm(dir / kGroundTruthFile, *sample.gt_hdr);
}

std::array<double, 3> read_exposure_biases(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(file.string() + ": cannot open exposure file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    // Accept the typographic minus sign as well.
    for (std::size_t p; (p = line.find("\xe2\x88\x92")) != std::string::npos;) line.replace(p, 3, "-");
    const auto b = line.find_first_not_of(" \t\r");
    const auto e = line.find_last_not_of(" \t\r");
    if (b == std::string::npos) continue;
    lines.push_back(line.substr(b, e - b + 1));
  }
  if (lines.size() != 3) {
    throw IoError(file.string() + ": expected exactly 3 exposure biases, found " + std::to_string(lines.size()));
  }
  std::array<double, 3> biases{};
  for (std::size_t i = 0; i < 3; ++i) {
    biases[i] = parse_real(lines[i], file.string() + " line " + std::to_string(i + 1));
    if (i > 0 && !(biases[i] > biases[i - 1])) throw IoError(file.string() + ": exposure biases must strictly increase");
  }
  return biases;
}

BracketSample load_sample(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + ": sample directory does not exist");
  BracketSample sample;
  sample.name = dir.filename().string();
  const auto biases = read_exposure_biases(dir / kExposureFile);
  for (std::size_t i = 0; i < 3; ++i) {
    sample.exposure[i] = exposure_from_bias(biases[i]);
    std::filesystem::path p = dir / ldr_file_name(i);
    if (!std::filesystem::exists(p)) p = dir / ldr_path_name(i, 1);
    if (!std::filesystem::exists(p)) throw IoError((dir / ldr_file_name(i)).string() + ": missing LDR frame");
    sample.ldr[i] = image_io::read_pnm(p);
    if (sample.ldr[i].shape() != sample.ldr[0].shape()) {
      throw IoError(p.string() + ": dimensions " + sample.ldr[i].shape().str() + " differ from frame 1 " +
                    sample.ldr[0].shape().str());
    }
  }
  const auto gt = dir / kGroundTruthFile;
  if (std::filesystem::exists(gt)) {
    sample.gt_hdr = image_io::read_pfm(gt);
    if (sample.gt_hdr->shape() != sample.ldr[0].shape()) {
      throw IoError(gt.string() + ": dimensions " + sample.gt_hdr->shape().str() + " differ from the LDR frames " +
                    sample.ldr[0].shape().str());
    }
  }
  sample.validate();
  return sample;
}

std::vector<std::filesystem::path> list_samples(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw IoError(root.string() + ": dataset root does not exist");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / kExposureFile)) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<BracketSample> load_dataset(const std::filesystem::path& root) {
  std::vector<BracketSample> out;
  for (const auto& dir : list_samples(root)) out.push_back(load_sample(dir));
  if (out.empty()) throw IoError(root.string() + ": no samples found");
  return out;
}

Augmentation random_augmentation(std::size_t height, std::size_t width, std::size_t crop, std::uint64_t seed) {
  if (crop == 0 || crop > height || crop > width) {
    throw GeometryError("crop " + std::to_string(crop) + " exceeds image " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
  std::mt19937_64 rng(seed);
  Augmentation a;
  a.y0 = std::uniform_int_distribution<std::size_t>(0, height - crop)(rng);
  a.x0 = std::uniform_int_distribution<std::size_t>(0, width - crop)(rng);
  a.flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  a.rot90 = std::uniform_int_distribution<int>(0, 3)(rng);
  return a;
}

Tensor flip_horizontal(const Tensor& t) {
  const Shape& s = t.shape();
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y, x) = t.at(n, c, y, s.w - 1 - x);
  return out;
}

Tensor flip_vertical(const Tensor& t) {
  const Shape& s = t.shape();
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) out.at(n, c, y, x) = t.at(n, c, s.h - 1 - y, x);
  return out;
}

Tensor rotate90(const Tensor& t, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return t;
  const Shape& s = t.shape();
  Tensor out({s.n, s.c, s.w, s.h});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.w; ++y)
        for (std::size_t x = 0; x < s.h; ++x) out.at(n, c, y, x) = t.at(n, c, x, s.w - 1 - y);
  return rotate90(out, k - 1);
}

Tensor apply_augmentation(const Tensor& t, std::size_t crop, const Augmentation& aug) {
  if (crop == 0 || aug.y0 + crop > t.shape().h || aug.x0 + crop > t.shape().w) {
    throw GeometryError("crop " + std::to_string(crop) + " at (" + std::to_string(aug.y0) + "," +
                        std::to_string(aug.x0) + ") exceeds " + t.shape().str());
  }
  Tensor out = fhdr::crop(t, aug.y0, aug.x0, crop, crop);
  if (aug.flip) out = flip_horizontal(out);
  return rotate90(out, aug.rot90);
}

BracketSample crop_augment(const BracketSample& sample, std::size_t crop, const Augmentation& aug) {
  BracketSample out;
  out.name = sample.name;
  out.exposure = sample.exposure;
  for (std::size_t i = 0; i < 3; ++i) out.ldr[i] = apply_augmentation(sample.ldr[i], crop, aug);
  if (sample.gt_hdr) out.gt_hdr = apply_augmentation(*sample.gt_hdr, crop, aug);
  return out;
}

BracketSample crop_augment(const BracketSample& sample, std::size_t crop, std::uint64_t seed) {
  if (crop % 8 != 0) throw GeometryError("crop size must be a multiple of 8, got " + std::to_string(crop));
  return crop_augment(sample, crop, random_augmentation(sample.shape().h, sample.shape().w, crop, seed));
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch, std::uint64_t shuffle_seed)
    : size_(dataset_size), batch_(batch), rng_(shuffle_seed), order_(dataset_size) {
  if (size_ == 0 || batch_ == 0) throw ConfigError("batch sampler: dataset and batch must be non-empty");
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> out;
  out.reserve(batch_);
  while (out.size() < batch_) {
    if (cursor_ == size_) reshuffle();
    out.push_back(order_[cursor_++]);
  }
  return out;
}

}  // namespace fhdr::data
