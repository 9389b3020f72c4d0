#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "fhdr/hdr.hpp"

namespace fhdr::data {

enum class ShapeKind { rectangle, disc, striped_rectangle };

/// One foreground object. Positions and sizes are in pixels.
struct ForegroundShape {
  ShapeKind kind = ShapeKind::rectangle;
  double cx = 0.0, cy = 0.0;
  /// Half width/height for rectangles, radius for discs.
  double half_w = 0.0, half_h = 0.0;
  std::array<double, 3> radiance{};
  /// Stripe period in pixels (striped rectangles); stripes alternate radiance and 0.3 * radiance.
  double stripe_period = 4.0;
  bool stripes_horizontal = true;
  /// (dx, dy) per frame; the reference frame's entry must be zero.
  std::array<std::array<double, 2>, 3> displacement{};
};

/// Procedural HDR scene: an exponential background gradient plus painted shapes.
///
/// background(x, y, c) = base * tint[c] * exp(log_grad_x * (x/W - 0.5) + log_grad_y * (y/H - 0.5))
struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t width = 64, height = 64, channels = 3;
  double bg_base = 0.1;
  double bg_log_grad_x = 0.0, bg_log_grad_y = 0.0;
  std::array<double, 3> bg_tint{1.0, 1.0, 1.0};
  /// Painted in order, later shapes occlude earlier ones.
  std::vector<ForegroundShape> shapes;

  void validate() const;
};

/// Random but seed-deterministic scene with a bright lamp that saturates the
/// short exposure, a deep shadow that underflows the long one, textured and
/// plain shapes, and up to `max_motion` pixels of per-frame shape motion.
SceneSpec random_scene_spec(std::uint64_t seed, std::size_t width, std::size_t height, std::size_t channels,
                            double max_motion);

/// Radiance (1, C, H, W) of frame `frame` (shapes displaced accordingly).
Tensor synth_scene(const SceneSpec& spec, std::size_t frame = kReferenceFrame);

struct RenderOptions {
  std::array<double, 3> biases{-2.0, 0.0, 2.0};
  double gamma = kDefaultGamma;
  /// LDR quantization depth; stored files are 16-bit regardless.
  unsigned bit_depth = 8;
};

/// Exposes three radiance maps (already displaced per frame) into a bracket.
///
/// All maps are scaled by one factor chosen so that the 99th percentile of the
/// reference radiance times its exposure is 1. Frame i is
/// L_i = quantize(clamp((H_i t_i)^(1/gamma), 0, 1)); the ground truth is the
/// scaled reference radiance rounded to float precision.
BracketSample render_bracket(const std::array<Tensor, 3>& radiance, const RenderOptions& opts);

/// synth_scene for each frame followed by render_bracket.
BracketSample synth_sample(const SceneSpec& spec, const RenderOptions& opts, std::string name = {});

/// True if some pixel saturates the shortest exposure and some pixel stays
/// below 1% of full scale in the longest.
bool spans_bracket(const BracketSample& sample);

// Dataset layout: <root>/<sample>/{ldr_1.ppm, ldr_2.ppm, ldr_3.ppm, exposure.txt, hdr_gt.pfm}
// exposure.txt holds three EV biases, one per line, strictly increasing.
inline constexpr const char* kExposureFile = "exposure.txt";
inline constexpr const char* kGroundTruthFile = "hdr_gt.pfm";
std::string ldr_file_name(std::size_t frame);

void save_sample(const BracketSample& sample, const std::filesystem::path& dir);
/// The ground truth is optional on load; everything else is required.
BracketSample load_sample(const std::filesystem::path& dir);
/// Parses an exposure file into biases.
std::array<double, 3> read_exposure_biases(const std::filesystem::path& file);

/// Sample directories of `root` in lexicographic order.
std::vector<std::filesystem::path> list_samples(const std::filesystem::path& root);
std::vector<BracketSample> load_dataset(const std::filesystem::path& root);

/// Crop window plus a rigid transform: horizontal flip, then `rot90` quarter
/// turns counter-clockwise.
struct Augmentation {
  std::size_t y0 = 0, x0 = 0;
  bool flip = false;
  int rot90 = 0;
};

Augmentation random_augmentation(std::size_t height, std::size_t width, std::size_t crop, std::uint64_t seed);

Tensor flip_horizontal(const Tensor& t);
Tensor flip_vertical(const Tensor& t);
/// Counter-clockwise quarter turns.
Tensor rotate90(const Tensor& t, int quarter_turns);
Tensor apply_augmentation(const Tensor& t, std::size_t crop, const Augmentation& aug);

/// Applies one crop window and transform to all three frames and the ground truth.
BracketSample crop_augment(const BracketSample& sample, std::size_t crop, const Augmentation& aug);
BracketSample crop_augment(const BracketSample& sample, std::size_t crop, std::uint64_t seed);

/// Deterministic epoch-wise shuffled index stream.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch, std::uint64_t shuffle_seed);
  std::vector<std::size_t> next();

 private:
  void reshuffle();

  std::size_t size_;
  std::size_t batch_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace fhdr::data
