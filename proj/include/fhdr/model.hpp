#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fhdr/adam.hpp"
#include "fhdr/autodiff.hpp"
#include "fhdr/wavelet.hpp"

/// The frequency-guided fusion network.
///
/// Data flow for three (N, 2C, H, W) inputs, width w:
///
///   encoder (weights shared by the frames)
///     conv1 -> act -> DWT                level-1 bands at H/2
///     conv2(LL1) -> act -> DWT           level-2 bands at H/4
///   merger
///     masks M1, M3 from (LL2_ref, LL2_i); LL2_i' = M_i * LL2_i
///     conv(concat(LL2_1', LL2_2, LL2_3')) -> act -> DWT     level 3 at H/8
///     LL3 -> residual blocks -> IDWT with the level-3 detail bands   F at H/4
///   frequency-guided upsampling, level 2 then level 1
///     detail groups {LH_1..3}, {HL_1..3}, {HH_1..3} -> conv, act, conv
///     LL side: masks as in the merger, conv(concat(LL_1', LL_2, LL_3', F)) -> act
///     IDWT -> squeeze conv -> act                           doubles F
///   output conv(F + conv1 features of the reference frame) -> C channels
namespace fhdr::model {

struct ModelConfig {
  std::size_t image_channels = 3;
  std::size_t width = 64;
  wavelet::Kind wavelet = wavelet::Kind::haar;
  bool attention = true;
  /// Replace the two-conv detail fusion by the pixel mean of the three bands.
  bool avg_hf_fusion = false;
  /// Feed all four sub-bands (not only LL) to conv2 and to the merger.
  bool forward_all_bands = false;
  std::size_t res_blocks = 9;
  double leaky_slope = 0.01;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Input extents must be multiples of this.
inline constexpr std::size_t kSpatialMultiple = 8;

using ModelParams = NamedTensors;

inline constexpr double kOutputBiasInit = 0.5;
inline constexpr double kOutputGainInit = 0.1;

enum class InitRule { fan_in, zero, constant };

struct ParamSpec {
  std::string name;
  Shape shape;
  InitRule init;
  /// Normal std for fan_in arrays (sqrt(2 / fan_in), scaled down on the output head); 0 otherwise.
  double init_std;
  /// Fill value for InitRule::constant.
  double init_value = 0.0;
};

/// Every learnable array for `cfg`, in a fixed order.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

/// Fan-in-scaled normal weights, zero biases, zero last conv of each residual block.
/// The output head starts with kOutputBiasInit and weights scaled by kOutputGainInit so that the
/// initial prediction sits inside the clamp's live region.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Throws ShapeError unless `params` has exactly the names and shapes of `cfg`.
void check_params(const ModelParams& params, const ModelConfig& cfg);

/// Parameters materialized as graph leaves.
class BoundParams {
 public:
  BoundParams(ad::Graph& graph, const ModelParams& params, bool trainable);

  ad::Var operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return vars_.count(name) != 0; }
  /// Gradients of every parameter after graph.backward().
  NamedTensors gradients() const;

 private:
  ad::Graph* graph_;
  std::map<std::string, ad::Var> vars_;
};

struct FrameFeatures {
  /// conv1 output at full resolution.
  ad::Var features;
  ad::Var level1;  // packed bands, H/2
  ad::Var level2;  // packed bands, H/4
};

struct EncoderOutput {
  std::array<FrameFeatures, 3> frames;
};

EncoderOutput encode(const std::array<ad::Var, 3>& inputs, const BoundParams& p, const ModelConfig& cfg);

/// sigmoid(conv_b(act(conv_a(concat(ref, sup))))) with parameters under `prefix`.
ad::Var attention_mask(ad::Var ref, ad::Var sup, const BoundParams& p, const std::string& prefix, double slope);

/// Fuses the three (packed when forward_all_bands) level-2 features into F.
ad::Var merge(const std::array<ad::Var, 3>& lows, const BoundParams& p, const ModelConfig& cfg);

/// One frequency-guided upsampling step; `prefix` is "fgu2" or "fgu1".
ad::Var fgu(const std::array<wavelet::VarBands, 3>& bands, ad::Var fused_below, const BoundParams& p,
            const ModelConfig& cfg, const std::string& prefix);

/// Predicted linear HDR, (N, C, H, W). H and W must be multiples of 8.
ad::Var forward(const std::array<ad::Var, 3>& inputs, const BoundParams& p, const ModelConfig& cfg);

/// Inference on plain tensors; pads to a multiple of 8 by edge replication and
/// crops the prediction back. Output is clamped at 0.
Tensor predict(const ModelParams& params, const ModelConfig& cfg, const std::array<Tensor, 3>& inputs);

}  // namespace fhdr::model
