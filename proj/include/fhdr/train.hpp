#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fhdr/adam.hpp"
#include "fhdr/hdr.hpp"
#include "fhdr/kvfile.hpp"
#include "fhdr/model.hpp"

namespace fhdr::train {

/// The learning rate is `lr` from step `start` until the next stage begins.
struct LrStage {
  std::uint64_t start = 0;
  double lr = 0.0;
  bool operator==(const LrStage&) const = default;
};

/// "0:2e-4,100:2e-5" -> stages. Starts must be strictly increasing and begin at 0.
std::vector<LrStage> parse_lr_schedule(const std::string& text);
std::string format_lr_schedule(const std::vector<LrStage>& stages);

/// 2e-4, then 2e-5 from steps/3, then 2e-6 from 2*steps/3 (stages that would
/// start at the same step collapse onto the later rate).
std::vector<LrStage> default_lr_schedule(std::uint64_t steps);

struct TrainConfig {
  std::uint64_t steps = 5000;
  std::uint64_t batch = 16;
  std::uint64_t crop = 256;
  /// Empty means default_lr_schedule(steps).
  std::vector<LrStage> lr_schedule;
  double lambda = kDefaultLambda;
  double mu = kDefaultMu;
  double gamma = kDefaultGamma;
  bool sobel = true;
  model::ModelConfig model;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
  std::uint64_t augment_seed = 3;
  /// Write a numbered checkpoint every this many steps; 0 disables.
  std::uint64_t checkpoint_every = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws ConfigError on any invalid field.
  void validate() const;
  std::vector<LrStage> effective_schedule() const;
  double lr_at(std::uint64_t step) const;
  /// Sobel weight actually used by the loss.
  double effective_lambda() const { return sobel ? lambda : 0.0; }

  KvFile to_kv() const;
  /// Unknown keys are a ConfigError; missing keys keep their defaults.
  static TrainConfig from_kv(const KvFile& kv);
  /// Applies the keys present in `kv` on top of this config.
  void merge(const KvFile& kv);

  bool operator==(const TrainConfig&) const = default;
};

/// Architecture plus the tone-mapping constants needed to run a checkpoint.
struct ArchConfig {
  model::ModelConfig model;
  double gamma = kDefaultGamma;
  double mu = kDefaultMu;

  KvFile to_kv() const;
  static ArchConfig from_kv(const KvFile& kv);
  bool operator==(const ArchConfig&) const = default;
};

// Files written into the output directory.
inline constexpr const char* kLossLog = "loss.log";
inline constexpr const char* kFinalCheckpoint = "model.ckpt";
inline constexpr const char* kArchFile = "model.cfg";
inline constexpr const char* kConfigSnapshot = "train.cfg";
inline constexpr const char* kAbortFile = "abort.txt";

/// Checkpoint path next to `ckpt` holding its architecture.
std::filesystem::path arch_path_for(const std::filesystem::path& ckpt);

struct TrainResult {
  std::vector<double> losses;
  model::ModelParams params;
};

using ProgressFn = std::function<void(std::uint64_t step, double loss, double lr)>;

/// Seed for the crop and transform of batch slot `slot` at `step`.
std::uint64_t augmentation_seed(std::uint64_t base, std::uint64_t step, std::uint64_t slot);

/// Runs the optimization loop, writing the loss log, checkpoints, the
/// architecture file and a config snapshot into `out`. A non-finite loss or
/// parameter throws NumericError after writing abort.txt with the step.
TrainResult run(const TrainConfig& cfg, const std::vector<BracketSample>& samples, const std::filesystem::path& out,
                const ProgressFn& progress = {});

/// Reads a loss log back into values.
std::vector<double> read_loss_log(const std::filesystem::path& path);

}  // namespace fhdr::train
