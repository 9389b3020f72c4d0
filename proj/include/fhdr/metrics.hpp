#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fhdr/hdr.hpp"
#include "fhdr/kvfile.hpp"
#include "fhdr/model.hpp"

namespace fhdr::metrics {

/// Reported in place of +inf when the error is exactly zero (and as an upper bound).
inline constexpr double kPsnrCap = 99.0;

double mse(const Tensor& a, const Tensor& b);
/// 10 log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(const Tensor& pred, const Tensor& gt, double peak = 1.0);
/// 10 log10(peak^2 / mse), capped at kPsnrCap (also for mse == 0).
double psnr_from_mse(double mse, double peak = 1.0);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean structural similarity over valid 11x11 Gaussian windows, channels and batch.
double ssim(const Tensor& pred, const Tensor& gt, double dynamic_range = 1.0, const SsimOptions& opts = {});

struct SampleScores {
  std::string name;
  double psnr_mu = 0.0;
  double psnr_l = 0.0;
  double ssim_mu = 0.0;
  double ssim_l = 0.0;
  bool operator==(const SampleScores&) const = default;
};

/// All four metrics of a prediction; the prediction is clamped at 0 first.
SampleScores score(const Tensor& pred, const Tensor& gt, double mu = kDefaultMu);

struct EvalReport {
  std::vector<SampleScores> samples;
  SampleScores mean;
  std::size_t skipped = 0;
  std::string config_digest;
  std::string checkpoint_digest;

  void recompute_mean();
  /// Machine-readable key=value form (see README for the key list).
  KvFile to_kv() const;
  static EvalReport from_kv(const KvFile& kv);
  /// Human-readable fixed-width table.
  std::string table() const;
  bool operator==(const EvalReport&) const = default;
};

using Predictor = std::function<Tensor(const BracketSample&)>;

/// Scores `predict` on every sample with a ground truth; the others are counted as skipped.
EvalReport evaluate(const std::vector<BracketSample>& samples, const Predictor& predict, double mu = kDefaultMu);

/// Full-frame model evaluation of a dataset directory.
EvalReport evaluate_model(const model::ModelParams& params, const model::ModelConfig& cfg,
                          const std::filesystem::path& dataset, double gamma = kDefaultGamma,
                          double mu = kDefaultMu);

}  // namespace fhdr::metrics
