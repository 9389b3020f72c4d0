#include "fhdr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

#include "fhdr/data.hpp"
#include "fhdr/errors.hpp"

namespace fhdr::metrics {

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.numel() == 0) throw ShapeError("mse: empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

double psnr(const Tensor& pred, const Tensor& gt, double peak) { return psnr_from_mse(mse(pred, gt), peak); }

double psnr_from_mse(double e, double peak) {
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  if (e < 0.0) throw ConfigError("psnr: negative mse");
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

namespace {

std::vector<double> gaussian_window(const SsimOptions& o) {
  std::vector<double> g(o.window);
  const double mid = (static_cast<double>(o.window) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < o.window; ++i) {
    const double d = static_cast<double>(i) - mid;
    g[i] = std::exp(-d * d / (2.0 * o.sigma * o.sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable 'valid' filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t k = g.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow), out(oh * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += g[j] * src[y * w + x + j];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += g[j] * rows[(y + j) * ow + x];
      out[y * ow + x] = s;
    }
  return out;
}

}  // namespace

double ssim(const Tensor& pred, const Tensor& gt, double dynamic_range, const SsimOptions& opts) {
  require_same_shape(pred, gt, "ssim");
  if (!(dynamic_range > 0.0)) throw ConfigError("ssim: dynamic range must be positive");
  const Shape& s = pred.shape();
  if (s.h < opts.window || s.w < opts.window) {
    throw GeometryError("ssim: image " + s.str() + " smaller than the " + std::to_string(opts.window) + "-pixel window");
  }
  const auto g = gaussian_window(opts);
  const double c1 = (opts.k1 * dynamic_range) * (opts.k1 * dynamic_range);
  const double c2 = (opts.k2 * dynamic_range) * (opts.k2 * dynamic_range);
  const std::size_t p = s.plane();
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> x(p), y(p), xx(p), yy(p), xy(p);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const double* a = pred.plane(n, c);
      const double* b = gt.plane(n, c);
      for (std::size_t i = 0; i < p; ++i) {
        x[i] = a[i];
        y[i] = b[i];
        xx[i] = a[i] * a[i];
        yy[i] = b[i] * b[i];
        xy[i] = a[i] * b[i];
      }
      const auto mx = filter_valid(x, s.h, s.w, g), my = filter_valid(y, s.h, s.w, g);
      const auto exx = filter_valid(xx, s.h, s.w, g), eyy = filter_valid(yy, s.h, s.w, g);
      const auto exy = filter_valid(xy, s.h, s.w, g);
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const double mxy = mx[i] * my[i];
        const double vx = exx[i] - mx[i] * mx[i];
        const double vy = eyy[i] - my[i] * my[i];
        const double cov = exy[i] - mxy;
        total += ((2.0 * mxy + c1) * (2.0 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      }
      count += mx.size();
    }
  }
  return total / static_cast<double>(count);
}

SampleScores score(const Tensor& pred, const Tensor& gt, double mu) {
  Tensor clamped = pred;
  for (double& v : clamped.data()) v = std::max(v, 0.0);
  const Tensor tp = mu_law(clamped, mu), tg = mu_law(gt, mu);
  SampleScores s;
  s.psnr_mu = psnr(tp, tg);
  s.psnr_l = psnr(clamped, gt);
  s.ssim_mu = ssim(tp, tg);
  s.ssim_l = ssim(clamped, gt);
  return s;
}

void EvalReport::recompute_mean() {
  mean = SampleScores{"mean"};
  if (samples.empty()) return;
  for (const auto& s : samples) {
    mean.psnr_mu += s.psnr_mu;
    mean.psnr_l += s.psnr_l;
    mean.ssim_mu += s.ssim_mu;
    mean.ssim_l += s.ssim_l;
  }
  const double n = static_cast<double>(samples.size());
  mean.psnr_mu /= n;
  mean.psnr_l /= n;
  mean.ssim_mu /= n;
  mean.ssim_l /= n;
}

namespace {
void put_scores(KvFile& kv, const std::string& prefix, const SampleScores& s) {
  kv.set(prefix + ".psnr_mu", s.psnr_mu);
  kv.set(prefix + ".psnr_l", s.psnr_l);
  kv.set(prefix + ".ssim_mu", s.ssim_mu);
  kv.set(prefix + ".ssim_l", s.ssim_l);
}

SampleScores get_scores(const KvFile& kv, const std::string& prefix) {
  SampleScores s;
  s.psnr_mu = kv.get_real(prefix + ".psnr_mu");
  s.psnr_l = kv.get_real(prefix + ".psnr_l");
  s.ssim_mu = kv.get_real(prefix + ".ssim_mu");
  s.ssim_l = kv.get_real(prefix + ".ssim_l");
  return s;
}
}  // namespace

KvFile EvalReport::to_kv() const {
  KvFile kv;
  kv.set("format", "fhdr-eval-report/1");
  kv.set("config_digest", config_digest);
  kv.set("checkpoint_digest", checkpoint_digest);
  kv.set("samples", static_cast<std::uint64_t>(samples.size()));
  kv.set("skipped", static_cast<std::uint64_t>(skipped));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string prefix = "sample." + std::to_string(i);
    kv.set(prefix + ".name", samples[i].name);
    put_scores(kv, prefix, samples[i]);
  }
  put_scores(kv, "mean", mean);
  return kv;
}

EvalReport EvalReport::from_kv(const KvFile& kv) {
  if (kv.get("format") != "fhdr-eval-report/1") throw IoError(kv.origin() + ": unknown report format");
  EvalReport r;
  r.config_digest = kv.get("config_digest");
  r.checkpoint_digest = kv.get("checkpoint_digest");
  r.skipped = kv.get_uint("skipped");
  const std::size_t n = kv.get_uint("samples");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string prefix = "sample." + std::to_string(i);
    SampleScores s = get_scores(kv, prefix);
    s.name = kv.get(prefix + ".name");
    r.samples.push_back(s);
  }
  r.mean = get_scores(kv, "mean");
  r.mean.name = "mean";
  return r;
}

std::string EvalReport::table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-24s %10s %10s %10s %10s\n", "sample", "PSNR-mu", "PSNR-L", "SSIM-mu", "SSIM-L");
  out += line;
  auto row = [&](const SampleScores& s) {
    std::snprintf(line, sizeof(line), "%-24s %10.4f %10.4f %10.4f %10.4f\n", s.name.c_str(), s.psnr_mu, s.psnr_l,
                  s.ssim_mu, s.ssim_l);
    out += line;
  };
  for (const auto& s : samples) row(s);
  row(mean);
  std::snprintf(line, sizeof(line), "skipped (no ground truth): %zu\nconfig digest: %s\ncheckpoint digest: %s\n",
                skipped, config_digest.c_str(), checkpoint_digest.c_str());
  out += line;
  return out;
}

EvalReport evaluate(const std::vector<BracketSample>& samples, const Predictor& predict, double mu) {
  EvalReport report;
  for (const auto& sample : samples) {
    if (!sample.gt_hdr) {
      ++report.skipped;
      std::cerr << "warning: sample '" << sample.name << "' has no ground truth; skipped\n";
      continue;
    }
    SampleScores s = score(predict(sample), *sample.gt_hdr, mu);
    s.name = sample.name;
    report.samples.push_back(s);
  }
  report.recompute_mean();
  return report;
}

EvalReport evaluate_model(const model::ModelParams& params, const model::ModelConfig& cfg,
                          const std::filesystem::path& dataset, double gamma, double mu) {
  model::check_params(params, cfg);
  const auto samples = data::load_dataset(dataset);
  return evaluate(
      samples, [&](const BracketSample& s) { return model::predict(params, cfg, build_input(s, gamma)); }, mu);
}

}  // namespace fhdr::metrics
