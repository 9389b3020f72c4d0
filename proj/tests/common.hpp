#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fhdr/autodiff.hpp"
#include "fhdr/tensor.hpp"

namespace fhdr::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

/// Random values whose magnitude stays at least `gap` away from zero, for ops with a kink at 0.
inline Tensor random_away_from_zero(Shape shape, std::uint64_t seed, double gap = 0.05) {
  Tensor t = random_tensor(shape, seed);
  for (double& v : t.data()) v = v < 0 ? v - gap : v + gap;
  return t;
}

using ScalarFn = std::function<ad::Var(ad::Graph&, std::span<const ad::Var>)>;

inline double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  return f(g, vars).value().item();
}

/// Largest over inputs of ||analytic - numeric|| / max(||analytic||, ||numeric||)
/// with central differences of the given step.
inline double gradcheck(const ScalarFn& f, std::vector<Tensor> inputs, double step = 1e-3) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(g.parameter(t));
  g.backward(f(g, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = g.grad(vars[k]);
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      const double orig = inputs[k].data()[i];
      inputs[k].data()[i] = orig + step;
      const double up = evaluate(f, inputs);
      inputs[k].data()[i] = orig - step;
      const double down = evaluate(f, inputs);
      inputs[k].data()[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[i];
      diff += (a - numeric) * (a - numeric);
      na += a * a;
      nn += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

/// Scalar projection <op(x), r> so that non-scalar ops can be checked.
inline ad::Var project(ad::Graph& g, ad::Var v, std::uint64_t seed) {
  return ad::sum(ad::mul(v, g.constant(random_tensor(v.shape(), seed))));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fhdr_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fhdr::testing
