#include "fhdr/adam.hpp"

#include <cmath>

#include "fhdr/errors.hpp"

namespace fhdr {

void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state, const AdamOptions& opts) {
  if (!(opts.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(opts.eps > 0.0)) throw ConfigError("adam: eps must be positive");
  if (opts.beta1 < 0.0 || opts.beta1 >= 1.0 || opts.beta2 < 0.0 || opts.beta2 >= 1.0) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ShapeError("adam: no gradient for parameter '" + name + "'");
    require_same_shape(p, it->second, "adam gradient");
    auto m = state.first_moment.find(name);
    if (m != state.first_moment.end()) require_same_shape(p, m->second, "adam state");
  }

  const std::uint64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(t));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    auto [mit, m_new] = state.first_moment.try_emplace(name, p.shape());
    auto [vit, v_new] = state.second_moment.try_emplace(name, p.shape());
    auto pd = p.data();
    auto gd = g.data();
    auto md = mit->second.data();
    auto vd = vit->second.data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      md[i] = opts.beta1 * md[i] + (1.0 - opts.beta1) * gd[i];
      vd[i] = opts.beta2 * vd[i] + (1.0 - opts.beta2) * gd[i] * gd[i];
      const double m_hat = md[i] / bc1;
      const double v_hat = vd[i] / bc2;
      pd[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
  state.step = t;
}

}  // namespace fhdr
