#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "fhdr/tensor.hpp"

namespace fhdr {

/// Named parameter (or gradient) arrays in deterministic name order.
using NamedTensors = std::map<std::string, Tensor>;

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates per parameter plus the step counter.
struct AdamState {
  NamedTensors first_moment;
  NamedTensors second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place.
///
/// Moments for a parameter are created (zero) on first sight. Every parameter
/// must have a gradient of identical shape; the step counter advances by one.
void adam_step(NamedTensors& params, const NamedTensors& grads, AdamState& state, const AdamOptions& opts);

}  // namespace fhdr
