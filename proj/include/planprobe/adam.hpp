#pragma once

#include <cstdint>
#include <vector>

#include "planprobe/nn.hpp"

namespace planprobe::nn {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moments for each parameter of one parameter list, in order.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  AdamState() = default;
  AdamState(const ParamList& params, AdamConfig cfg);
};

/// One bias-corrected Adam update using the accumulated `grad` of each param.
/// Throws NumericError (leaving parameters untouched) on non-finite gradients.
void adam_step(const ParamList& params, AdamState& state);

}  // namespace planprobe::nn
