#include "planprobe/adam.hpp"

#include <cmath>

namespace planprobe::nn {

AdamState::AdamState(const ParamList& params, AdamConfig cfg) : config(cfg) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Param* p : params) {
    first_moment.emplace_back(p->value.rows(), p->value.cols());
    second_moment.emplace_back(p->value.rows(), p->value.cols());
  }
}

void adam_step(const ParamList& params, AdamState& state) {
  if (params.size() != state.first_moment.size())
    throw ShapeError("adam: state tracks " + std::to_string(state.first_moment.size()) +
                     " params, got " + std::to_string(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(params[k]->grad, state.first_moment[k], "adam moment");
    if (!params[k]->grad.all_finite())
      throw NumericError("adam: non-finite gradient for " + params[k]->name);
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k]->value.values();
    const auto g = params[k]->grad.values();
    auto m = state.first_moment[k].values();
    auto v = state.second_moment[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      w[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace planprobe::nn
