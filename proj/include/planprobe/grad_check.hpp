#pragma once

#include <functional>
#include <string>

#include "planprobe/nn.hpp"

namespace planprobe::nn {

enum class Stencil {
  Central,    // (f(x+h) - f(x-h)) / 2h
  FivePoint,  // fourth-order central difference
};

/// A network fragment under test. `loss` evaluates the scalar objective from
/// the current parameter values; `backward` zeroes and then fills the
/// reverse-mode gradients of every listed parameter.
struct GradFragment {
  std::string name;
  ParamList params;
  std::function<double()> loss;
  std::function<void()> backward;
  /// Five-point at 3e-3 keeps truncation and roundoff error both well under
  /// 1e-6 relative for O(1) losses.
  Stencil stencil = Stencil::FivePoint;
  double eps = 3e-3;
};

struct GradCheckReport {
  std::string name;
  std::size_t num_params = 0;
  double max_relative_error = 0.0;
  std::string worst_param;
  bool pass = true;
};

/// Gradients with magnitude below this floor are compared absolutely:
/// rel = |a - n| / max(|a|, |n|, floor).
inline constexpr double kRelativeErrorFloor = 1e-6;

inline constexpr std::size_t kMaxGradCheckParams = 10'000;

/// Compares reverse-mode gradients against finite differences with the
/// fragment's stencil and step, parameter by parameter. Fragments larger
/// than 10^4 scalars are rejected.
GradCheckReport grad_check(const GradFragment& fragment, double tolerance = 1e-6);

}  // namespace planprobe::nn
