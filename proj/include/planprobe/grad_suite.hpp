#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "planprobe/grad_check.hpp"

namespace planprobe::nn {

/// Owns small randomly initialized networks and exposes one GradFragment per
/// layer type: dense, tanh, LSTM step, embedding gather, probe heads (sigmoid
/// cross entropy and linear squared error), one policy step, and a 16-step
/// unrolled PPO window with and without probe gradients flowing into h.
class GradSuite {
 public:
  explicit GradSuite(std::uint64_t seed = 1);
  ~GradSuite();
  GradSuite(const GradSuite&) = delete;
  GradSuite& operator=(const GradSuite&) = delete;

  const std::vector<GradFragment>& fragments() const { return fragments_; }

 private:
  struct State;
  std::unique_ptr<State> state_;
  std::vector<GradFragment> fragments_;
};

inline constexpr std::size_t kGradSuiteBpttSteps = 16;

std::vector<GradCheckReport> run_grad_suite(std::uint64_t seed = 1, double tolerance = 1e-6);

}  // namespace planprobe::nn
