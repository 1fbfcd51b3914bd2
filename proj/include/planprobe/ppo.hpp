#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "planprobe/adam.hpp"
#include "planprobe/model.hpp"
#include "planprobe/slicing.hpp"

namespace planprobe::agent {

struct PpoConfig {
  double clip_epsilon = 0.2;
  double gamma = 0.99;  // long-horizon setting: 1 - 1/6300
  double gae_lambda = 0.95;
  std::size_t epochs = 3;
  std::size_t minibatches = 4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  std::size_t bptt_horizon = 16;

  void validate() const;
};

/// Settings for the decoder heads trained alongside the policy.
struct ProbeTrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 1;
  std::size_t minibatch_frames = 256;
  /// When set, probe losses backpropagate into the LSTM and encoder.
  bool flow_through = false;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

/// Backward GAE recursion; `boundary_value` bootstraps the frame after the
/// last one (0 for terminal slices).
GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values,
                         double boundary_value, double gamma, double lambda);
GaeResult gae_advantages(const slicing::Slice& slice, double gamma, double lambda);

struct PpoSample {
  const EncodedObs* obs = nullptr;
  int action = 0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double value_target = 0.0;
  std::span<const double> probe_labels;  // only used with flow-through
};

/// A BPTT window with its carried-in (constant) recurrent state.
struct PpoSequence {
  nn::LstmState initial;
  std::vector<PpoSample> steps;
};

struct PpoLoss {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double probe_loss = 0.0;
  std::size_t samples = 0;
};

/// Clipped-surrogate objective plus value and entropy terms averaged over all
/// samples. With `accumulate_grads`, gradients are added into the policy (and,
/// when `probes` is given, the probe heads, whose loss then flows into h).
/// Gradients never flow past a sequence's carried-in state.
PpoLoss ppo_loss(PolicyNet& policy, std::span<const PpoSequence> sequences, const PpoConfig& config,
                 bool accumulate_grads, probes::ProbeSet* probes = nullptr);

struct PpoMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  std::vector<double> probe_loss;
  std::size_t samples = 0;

  double mean_probe_loss() const;
};

/// Owns the optimizer state for one model and applies ppo_update.
class PpoLearner {
 public:
  PpoLearner(AgentModel& model, PpoConfig ppo, ProbeTrainConfig probe, std::uint64_t seed);

  /// Normalizes advantages over the batch, runs `epochs` passes of clipped
  /// PPO over shuffled minibatches of BPTT windows, then trains the probe
  /// heads on slice labels bootstrapped from each slice's boundary
  /// predictions.
  PpoMetrics update(const slicing::SliceBatch& batch);

  const PpoConfig& config() const { return ppo_; }
  nn::AdamState& policy_optimizer() { return policy_adam_; }
  nn::AdamState& probe_optimizer() { return probe_adam_; }

 private:
  AgentModel& model_;
  PpoConfig ppo_;
  ProbeTrainConfig probe_;
  nn::AdamState policy_adam_;
  nn::AdamState probe_adam_;
  Rng rng_;
};

/// Per-slice probe labels (heads x frames) from each head's boundary bootstrap.
Matrix slice_probe_labels(const slicing::Slice& slice, const probes::ProbeSet& probes);

}  // namespace planprobe::agent
