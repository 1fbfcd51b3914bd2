#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "planprobe/adam.hpp"
#include "planprobe/env.hpp"
#include "planprobe/labeling.hpp"
#include "planprobe/nn.hpp"

namespace planprobe::probes {

enum class ProbeTarget {
  ReachRegion,
  TowerDestroyed,
  BaseAttackedByEnemy,
  Kill,
  Death,
  Win,
  GoldSum,
  KillRewardSum,
};

enum class ProbeKind { Milestone, RewardSum, Win };

struct ProbeHeadSpec {
  std::string name;
  ProbeTarget target = ProbeTarget::Kill;
  int index = 0;  // region or tower index for indexed targets
  ProbeKind kind = ProbeKind::Milestone;
  double gamma = 0.995;
  std::size_t hidden_width = 64;

  bool sigmoid_output() const { return kind != ProbeKind::RewardSum; }
  labeling::Recurrence recurrence() const {
    return kind == ProbeKind::RewardSum ? labeling::Recurrence::RewardSum : labeling::Recurrence::Milestone;
  }
};

/// One head per region, per tower, plus own-base-attacked, kill, death, win,
/// gold and kill-reward sums. Win heads use gamma = 1.
std::vector<ProbeHeadSpec> default_probe_specs(const env::EnvConfig& env_config, double gamma = 0.995,
                                               std::size_t hidden_width = 64);

/// Per-frame x_t for the head's target.
double event_value(const ProbeHeadSpec& spec, const env::FrameEvents& events);
std::vector<double> event_track(const ProbeHeadSpec& spec, std::span<const env::FrameEvents> events);

/// Labels for one contiguous run of frames with the given boundary bootstrap.
labeling::LabelSeries labels_for(const ProbeHeadSpec& spec, std::span<const env::FrameEvents> events,
                                 double bootstrap);

/// Single-hidden-layer perceptron reading h only.
struct ProbeHead {
  ProbeHeadSpec spec;
  nn::Dense hidden;
  nn::Dense out;
};

struct ProbeTrainMetrics {
  std::vector<double> head_loss;
  double mean_loss() const;
};

/// Hidden State Decoders: independent heads over the LSTM hidden state.
class ProbeSet {
 public:
  ProbeSet() = default;
  ProbeSet(std::vector<ProbeHeadSpec> specs, std::size_t hidden_size, std::uint64_t seed);

  std::size_t size() const { return heads_.size(); }
  std::size_t input_size() const { return input_size_; }
  const std::vector<ProbeHead>& heads() const { return heads_; }
  std::vector<ProbeHead>& heads() { return heads_; }
  const ProbeHeadSpec& spec(std::size_t i) const { return heads_[i].spec; }
  std::size_t index_of(const std::string& name) const;

  /// Outputs (heads x B) for hidden states h (H x B).
  Matrix forward(const Matrix& h) const;
  std::vector<double> forward_one(std::span<const double> h) const;

  /// Mean loss per head: soft cross entropy for sigmoid heads, squared
  /// error for linear heads. `labels` is (heads x N).
  std::vector<double> losses(const Matrix& h, const Matrix& labels) const;

  /// Accumulates head parameter gradients of scale * sum_k losses()[k] and
  /// returns the matching dL/dh, which callers ignore under stop-gradient.
  Matrix backward(const Matrix& h, const Matrix& labels, double scale = 1.0);

  /// One optimizer step on the head parameters only.
  ProbeTrainMetrics train_step(const Matrix& h, const Matrix& labels, nn::AdamState& adam,
                               double max_grad_norm = 0.0);

  /// Reinitializes every head: random hidden layer, zero output layer.
  void reinitialize(std::uint64_t seed);

  nn::ParamList params();

 private:
  std::vector<ProbeHead> heads_;
  std::size_t input_size_ = 0;
};

/// Per-episode hidden states and events used for offline probe training.
struct EpisodeHidden {
  Matrix h;  // H x T
  std::vector<env::FrameEvents> events;
};

struct PosthocConfig {
  std::size_t epochs = 30;
  std::size_t batch_frames = 512;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// Retrains the heads from scratch on full-episode labels (no slicing, so
/// no bootstrapping). Returns the final epoch's mean per-head losses.
ProbeTrainMetrics posthoc_train(ProbeSet& probes, std::span<const EpisodeHidden> corpus,
                                const PosthocConfig& config);

}  // namespace planprobe::probes
