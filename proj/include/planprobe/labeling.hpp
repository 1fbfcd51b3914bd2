#pragma once

#include <span>
#include <string>
#include <vector>

namespace planprobe::labeling {

/// Binary per-frame milestone indicators x_t.
struct EventTrack {
  std::string kind;
  std::vector<double> values;
};

/// Scalar per-frame reward observations x_t.
struct RewardTrack {
  std::string kind;
  std::vector<double> values;
};

/// Per-frame supervision targets y_t.
struct LabelSeries {
  std::vector<double> values;
  double gamma = 1.0;
  double bootstrap = 0.0;
};

/// Backward recurrence y_t = max(gamma * y_{t+1}, x_t) with y_T := bootstrap.
/// An event T frames ahead (and nothing else) yields exactly gamma^T.
LabelSeries milestone_labels(const EventTrack& track, double bootstrap, double gamma);

/// Backward recurrence y_t = gamma * y_{t+1} + x_t with y_T := bootstrap.
LabelSeries reward_labels(const RewardTrack& track, double bootstrap, double gamma);

enum class Recurrence { Milestone, RewardSum };

/// Reference labels over a complete episode (terminal bootstrap 0), built
/// from the per-slice tracks concatenated in order.
LabelSeries full_episode_labels(std::span<const std::vector<double>> slice_tracks, double gamma,
                                Recurrence recurrence);

}  // namespace planprobe::labeling
