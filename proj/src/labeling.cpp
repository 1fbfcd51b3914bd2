#include "planprobe/labeling.hpp"

#include <algorithm>
#include <cmath>

#include "planprobe/error.hpp"

namespace planprobe::labeling {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw DomainError("decay gamma must lie in (0,1], got " + std::to_string(gamma));
}

}  // namespace

LabelSeries milestone_labels(const EventTrack& track, double bootstrap, double gamma) {
  check_gamma(gamma);
  if (!(bootstrap >= 0.0 && bootstrap <= 1.0))
    throw DomainError("milestone bootstrap must lie in [0,1], got " + std::to_string(bootstrap));
  for (double x : track.values)
    if (x != 0.0 && x != 1.0)
      throw DomainError("milestone track '" + track.kind + "' must be binary");

  LabelSeries out{std::vector<double>(track.values.size()), gamma, bootstrap};
  double next = bootstrap;
  for (std::size_t t = track.values.size(); t-- > 0;) {
    next = std::max(gamma * next, track.values[t]);
    out.values[t] = next;
  }
  return out;
}

LabelSeries reward_labels(const RewardTrack& track, double bootstrap, double gamma) {
  check_gamma(gamma);
  if (!std::isfinite(bootstrap)) throw DomainError("reward bootstrap must be finite");
  for (double x : track.values)
    if (!std::isfinite(x)) throw DomainError("reward track '" + track.kind + "' must be finite");

  LabelSeries out{std::vector<double>(track.values.size()), gamma, bootstrap};
  double next = bootstrap;
  for (std::size_t t = track.values.size(); t-- > 0;) {
    next = gamma * next + track.values[t];
    out.values[t] = next;
  }
  return out;
}

LabelSeries full_episode_labels(std::span<const std::vector<double>> slice_tracks, double gamma,
                                Recurrence recurrence) {
  std::vector<double> all;
  for (const auto& s : slice_tracks) all.insert(all.end(), s.begin(), s.end());
  if (recurrence == Recurrence::Milestone) return milestone_labels({"episode", std::move(all)}, 0.0, gamma);
  return reward_labels({"episode", std::move(all)}, 0.0, gamma);
}

}  // namespace planprobe::labeling
