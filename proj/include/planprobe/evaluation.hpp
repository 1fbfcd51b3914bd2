#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "planprobe/model.hpp"
#include "planprobe/replay.hpp"

namespace planprobe::evaluation {

/// ceil(ln theta / ln gamma); theta, gamma in (0,1). Throws DomainError
/// otherwise (gamma = 1 has no finite horizon).
std::size_t horizon_of(double theta, double gamma);

/// One head's per-frame scores and the binary x_t of its target over one
/// episode. The event produced by the step at index t lands at frame t + 1,
/// so a prediction at frame s is correct iff some x_t = 1 with
/// s <= t < s + H, i.e. the event lands in (s, s + H].
struct ScoredTrack {
  std::vector<double> scores;
  std::vector<std::uint8_t> events;
};

/// Per-frame truth: 1 iff an event lands within the next `horizon` frames.
std::vector<std::uint8_t> window_truth(std::span<const std::uint8_t> events, std::size_t horizon);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  double precision() const;
  double recall() const;
  /// 0 (with `undefined()` set) when there are no predicted or true positives.
  double f1() const;
  bool undefined() const { return tp + fp == 0 || tp + fn == 0; }
};

Confusion confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);
Confusion confusion(std::span<const ScoredTrack> tracks, double theta, std::size_t horizon);

struct ThresholdReport {
  std::string head;
  double theta = 0.5;
  std::size_t horizon = 0;
  double heldout_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Fraction of truth-positive frames on the evaluation split at `horizon`.
  double prior_rate = 0.0;
  /// F1 of the constant scorer that always predicts the event: 2p / (1 + p).
  double baseline_f1 = 0.0;
};

/// Chooses theta on `heldout` only, scanning score quantiles, then scores
/// the evaluation split. Throws DataError when the held-out split has no
/// events.
ThresholdReport select_threshold(const std::string& head, std::span<const ScoredTrack> heldout,
                                 std::span<const ScoredTrack> evaluation, double gamma,
                                 std::size_t quantiles = 200);

struct LeadTimeDensity {
  std::vector<double> lead_times;  // one per matched event
  std::size_t unmatched = 0;
  std::vector<double> bin_edges;
  std::vector<double> bin_counts;

  double median() const;  // NaN when empty
};

/// For each event, finds the earliest sustained run (>= `debounce` frames
/// above theta) containing a correct prediction of it; lead time = event
/// frame - first frame of that run, capped at the horizon.
LeadTimeDensity leadtime_density(std::span<const ScoredTrack> tracks, double theta, double gamma,
                                 std::size_t debounce = 3, std::size_t bins = 20);

/// Mean of (p - y)^2 over all frames of all curves.
double brier_score(std::span<const std::vector<double>> curves, std::span<const double> outcomes);

/// Mean |a - b| pooled over every frame of every replay.
double mean_abs_deviation(std::span<const std::vector<double>> a, std::span<const std::vector<double>> b);

struct WinCurves {
  std::uint64_t version = 0;
  std::vector<std::vector<double>> curves;  // one per replay
};

/// Teacher-forces each replay through each checkpoint and returns the win
/// head's per-frame outputs.
std::vector<WinCurves> winprob_replay(const std::vector<std::filesystem::path>& checkpoints,
                                      std::span<const persistence::Replay> replays);

/// Tracks for one head index over a set of traces.
struct EpisodeScores {
  Matrix probe_outputs;  // heads x T
  std::vector<env::FrameEvents> events;
};
std::vector<ScoredTrack> head_tracks(const AgentModel& model, std::size_t head,
                                     std::span<const EpisodeScores> episodes);
/// Pools every tower_destroyed head into one set of tracks.
std::vector<ScoredTrack> tower_tracks(const AgentModel& model, std::span<const EpisodeScores> episodes);

struct ProbeEvalConfig {
  std::size_t episodes = 200;
  std::size_t heldout_episodes = 200;
  std::size_t debounce = 3;
  std::size_t histogram_bins = 20;
  std::uint64_t seed = 0;
};

struct HeadEvaluation {
  ThresholdReport report;
  LeadTimeDensity leads;
};

struct CheckpointEvaluation {
  std::uint64_t version = 0;
  double win_rate = 0.0;  // over the evaluation split
  std::vector<HeadEvaluation> heads;  // milestone heads, then pooled "tower_destroyed"

  const HeadEvaluation* find(const std::string& head) const;
};

/// Plays fresh held-out and evaluation episodes with the model and evaluates
/// every finite-horizon milestone head.
CheckpointEvaluation evaluate_checkpoint(const AgentModel& model, const env::EnvConfig& env,
                                         const ProbeEvalConfig& config);

inline constexpr const char* kPooledTowerHead = "tower_destroyed";

}  // namespace planprobe::evaluation
