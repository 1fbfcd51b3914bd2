#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <atomic>
#include <iosfwd>
#include <exception>
#include <map>
#include <mutex>
#include <memory>
#include <thread>
#include <vector>

#include "planprobe/config.hpp"
#include "planprobe/model.hpp"
#include "planprobe/ppo.hpp"
#include "planprobe/slicing.hpp"

namespace planprobe {

/// Fresh model for a run; parameters depend only on `config.seed`.
AgentModel make_agent_model(const RunConfig& config);

/// Seeds of rollout stream `i` (environment, action sampling).
std::uint64_t worker_env_seed(const RunConfig& config, std::uint64_t i);
std::uint64_t worker_policy_seed(const RunConfig& config, std::uint64_t i);

struct UpdateRecord {
  std::uint64_t version = 0;  // model version after the update
  std::uint64_t frames = 0;   // cumulative env frames
  std::uint64_t episodes = 0;
  double window_win_rate = 0.0;
  double window_return = 0.0;
  std::size_t window_size = 0;
  std::size_t stale_dropped = 0;
  agent::PpoMetrics ppo;
};

/// Synchronous trainer: one slice from each of `num_envs` rollout streams per
/// update, then one PPO update. Fully deterministic for a given config.
class Trainer {
 public:
  explicit Trainer(RunConfig config);

  UpdateRecord step();

  AgentModel& model() { return *model_; }
  const AgentModel& model() const { return *model_; }
  const RunConfig& config() const { return config_; }
  std::uint64_t frames() const { return frames_; }
  std::uint64_t episodes() const { return episodes_; }

 private:
  RunConfig config_;
  std::unique_ptr<AgentModel> model_;
  std::unique_ptr<agent::PpoLearner> learner_;
  std::vector<slicing::RolloutWorker> workers_;
  std::deque<slicing::EpisodeSummary> window_;
  std::uint64_t frames_ = 0;
  std::uint64_t episodes_ = 0;

  friend class ParallelTrainer;
  UpdateRecord apply(std::vector<slicing::Slice> slices, std::size_t dropped);
};

/// Multi-threaded variant: W worker threads feed a bounded queue; the single
/// optimizer discards slices older than `max_staleness` versions.
class ParallelTrainer {
 public:
  ParallelTrainer(RunConfig config, std::size_t workers);
  ~ParallelTrainer();
  ParallelTrainer(const ParallelTrainer&) = delete;
  ParallelTrainer& operator=(const ParallelTrainer&) = delete;

  UpdateRecord step();
  AgentModel& model() { return inner_.model(); }
  std::uint64_t frames() const { return inner_.frames(); }
  /// Largest version gap between a consumed slice and the optimizer.
  std::uint64_t max_observed_staleness() const { return max_staleness_seen_; }

 private:
  void publish();

  Trainer inner_;
  slicing::SnapshotSlot slot_;
  slicing::SliceQueue queue_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stop_{false};
  std::uint64_t max_staleness_seen_ = 0;
  std::map<std::uint64_t, std::pair<double, std::size_t>> running_;
  std::mutex error_mutex_;
  std::exception_ptr worker_error_;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const UpdateRecord& r);

struct TrainResult {
  std::uint64_t final_version = 0;
  std::uint64_t frames = 0;
  std::vector<std::filesystem::path> checkpoints;
};

/// Full `train` pipeline: resolved config, version-0 checkpoint, updates with
/// periodic checkpoints, metrics CSV. `log` receives progress lines.
TrainResult run_training(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream* log);


}  // namespace planprobe
