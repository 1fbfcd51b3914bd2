#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "planprobe/env.hpp"
#include "planprobe/model.hpp"

namespace planprobe::slicing {

struct Transition {
  agent::EncodedObs obs;
  env::Action action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  env::FrameEvents events;
  std::vector<double> h_before;  // recurrent state entering the frame
  std::vector<double> c_before;
  std::vector<double> h;  // hidden state after the frame (probe input)
  std::uint32_t frame_index = 0;

  double reward() const { return events.total_reward(); }
};

/// Fixed-length run of consecutive transitions of one episode. The final
/// slice of an episode is shorter, flagged terminal, and bootstraps to 0.
struct Slice {
  std::vector<Transition> transitions;
  nn::LstmState initial_state;
  agent::EncodedObs boundary_obs;
  nn::LstmState boundary_state;
  bool terminal = false;
  env::Outcome outcome = env::Outcome::Running;
  std::vector<double> probe_bootstraps;
  double boundary_value = 0.0;
  std::uint64_t parameter_version = 0;
  std::uint64_t worker_id = 0;
  std::uint64_t episode_index = 0;
  std::uint64_t slice_index = 0;  // position within the episode

  std::size_t size() const { return transitions.size(); }
};

/// Immutable published parameters.
struct ParameterSnapshot {
  std::uint64_t version = 0;
  std::shared_ptr<const AgentModel> model;
};

/// The one mutable shared object between optimizer and workers.
class SnapshotSlot {
 public:
  void publish(ParameterSnapshot snapshot);
  ParameterSnapshot current() const;

 private:
  mutable std::mutex mutex_;
  ParameterSnapshot snapshot_;
};

/// Bounded multi-producer single-consumer queue.
class SliceQueue {
 public:
  explicit SliceQueue(std::size_t capacity) : capacity_(capacity) {}

  /// Blocks while full. Returns false once closed.
  bool push(Slice slice);
  /// Blocks while empty. Returns nullopt once closed and drained.
  std::optional<Slice> pop();
  void close();

 private:
  std::size_t capacity_;
  std::deque<Slice> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_full_, not_empty_;
};

struct EpisodeSummary {
  std::uint64_t worker_id = 0;
  std::uint64_t episode_index = 0;
  std::size_t length = 0;
  double total_return = 0.0;
  env::Outcome outcome = env::Outcome::Running;
};

/// Drives one environment and emits slices of at most `slice_length` frames.
/// Recurrent state carries across slices and resets only at episode
/// boundaries.
class RolloutWorker {
 public:
  RolloutWorker(env::EnvConfig config, std::uint64_t env_seed, std::uint64_t policy_seed,
                std::size_t slice_length, std::uint64_t worker_id = 0);

  /// Runs the next slice under the given snapshot and attaches bootstraps.
  Slice next_slice(const ParameterSnapshot& snapshot);

  /// Episodes that ended since the last call.
  std::vector<EpisodeSummary> take_finished();

  std::uint64_t worker_id() const { return worker_id_; }
  std::size_t slice_length() const { return slice_length_; }

 private:
  env::Env env_;
  Rng rng_;
  std::size_t slice_length_;
  std::uint64_t worker_id_;
  bool need_reset_ = true;
  env::Observation obs_;
  nn::LstmState state_;
  std::uint64_t episode_index_ = 0;
  std::uint64_t slice_index_ = 0;
  std::size_t episode_length_ = 0;
  double episode_return_ = 0.0;
  std::vector<EpisodeSummary> finished_;
};

/// Samples an index from a probability column using one uniform draw.
int sample_action(std::span<const double> probs, Rng& rng);

/// Fills boundary bootstraps: each head's prediction at the boundary frame
/// and the value estimate there, or zeros for terminal slices.
void attach_bootstraps(Slice& slice, const AgentModel& model);

/// One truncated-BPTT window: frames [start, start+length) of one slice.
struct BpttWindow {
  std::size_t slice = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};

struct SliceBatch {
  std::vector<Slice> slices;
  std::vector<BpttWindow> windows;
  std::size_t bptt_horizon = 16;

  std::size_t num_frames() const;
};

/// Splits every slice into windows of `bptt_horizon` frames. Carried-in
/// states at window starts come from the rollout and are constants.
SliceBatch assemble_batch(std::vector<Slice> slices, std::size_t bptt_horizon = 16);

}  // namespace planprobe::slicing
