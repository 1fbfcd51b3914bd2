#include "planprobe/slicing.hpp"

#include <cmath>

namespace planprobe::slicing {

void SnapshotSlot::publish(ParameterSnapshot snapshot) {
  std::lock_guard lock(mutex_);
  snapshot_ = std::move(snapshot);
}

ParameterSnapshot SnapshotSlot::current() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

bool SliceQueue::push(Slice slice) {
  std::unique_lock lock(mutex_);
  not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
  if (closed_) return false;
  items_.push_back(std::move(slice));
  not_empty_.notify_one();
  return true;
}

std::optional<Slice> SliceQueue::pop() {
  std::unique_lock lock(mutex_);
  not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
  if (items_.empty()) return std::nullopt;
  Slice s = std::move(items_.front());
  items_.pop_front();
  not_full_.notify_one();
  return s;
}

void SliceQueue::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  not_full_.notify_all();
  not_empty_.notify_all();
}

int sample_action(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  // Rounding left u above the cumulative sum: take the last nonzero entry.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i);
  return 0;
}

RolloutWorker::RolloutWorker(env::EnvConfig config, std::uint64_t env_seed, std::uint64_t policy_seed,
                             std::size_t slice_length, std::uint64_t worker_id)
    : env_(std::move(config), env_seed),
      rng_(policy_seed),
      slice_length_(slice_length),
      worker_id_(worker_id) {
  if (slice_length_ == 0) throw ConfigError("slicing.slice_length: must be >= 1");
}

Slice RolloutWorker::next_slice(const ParameterSnapshot& snapshot) {
  if (!snapshot.model) throw UsageError("RolloutWorker: no parameter snapshot published");
  const AgentModel& model = *snapshot.model;
  const auto& policy = model.policy;

  if (need_reset_) {
    obs_ = env_.reset();
    state_ = nn::LstmState::zeros(policy.hidden_size());
    need_reset_ = false;
    slice_index_ = 0;
    episode_length_ = 0;
    episode_return_ = 0.0;
  }

  Slice slice;
  slice.initial_state = state_;
  slice.parameter_version = snapshot.version;
  slice.worker_id = worker_id_;
  slice.episode_index = episode_index_;
  slice.slice_index = slice_index_++;
  slice.transitions.reserve(slice_length_);

  agent::EncodedObs encoded = agent::encode_observation(obs_, env_.config());
  for (std::size_t t = 0; t < slice_length_; ++t) {
    const auto step = policy.forward(encoded, state_);
    const int action = sample_action(step.probs.col(0), rng_);
    const Matrix log_probs = nn::log_softmax_columns(step.logits);

    Transition tr;
    tr.obs = std::move(encoded);
    tr.action = action;
    tr.log_prob = log_probs[static_cast<std::size_t>(action)];
    tr.value = step.value[0];
    tr.h_before.assign(state_.h.values().begin(), state_.h.values().end());
    tr.c_before.assign(state_.c.values().begin(), state_.c.values().end());
    tr.h.assign(step.state.h.values().begin(), step.state.h.values().end());
    tr.frame_index = obs_.frame_index;

    auto result = env_.step(action);
    tr.events = std::move(result.events);
    episode_return_ += tr.reward();
    ++episode_length_;
    state_ = step.state;
    obs_ = std::move(result.observation);
    slice.transitions.push_back(std::move(tr));

    if (result.done) {
      slice.terminal = true;
      slice.outcome = env_.outcome();
      finished_.push_back({worker_id_, episode_index_, episode_length_, episode_return_, env_.outcome()});
      ++episode_index_;
      need_reset_ = true;
      break;
    }
    encoded = agent::encode_observation(obs_, env_.config());
  }
  slice.boundary_state = state_;
  if (!slice.terminal) slice.boundary_obs = std::move(encoded);
  attach_bootstraps(slice, model);
  return slice;
}

std::vector<EpisodeSummary> RolloutWorker::take_finished() { return std::exchange(finished_, {}); }

void attach_bootstraps(Slice& slice, const AgentModel& model) {
  slice.probe_bootstraps.assign(model.probes.size(), 0.0);
  slice.boundary_value = 0.0;
  if (slice.terminal) return;
  const auto step = model.policy.forward(slice.boundary_obs, slice.boundary_state);
  slice.boundary_value = step.value[0];
  slice.probe_bootstraps = model.probes.forward_one(step.state.h.col(0));
}

std::size_t SliceBatch::num_frames() const {
  std::size_t n = 0;
  for (const auto& s : slices) n += s.size();
  return n;
}

SliceBatch assemble_batch(std::vector<Slice> slices, std::size_t bptt_horizon) {
  if (slices.empty()) throw UsageError("assemble_batch: no slices");
  if (bptt_horizon == 0) throw UsageError("assemble_batch: bptt_horizon must be >= 1");

  const auto& ref = slices.front();
  const std::size_t width = ref.initial_state.width();
  std::size_t numeric = 0, slots = 0;
  bool have_ref_obs = false;
  for (const auto& s : slices) {
    if (s.initial_state.width() != width || s.boundary_state.width() != width)
      throw ShapeError("assemble_batch: recurrent width " + std::to_string(s.initial_state.width()) +
                       " vs " + std::to_string(width));
    for (const auto& tr : s.transitions) {
      if (!have_ref_obs) {
        numeric = tr.obs.numeric.size();
        slots = tr.obs.slot_type.size();
        have_ref_obs = true;
      }
      if (tr.obs.numeric.size() != numeric || tr.obs.slot_type.size() != slots ||
          tr.h_before.size() != width || tr.c_before.size() != width)
        throw ShapeError("assemble_batch: mixed observation/state shapes across slices");
    }
  }

  SliceBatch batch;
  batch.bptt_horizon = bptt_horizon;
  for (std::size_t i = 0; i < slices.size(); ++i)
    for (std::size_t start = 0; start < slices[i].size(); start += bptt_horizon)
      batch.windows.push_back({i, start, std::min(bptt_horizon, slices[i].size() - start)});
  batch.slices = std::move(slices);
  return batch;
}

}  // namespace planprobe::slicing
