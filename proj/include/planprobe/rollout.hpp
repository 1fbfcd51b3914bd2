#pragma once

#include <cstdint>
#include <vector>

#include "planprobe/model.hpp"
#include "planprobe/replay.hpp"

namespace planprobe::rollout {

struct EpisodeOptions {
  bool greedy = false;  // argmax instead of sampling
  bool record_probes = true;
  bool full_obs = false;
};

/// One complete episode played by a model, with everything later analyses
/// need: the replay log, hidden states and per-head probe outputs.
struct EpisodeTrace {
  persistence::Replay replay;
  Matrix hidden;         // H x T, state after each frame's step
  Matrix probe_outputs;  // heads x T
  env::Outcome outcome = env::Outcome::Running;
  double total_return = 0.0;

  std::size_t length() const { return replay.frames.size(); }
  std::vector<env::FrameEvents> events() const;
};

/// Plays one episode from a fresh Env(config, env_seed).
EpisodeTrace run_episode(const AgentModel& model, const env::EnvConfig& config, std::uint64_t env_seed,
                         std::uint64_t policy_seed, const EpisodeOptions& options = {});

struct TeacherForced {
  Matrix hidden;         // H x T
  Matrix probe_outputs;  // heads x T
};

/// Feeds the replay's observations through `model`. Observations come from
/// the log when stored, otherwise they are rebuilt by re-simulating the
/// recorded actions from the header seed and checked against the digests.
TeacherForced teacher_force(const AgentModel& model, const env::EnvConfig& model_env,
                            const persistence::Replay& replay);

/// Rebuilds observations from (seed, actions); DataError on digest mismatch.
std::vector<agent::EncodedObs> reconstruct_observations(const persistence::Replay& replay);

/// Outcome implied by the logged events.
bool replay_won(const persistence::Replay& replay);

}  // namespace planprobe::rollout
