#include "planprobe/rollout.hpp"

#include <algorithm>

#include "planprobe/config.hpp"
#include "planprobe/slicing.hpp"

namespace planprobe::rollout {

std::vector<env::FrameEvents> EpisodeTrace::events() const {
  std::vector<env::FrameEvents> out;
  out.reserve(replay.frames.size());
  for (const auto& f : replay.frames) out.push_back(f.events);
  return out;
}

namespace {

std::vector<std::string> head_names(const AgentModel& model) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < model.probes.size(); ++k) names.push_back(model.probes.spec(k).name);
  return names;
}

std::optional<std::size_t> win_head(const AgentModel& model) {
  for (std::size_t k = 0; k < model.probes.size(); ++k)
    if (model.probes.spec(k).kind == probes::ProbeKind::Win) return k;
  return std::nullopt;
}

}  // namespace

EpisodeTrace run_episode(const AgentModel& model, const env::EnvConfig& config, std::uint64_t env_seed,
                         std::uint64_t policy_seed, const EpisodeOptions& options) {
  env::Env env(config, env_seed);
  Rng rng(policy_seed);
  const auto& policy = model.policy;
  const auto win = win_head(model);

  EpisodeTrace trace;
  auto& header = trace.replay.header;
  header.env = config;
  header.seed = env_seed;
  header.model_version = model.version;
  header.full_obs = options.full_obs;
  if (options.record_probes) header.probe_heads = head_names(model);

  std::vector<std::vector<double>> hidden, outputs;
  env::Observation obs = env.reset();
  nn::LstmState state = nn::LstmState::zeros(policy.hidden_size());
  while (!env.done()) {
    agent::EncodedObs encoded = agent::encode_observation(obs, config);
    auto step = policy.forward(encoded, state);
    const auto probs = step.probs.col(0);
    const int action = options.greedy
                           ? static_cast<int>(std::ranges::max_element(probs) - probs.begin())
                           : slicing::sample_action(probs, rng);
    auto result = env.step(action);

    persistence::ReplayFrame f;
    f.frame = obs.frame_index;
    f.obs_digest = agent::observation_digest(encoded);
    f.action = action;
    f.events = result.events;
    std::vector<double> out = model.probes.forward_one(step.state.h.col(0));
    if (options.record_probes) {
      f.probes = out;
      if (win) f.win_prob = out[*win];
    }
    if (options.full_obs) f.obs = std::move(encoded);
    trace.total_return += result.events.total_reward();
    trace.replay.frames.push_back(std::move(f));
    hidden.emplace_back(step.state.h.values().begin(), step.state.h.values().end());
    outputs.push_back(std::move(out));
    state = std::move(step.state);
    obs = std::move(result.observation);
  }
  trace.outcome = env.outcome();
  trace.hidden = Matrix(policy.hidden_size(), hidden.size());
  trace.probe_outputs = Matrix(model.probes.size(), outputs.size());
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    std::ranges::copy(hidden[t], trace.hidden.col(t).begin());
    std::ranges::copy(outputs[t], trace.probe_outputs.col(t).begin());
  }
  return trace;
}

std::vector<agent::EncodedObs> reconstruct_observations(const persistence::Replay& replay) {
  env::Env env(replay.header.env, replay.header.seed);
  env::Observation obs = env.reset();
  std::vector<agent::EncodedObs> out;
  out.reserve(replay.frames.size());
  for (std::size_t i = 0; i < replay.frames.size(); ++i) {
    const auto& f = replay.frames[i];
    if (env.done()) throw DataError("replay: episode ended before frame " + std::to_string(f.frame));
    agent::EncodedObs encoded = agent::encode_observation(obs, replay.header.env);
    if (obs.frame_index != f.frame || agent::observation_digest(encoded) != f.obs_digest)
      throw DataError("replay: frame " + std::to_string(f.frame) +
                      " does not match re-simulation from the header seed");
    auto result = env.step(f.action);
    out.push_back(std::move(encoded));
    obs = std::move(result.observation);
  }
  return out;
}

TeacherForced teacher_force(const AgentModel& model, const env::EnvConfig& model_env,
                            const persistence::Replay& replay) {
  if (env_config_hash(model_env) != env_config_hash(replay.header.env))
    throw CompatibilityError("replay was recorded in a different environment than the checkpoint");
  std::vector<agent::EncodedObs> rebuilt;
  if (!replay.header.full_obs) rebuilt = reconstruct_observations(replay);

  const std::size_t n = replay.frames.size();
  TeacherForced out{Matrix(model.policy.hidden_size(), n), Matrix(model.probes.size(), n)};
  nn::LstmState state = nn::LstmState::zeros(model.policy.hidden_size());
  for (std::size_t t = 0; t < n; ++t) {
    const agent::EncodedObs& obs = replay.header.full_obs ? *replay.frames[t].obs : rebuilt[t];
    if (obs.numeric.size() != model.policy.numeric_size() || obs.slot_type.size() != model.policy.num_slots())
      throw CompatibilityError("replay observation shape does not match the checkpoint network");
    auto step = model.policy.forward(obs, state);
    std::ranges::copy(step.state.h.col(0), out.hidden.col(t).begin());
    const auto p = model.probes.forward_one(step.state.h.col(0));
    std::ranges::copy(p, out.probe_outputs.col(t).begin());
    state = std::move(step.state);
  }
  return out;
}

bool replay_won(const persistence::Replay& replay) {
  return std::ranges::any_of(replay.frames, [](const auto& f) { return f.events.win != 0; });
}

}  // namespace planprobe::rollout
