#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "planprobe/env.hpp"
#include "planprobe/policy.hpp"
#include "planprobe/ppo.hpp"
#include "planprobe/probes.hpp"

namespace planprobe {

struct ProbesConfig {
  double gamma = 0.995;  // long-horizon setting: 1 - 1/900
  std::size_t hidden_width = 64;
  agent::ProbeTrainConfig train;
};

struct SlicingConfig {
  std::size_t slice_length = 64;
  std::size_t num_envs = 16;  // slices per optimizer update
  std::size_t workers = 1;
  std::size_t max_staleness = 2;
  std::size_t queue_capacity = 32;
};

struct EvalConfig {
  std::size_t episodes = 200;
  std::size_t heldout_episodes = 200;
  std::size_t annotation_horizon = 60;
  std::size_t debounce_frames = 3;
  double annotation_threshold = 0.5;
  std::size_t histogram_bins = 20;
};

struct TrainConfig {
  std::size_t steps = 600;  // optimizer updates
  std::size_t checkpoint_every = 50;
  std::size_t metrics_window = 50;  // episodes in rolling win-rate/return
};

/// One document with sections env/agent/probes/slicing/eval/train.
struct RunConfig {
  std::uint64_t seed = 7;
  env::EnvConfig env;
  agent::PolicyConfig policy;
  agent::PpoConfig ppo;
  ProbesConfig probes;
  SlicingConfig slicing;
  EvalConfig eval;
  TrainConfig train;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
nlohmann::json env_to_json(const env::EnvConfig& config);
/// Parses a (possibly partial) document over the defaults. Unknown keys and
/// ill-typed values raise ConfigError naming the key path.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Stable 64-bit FNV-1a hash of the canonical env section.
std::uint64_t env_config_hash(const env::EnvConfig& config);

/// Applies the PLANPROBE_SEED override when set.
void apply_seed_override(RunConfig& config);

inline constexpr const char* kToolVersion = "planprobe 1.0.0";

}  // namespace planprobe
