#include "planprobe/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace planprobe {

using nlohmann::json;

namespace {

/// Reads the keys of one JSON object, remembering which were consumed so the
/// remainder can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config: invalid value for key '" + qualified(key) + "'");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.contains(key)) throw ConfigError("config: unknown key '" + qualified(key) + "'");
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json abilities_to_json(const std::vector<env::AbilityDef>& abilities) {
  json arr = json::array();
  for (const auto& a : abilities)
    arr.push_back({{"ability_id", a.ability_id},
                   {"name", a.name},
                   {"semantic_class", env::to_string(a.semantic_class)},
                   {"magnitude", a.magnitude},
                   {"cooldown", a.cooldown}});
  return arr;
}

std::vector<env::AbilityDef> abilities_from_json(const json& arr) {
  if (!arr.is_array()) throw ConfigError("config: 'env.abilities' must be an array");
  std::vector<env::AbilityDef> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Section s(arr[i], "env.abilities[" + std::to_string(i) + "]");
    env::AbilityDef a;
    std::string cls = "noop-filler";
    s.get("ability_id", a.ability_id);
    s.get("name", a.name);
    s.get("semantic_class", cls);
    s.get("magnitude", a.magnitude);
    s.get("cooldown", a.cooldown);
    s.finish();
    a.semantic_class = env::semantic_class_from_string(cls);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace

json env_to_json(const env::EnvConfig& e) {
  return {
      {"grid_size", e.grid_size},
      {"num_towers", e.num_towers},
      {"num_regions", e.num_regions},
      {"max_episode_len", e.max_episode_len},
      {"respawn_delay", e.respawn_delay},
      {"creep_spawn_period", e.creep_spawn_period},
      {"abilities", abilities_to_json(e.abilities)},
      {"rng_seed", e.rng_seed},
      {"agent_max_hp", e.agent_max_hp},
      {"agent_attack_damage", e.agent_attack_damage},
      {"tower_hp", e.tower_hp},
      {"tower_damage", e.tower_damage},
      {"tower_range", e.tower_range},
      {"enemy_base_hp", e.enemy_base_hp},
      {"own_base_hp", e.own_base_hp},
      {"own_base_damage", e.own_base_damage},
      {"creep_hp", e.creep_hp},
      {"creep_damage", e.creep_damage},
      {"creeps_per_wave", e.creeps_per_wave},
      {"creep_move_period", e.creep_move_period},
      {"gold_per_damage", e.gold_per_damage},
      {"tower_bounty", e.tower_bounty},
      {"base_bounty", e.base_bounty},
      {"creep_kill_reward", e.creep_kill_reward},
      {"death_penalty", e.death_penalty},
  };
}

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"env", env_to_json(c.env)},
      {"agent",
       {{"encoder_width", c.policy.encoder_width},
        {"hidden_size", c.policy.hidden_size},
        {"embedding_dim", c.policy.embedding_dim},
        {"embedding_init_norm", c.policy.embedding_init_norm},
        {"clip_epsilon", c.ppo.clip_epsilon},
        {"gamma", c.ppo.gamma},
        {"gae_lambda", c.ppo.gae_lambda},
        {"epochs", c.ppo.epochs},
        {"minibatches", c.ppo.minibatches},
        {"entropy_coef", c.ppo.entropy_coef},
        {"value_coef", c.ppo.value_coef},
        {"learning_rate", c.ppo.learning_rate},
        {"max_grad_norm", c.ppo.max_grad_norm},
        {"bptt_horizon", c.ppo.bptt_horizon}}},
      {"probes",
       {{"gamma", c.probes.gamma},
        {"hidden_width", c.probes.hidden_width},
        {"learning_rate", c.probes.train.learning_rate},
        {"epochs", c.probes.train.epochs},
        {"minibatch_frames", c.probes.train.minibatch_frames},
        {"flow_through", c.probes.train.flow_through}}},
      {"slicing",
       {{"slice_length", c.slicing.slice_length},
        {"num_envs", c.slicing.num_envs},
        {"workers", c.slicing.workers},
        {"max_staleness", c.slicing.max_staleness},
        {"queue_capacity", c.slicing.queue_capacity}}},
      {"eval",
       {{"episodes", c.eval.episodes},
        {"heldout_episodes", c.eval.heldout_episodes},
        {"annotation_horizon", c.eval.annotation_horizon},
        {"debounce_frames", c.eval.debounce_frames},
        {"annotation_threshold", c.eval.annotation_threshold},
        {"histogram_bins", c.eval.histogram_bins}}},
      {"train",
       {{"steps", c.train.steps},
        {"checkpoint_every", c.train.checkpoint_every},
        {"metrics_window", c.train.metrics_window}}},
  };
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  Section root(doc, "");
  root.get("seed", c.seed);
  if (const json* j = root.child("env")) {
    Section s(*j, "env");
    auto& e = c.env;
    s.get("grid_size", e.grid_size);
    s.get("num_towers", e.num_towers);
    s.get("num_regions", e.num_regions);
    s.get("max_episode_len", e.max_episode_len);
    s.get("respawn_delay", e.respawn_delay);
    s.get("creep_spawn_period", e.creep_spawn_period);
    if (const json* a = s.child("abilities")) e.abilities = abilities_from_json(*a);
    s.get("rng_seed", e.rng_seed);
    s.get("agent_max_hp", e.agent_max_hp);
    s.get("agent_attack_damage", e.agent_attack_damage);
    s.get("tower_hp", e.tower_hp);
    s.get("tower_damage", e.tower_damage);
    s.get("tower_range", e.tower_range);
    s.get("enemy_base_hp", e.enemy_base_hp);
    s.get("own_base_hp", e.own_base_hp);
    s.get("own_base_damage", e.own_base_damage);
    s.get("creep_hp", e.creep_hp);
    s.get("creep_damage", e.creep_damage);
    s.get("creeps_per_wave", e.creeps_per_wave);
    s.get("creep_move_period", e.creep_move_period);
    s.get("gold_per_damage", e.gold_per_damage);
    s.get("tower_bounty", e.tower_bounty);
    s.get("base_bounty", e.base_bounty);
    s.get("creep_kill_reward", e.creep_kill_reward);
    s.get("death_penalty", e.death_penalty);
    s.finish();
  }
  if (const json* j = root.child("agent")) {
    Section s(*j, "agent");
    s.get("encoder_width", c.policy.encoder_width);
    s.get("hidden_size", c.policy.hidden_size);
    s.get("embedding_dim", c.policy.embedding_dim);
    s.get("embedding_init_norm", c.policy.embedding_init_norm);
    s.get("clip_epsilon", c.ppo.clip_epsilon);
    s.get("gamma", c.ppo.gamma);
    s.get("gae_lambda", c.ppo.gae_lambda);
    s.get("epochs", c.ppo.epochs);
    s.get("minibatches", c.ppo.minibatches);
    s.get("entropy_coef", c.ppo.entropy_coef);
    s.get("value_coef", c.ppo.value_coef);
    s.get("learning_rate", c.ppo.learning_rate);
    s.get("max_grad_norm", c.ppo.max_grad_norm);
    s.get("bptt_horizon", c.ppo.bptt_horizon);
    s.finish();
  }
  if (const json* j = root.child("probes")) {
    Section s(*j, "probes");
    s.get("gamma", c.probes.gamma);
    s.get("hidden_width", c.probes.hidden_width);
    s.get("learning_rate", c.probes.train.learning_rate);
    s.get("epochs", c.probes.train.epochs);
    s.get("minibatch_frames", c.probes.train.minibatch_frames);
    s.get("flow_through", c.probes.train.flow_through);
    s.finish();
  }
  if (const json* j = root.child("slicing")) {
    Section s(*j, "slicing");
    s.get("slice_length", c.slicing.slice_length);
    s.get("num_envs", c.slicing.num_envs);
    s.get("workers", c.slicing.workers);
    s.get("max_staleness", c.slicing.max_staleness);
    s.get("queue_capacity", c.slicing.queue_capacity);
    s.finish();
  }
  if (const json* j = root.child("eval")) {
    Section s(*j, "eval");
    s.get("episodes", c.eval.episodes);
    s.get("heldout_episodes", c.eval.heldout_episodes);
    s.get("annotation_horizon", c.eval.annotation_horizon);
    s.get("debounce_frames", c.eval.debounce_frames);
    s.get("annotation_threshold", c.eval.annotation_threshold);
    s.get("histogram_bins", c.eval.histogram_bins);
    s.finish();
  }
  if (const json* j = root.child("train")) {
    Section s(*j, "train");
    s.get("steps", c.train.steps);
    s.get("checkpoint_every", c.train.checkpoint_every);
    s.get("metrics_window", c.train.metrics_window);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  env.validate(static_cast<int>(slicing.slice_length));
  ppo.validate();
  if (slicing.slice_length == 0) throw ConfigError("slicing.slice_length: must be >= 1");
  if (slicing.num_envs == 0) throw ConfigError("slicing.num_envs: must be >= 1");
  if (slicing.workers == 0) throw ConfigError("slicing.workers: must be >= 1");
  if (slicing.workers > slicing.num_envs) throw ConfigError("slicing.workers: must not exceed slicing.num_envs");
  if (slicing.queue_capacity == 0) throw ConfigError("slicing.queue_capacity: must be >= 1");
  if (!(probes.gamma > 0.0 && probes.gamma <= 1.0)) throw ConfigError("probes.gamma: must lie in (0,1]");
  if (probes.hidden_width == 0) throw ConfigError("probes.hidden_width: must be >= 1");
  if (probes.train.minibatch_frames == 0) throw ConfigError("probes.minibatch_frames: must be >= 1");
  if (policy.hidden_size == 0 || policy.encoder_width == 0 || policy.embedding_dim == 0)
    throw ConfigError("agent: network widths must be >= 1");
  if (train.checkpoint_every == 0) throw ConfigError("train.checkpoint_every: must be >= 1");
  if (eval.debounce_frames == 0) throw ConfigError("eval.debounce_frames: must be >= 1");
  if (!(eval.annotation_threshold > 0.0 && eval.annotation_threshold < 1.0))
    throw ConfigError("eval.annotation_threshold: must lie in (0,1)");
  if (eval.histogram_bins == 0) throw ConfigError("eval.histogram_bins: must be >= 1");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(doc);
}

std::uint64_t env_config_hash(const env::EnvConfig& config) {
  const std::string canonical = env_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void apply_seed_override(RunConfig& config) {
  if (const char* s = std::getenv("PLANPROBE_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(s, &used);
      if (used != std::string(s).size()) throw std::invalid_argument("trailing");
      config.seed = v;
    } catch (const std::exception&) {
      throw ConfigError("PLANPROBE_SEED: not an unsigned integer: '" + std::string(s) + "'");
    }
  }
}

}  // namespace planprobe
