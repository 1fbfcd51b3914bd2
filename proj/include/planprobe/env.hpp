#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "planprobe/rng.hpp"

namespace planprobe::env {

enum class SemanticClass { Heal, Strike, Dash, NoopFiller };

std::string to_string(SemanticClass c);
SemanticClass semantic_class_from_string(const std::string& s);

struct AbilityDef {
  std::uint32_t ability_id = 0;
  std::string name;
  SemanticClass semantic_class = SemanticClass::NoopFiller;
  double magnitude = 0.0;
  std::uint32_t cooldown = 0;
};

/// heal_small/heal_large, strike_weak/strike_strong, dash_short/dash_long and
/// four fillers with no effect.
std::vector<AbilityDef> default_abilities();

/// Entity type ids share the embedding table with abilities: rows
/// [0, kNumEntityTypes) are entity types, ability `a` lives at row
/// kNumEntityTypes + a.
enum EntityType : std::uint32_t { EnemyTower = 0, EnemyBase = 1, EnemyCreep = 2, AllyCreep = 3 };
inline constexpr std::uint32_t kNumEntityTypes = 4;

inline constexpr std::size_t kEnemyCreepSlots = 3;
inline constexpr std::size_t kAllyCreepSlots = 2;

struct EnvConfig {
  int grid_size = 16;
  int num_towers = 3;
  int num_regions = 4;
  int max_episode_len = 1024;
  int respawn_delay = 20;
  int creep_spawn_period = 32;
  std::vector<AbilityDef> abilities = default_abilities();
  std::uint64_t rng_seed = 7;

  // Combat and economy. Distances are Chebyshev.
  double agent_max_hp = 100.0;
  double agent_attack_damage = 6.0;
  double tower_hp = 60.0;
  double tower_damage = 5.0;
  int tower_range = 2;
  double enemy_base_hp = 100.0;
  double own_base_hp = 200.0;
  double own_base_damage = 3.0;
  double creep_hp = 20.0;
  double creep_damage = 2.0;
  int creeps_per_wave = 2;
  int creep_move_period = 2;

  // Reward components.
  double gold_per_damage = 0.02;
  double tower_bounty = 1.0;
  double base_bounty = 2.0;
  double creep_kill_reward = 0.2;
  double death_penalty = -1.0;

  /// Throws ConfigError naming the first invalid field.
  void validate(int slice_length = 64) const;
  int num_actions() const;
};

/// Primitive actions precede one action per ability.
enum PrimitiveAction : int { Noop = 0, MoveUp, MoveDown, MoveLeft, MoveRight, Attack };
inline constexpr int kNumPrimitiveActions = 6;

using Action = int;

struct FrameEvents {
  std::vector<std::uint8_t> reach_region;
  std::vector<std::uint8_t> tower_destroyed;
  std::uint8_t base_destroyed = 0;
  std::uint8_t own_base_attacked = 0;
  std::uint8_t kill = 0;
  std::uint8_t death = 0;
  std::uint8_t win = 0;
  double gold_gain = 0.0;
  double kill_reward = 0.0;
  double death_penalty = 0.0;

  double total_reward() const { return gold_gain + kill_reward + death_penalty; }
  bool any() const;
  friend bool operator==(const FrameEvents&, const FrameEvents&) = default;
};

struct EntityRecord {
  bool present = false;
  std::uint32_t type_id = 0;
  double rel_x = 0.0;
  double rel_y = 0.0;
  double hp = 0.0;  // fraction of max
  bool vulnerable = false;
  friend bool operator==(const EntityRecord&, const EntityRecord&) = default;
};

struct Observation {
  int agent_x = 0;
  int agent_y = 0;
  double agent_hp = 0.0;
  double gold = 0.0;
  bool alive = true;
  int respawn_timer = 0;
  double own_base_hp = 0.0;
  std::uint32_t frame_index = 0;
  std::vector<double> cooldowns;  // remaining / cooldown, 0 when ready
  /// Fixed slots: towers, enemy base, nearest enemy creeps, nearest ally creeps.
  std::vector<EntityRecord> entities;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepResult {
  Observation observation;
  FrameEvents events;
  bool done = false;
};

struct Unit {
  int x = 0;
  int y = 0;
  double hp = 0.0;
  std::uint32_t id = 0;
};

enum class Outcome { Running, Win, Loss, Timeout };

/// Full mutable simulation state; exposed for scripted scenarios.
struct EnvState {
  int agent_x = 0, agent_y = 0;
  double agent_hp = 0.0;
  double gold = 0.0;
  bool alive = true;
  int respawn_timer = 0;
  int last_region = 0;
  std::vector<int> cooldown_left;
  std::vector<Unit> towers;
  Unit enemy_base;
  Unit own_base;
  std::vector<Unit> enemy_creeps;
  std::vector<Unit> ally_creeps;
  std::uint32_t next_creep_id = 0;
  int frame_index = 0;
  Outcome outcome = Outcome::Running;
  bool needs_reset = true;
};

/// Partition of the grid into k x k axis-aligned blocks, k^2 = num_regions.
int region_of(int x, int y, int grid_size, int num_regions);

/// Deterministic single-agent lane gridworld. The agent spawns at its own
/// base in the low corner and wins by destroying the enemy base in the high
/// corner; enemy towers on the diagonal lane must fall in order first.
class Env {
 public:
  Env(EnvConfig config, std::uint64_t seed);

  const EnvConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  Observation reset();
  StepResult step(Action action);
  Observation observe() const;

  bool done() const { return state_.outcome != Outcome::Running; }
  Outcome outcome() const { return state_.outcome; }
  int region_of(int x, int y) const;

  const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }

  std::pair<int, int> own_base_pos() const { return {1, 1}; }
  std::pair<int, int> enemy_base_pos() const { return {config_.grid_size - 2, config_.grid_size - 2}; }
  std::pair<int, int> tower_pos(int k) const;
  bool tower_vulnerable(std::size_t k) const;
  bool enemy_base_vulnerable() const;

 private:
  void spawn_wave();
  void agent_act(Action action, FrameEvents& ev);
  void damage_enemy_unit(Unit* target, double amount, FrameEvents& ev);
  Unit* agent_target();
  void creeps_act(FrameEvents& ev);
  void structures_act();
  void damage_agent(double amount);

  EnvConfig config_;
  std::uint64_t seed_;
  Rng rng_;
  EnvState state_;
};

}  // namespace planprobe::env
