#include "planprobe/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "planprobe/error.hpp"

namespace planprobe::env {

namespace {

int chebyshev(int ax, int ay, int bx, int by) { return std::max(std::abs(ax - bx), std::abs(ay - by)); }

/// One 4-connected step from (x,y) toward (tx,ty), reducing the larger gap
/// first (x on ties).
void step_toward(int& x, int& y, int tx, int ty) {
  const int dx = tx - x, dy = ty - y;
  if (dx == 0 && dy == 0) return;
  if (std::abs(dx) >= std::abs(dy))
    x += dx > 0 ? 1 : -1;
  else
    y += dy > 0 ? 1 : -1;
}

int integer_sqrt(int n) {
  int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  return k * k == n ? k : -1;
}

}  // namespace

std::string to_string(SemanticClass c) {
  switch (c) {
    case SemanticClass::Heal: return "heal";
    case SemanticClass::Strike: return "strike";
    case SemanticClass::Dash: return "dash";
    case SemanticClass::NoopFiller: return "noop-filler";
  }
  return "noop-filler";
}

SemanticClass semantic_class_from_string(const std::string& s) {
  if (s == "heal") return SemanticClass::Heal;
  if (s == "strike") return SemanticClass::Strike;
  if (s == "dash") return SemanticClass::Dash;
  if (s == "noop-filler") return SemanticClass::NoopFiller;
  throw ConfigError("env.abilities: unknown semantic_class '" + s + "'");
}

std::vector<AbilityDef> default_abilities() {
  return {
      {0, "heal_small", SemanticClass::Heal, 25.0, 40},
      {1, "heal_large", SemanticClass::Heal, 45.0, 70},
      {2, "strike_weak", SemanticClass::Strike, 12.0, 6},
      {3, "strike_strong", SemanticClass::Strike, 20.0, 12},
      {4, "dash_short", SemanticClass::Dash, 2.0, 8},
      {5, "dash_long", SemanticClass::Dash, 3.0, 14},
      {6, "filler_a", SemanticClass::NoopFiller, 0.0, 0},
      {7, "filler_b", SemanticClass::NoopFiller, 0.0, 3},
      {8, "filler_c", SemanticClass::NoopFiller, 0.0, 5},
      {9, "filler_d", SemanticClass::NoopFiller, 0.0, 9},
  };
}

void EnvConfig::validate(int slice_length) const {
  auto fail = [](const std::string& msg) { throw ConfigError("env." + msg); };
  if (grid_size < 8) fail("grid_size: must satisfy grid_size >= 8");
  if (num_towers < 1) fail("num_towers: must satisfy num_towers >= 1");
  if (num_towers > grid_size - 5) fail("num_towers: too many towers for the lane");
  const int k = integer_sqrt(num_regions);
  if (num_regions < 1 || k < 1 || k > grid_size)
    fail("num_regions: must be a perfect square k^2 with 1 <= k <= grid_size");
  if (max_episode_len <= 4 * slice_length)
    fail("max_episode_len: must exceed 4x the slice length (" + std::to_string(4 * slice_length) +
         ")");
  if (respawn_delay < 1) fail("respawn_delay: must be >= 1");
  if (creep_spawn_period < 1) fail("creep_spawn_period: must be >= 1");
  if (creep_move_period < 1) fail("creep_move_period: must be >= 1");
  if (creeps_per_wave < 0) fail("creeps_per_wave: must be >= 0");
  if (tower_range < 1) fail("tower_range: must be >= 1");
  if (!(agent_max_hp > 0.0)) fail("agent_max_hp: must be > 0");
  if (!(tower_hp > 0.0)) fail("tower_hp: must be > 0");
  if (!(enemy_base_hp > 0.0)) fail("enemy_base_hp: must be > 0");
  if (!(own_base_hp > 0.0)) fail("own_base_hp: must be > 0");
  if (!(creep_hp > 0.0)) fail("creep_hp: must be > 0");
  if (creep_damage < 0.0) fail("creep_damage: must be >= 0");
  if (gold_per_damage < 0.0 || tower_bounty < 0.0 || base_bounty < 0.0)
    fail("gold: gold rewards must be >= 0");
  if (creep_kill_reward < 0.0) fail("creep_kill_reward: must be >= 0");
  if (death_penalty > 0.0) fail("death_penalty: must be <= 0");
  for (std::size_t i = 0; i < abilities.size(); ++i) {
    if (abilities[i].ability_id != i)
      fail("abilities: ability_id values must be dense from 0 (index " + std::to_string(i) + ")");
    if (abilities[i].magnitude < 0.0) fail("abilities: magnitude must be >= 0");
  }
}

int EnvConfig::num_actions() const { return kNumPrimitiveActions + static_cast<int>(abilities.size()); }

bool FrameEvents::any() const {
  auto set = [](const std::vector<std::uint8_t>& v) {
    return std::any_of(v.begin(), v.end(), [](std::uint8_t b) { return b != 0; });
  };
  return set(reach_region) || set(tower_destroyed) || base_destroyed || own_base_attacked || kill ||
         death || win || gold_gain != 0.0 || kill_reward != 0.0 || death_penalty != 0.0;
}

int region_of(int x, int y, int grid_size, int num_regions) {
  const int k = integer_sqrt(num_regions);
  if (k < 1) throw ConfigError("env.num_regions: must be a perfect square");
  if (x < 0 || y < 0 || x >= grid_size || y >= grid_size)
    throw DomainError("region_of: position (" + std::to_string(x) + "," + std::to_string(y) +
                      ") outside the grid");
  const int bx = x * k / grid_size;
  const int by = y * k / grid_size;
  return by * k + bx;
}

Env::Env(EnvConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed), rng_(seed) {
  config_.validate(1);
}

int Env::region_of(int x, int y) const { return env::region_of(x, y, config_.grid_size, config_.num_regions); }

std::pair<int, int> Env::tower_pos(int k) const {
  const int span = config_.grid_size - 3;
  const int offset = static_cast<int>(
      std::lround(static_cast<double>((k + 1) * span) / static_cast<double>(config_.num_towers + 1)));
  return {1 + offset, 1 + offset};
}

bool Env::tower_vulnerable(std::size_t k) const {
  if (state_.towers[k].hp <= 0.0) return false;
  return k == 0 || state_.towers[k - 1].hp <= 0.0;
}

bool Env::enemy_base_vulnerable() const {
  return std::all_of(state_.towers.begin(), state_.towers.end(), [](const Unit& t) { return t.hp <= 0.0; });
}

Observation Env::reset() {
  EnvState s;
  const auto [ox, oy] = own_base_pos();
  const auto [ex, ey] = enemy_base_pos();
  s.agent_x = ox;
  s.agent_y = oy;
  s.agent_hp = config_.agent_max_hp;
  s.cooldown_left.assign(config_.abilities.size(), 0);
  for (int k = 0; k < config_.num_towers; ++k) {
    const auto [tx, ty] = tower_pos(k);
    s.towers.push_back({tx, ty, config_.tower_hp, static_cast<std::uint32_t>(k)});
  }
  s.enemy_base = {ex, ey, config_.enemy_base_hp, 0};
  s.own_base = {ox, oy, config_.own_base_hp, 0};
  s.last_region = region_of(ox, oy);
  s.needs_reset = false;
  state_ = std::move(s);
  spawn_wave();
  return observe();
}

void Env::spawn_wave() {
  const int g = config_.grid_size;
  for (int i = 0; i < config_.creeps_per_wave; ++i) {
    const int ax = 1 + static_cast<int>(rng_.uniform_int(3));
    const int ay = 1 + static_cast<int>(rng_.uniform_int(3));
    state_.ally_creeps.push_back({ax, ay, config_.creep_hp, state_.next_creep_id++});
    const int ex = g - 2 - static_cast<int>(rng_.uniform_int(3));
    const int ey = g - 2 - static_cast<int>(rng_.uniform_int(3));
    state_.enemy_creeps.push_back({ex, ey, config_.creep_hp, state_.next_creep_id++});
  }
}

Unit* Env::agent_target() {
  Unit* best = nullptr;
  int best_d = 2;
  auto consider = [&](Unit& u) {
    const int d = chebyshev(state_.agent_x, state_.agent_y, u.x, u.y);
    if (d < best_d) {
      best = &u;
      best_d = d;
    }
  };
  // Structures are considered first so they win distance ties.
  for (std::size_t k = 0; k < state_.towers.size(); ++k)
    if (tower_vulnerable(k)) consider(state_.towers[k]);
  if (enemy_base_vulnerable() && state_.enemy_base.hp > 0.0) consider(state_.enemy_base);
  for (Unit& c : state_.enemy_creeps)
    if (c.hp > 0.0) consider(c);
  return best;
}

void Env::damage_enemy_unit(Unit* target, double amount, FrameEvents& ev) {
  const bool is_creep = target >= state_.enemy_creeps.data() &&
                        target < state_.enemy_creeps.data() + state_.enemy_creeps.size();
  const double dealt = std::min(amount, target->hp);
  target->hp -= dealt;
  if (is_creep) {
    if (target->hp <= 0.0) {
      ev.kill = 1;
      ev.kill_reward += config_.creep_kill_reward;
    }
    return;
  }
  ev.gold_gain += dealt * config_.gold_per_damage;
}

void Env::agent_act(Action action, FrameEvents& ev) {
  const int g = config_.grid_size;
  auto& s = state_;
  if (action < kNumPrimitiveActions) {
    switch (action) {
      case MoveUp: s.agent_y = std::min(g - 1, s.agent_y + 1); break;
      case MoveDown: s.agent_y = std::max(0, s.agent_y - 1); break;
      case MoveLeft: s.agent_x = std::max(0, s.agent_x - 1); break;
      case MoveRight: s.agent_x = std::min(g - 1, s.agent_x + 1); break;
      case Attack:
        if (Unit* t = agent_target()) damage_enemy_unit(t, config_.agent_attack_damage, ev);
        break;
      default: break;
    }
    return;
  }
  const std::size_t a = static_cast<std::size_t>(action - kNumPrimitiveActions);
  if (s.cooldown_left[a] > 0) return;
  const AbilityDef& def = config_.abilities[a];
  s.cooldown_left[a] = static_cast<int>(def.cooldown);
  switch (def.semantic_class) {
    case SemanticClass::Heal: s.agent_hp = std::min(config_.agent_max_hp, s.agent_hp + def.magnitude); break;
    case SemanticClass::Strike:
      if (Unit* t = agent_target()) damage_enemy_unit(t, def.magnitude, ev);
      break;
    case SemanticClass::Dash: {
      int tx = s.enemy_base.x, ty = s.enemy_base.y;
      for (const Unit& t : s.towers)
        if (t.hp > 0.0) {
          tx = t.x;
          ty = t.y;
          break;
        }
      const int steps = static_cast<int>(def.magnitude);
      for (int i = 0; i < steps && chebyshev(s.agent_x, s.agent_y, tx, ty) > 1; ++i)
        step_toward(s.agent_x, s.agent_y, tx, ty);
      break;
    }
    case SemanticClass::NoopFiller: break;
  }
}

void Env::damage_agent(double amount) {
  auto& s = state_;
  if (!s.alive) return;
  s.agent_hp -= amount;
  if (s.agent_hp <= 0.0) {
    s.agent_hp = 0.0;
    s.alive = false;
    s.respawn_timer = config_.respawn_delay;
    s.agent_x = s.own_base.x;
    s.agent_y = s.own_base.y;
  }
}

void Env::creeps_act(FrameEvents& ev) {
  auto& s = state_;
  const bool move_frame = s.frame_index % config_.creep_move_period == 0;

  for (Unit& c : s.ally_creeps) {
    if (c.hp <= 0.0) continue;
    Unit* target = nullptr;
    int best = 2;
    for (std::size_t k = 0; k < s.towers.size(); ++k) {
      const int d = chebyshev(c.x, c.y, s.towers[k].x, s.towers[k].y);
      if (tower_vulnerable(k) && d < best) {
        target = &s.towers[k];
        best = d;
      }
    }
    if (enemy_base_vulnerable() && s.enemy_base.hp > 0.0 &&
        chebyshev(c.x, c.y, s.enemy_base.x, s.enemy_base.y) < best) {
      target = &s.enemy_base;
      best = chebyshev(c.x, c.y, s.enemy_base.x, s.enemy_base.y);
    }
    for (Unit& e : s.enemy_creeps) {
      const int d = chebyshev(c.x, c.y, e.x, e.y);
      if (e.hp > 0.0 && d < best) {
        target = &e;
        best = d;
      }
    }
    if (target) {
      target->hp = std::max(0.0, target->hp - config_.creep_damage);
    } else if (move_frame) {
      step_toward(c.x, c.y, s.enemy_base.x, s.enemy_base.y);
    }
  }

  for (Unit& c : s.enemy_creeps) {
    if (c.hp <= 0.0) continue;
    enum { None, Creep, Agent, Base } kind = None;
    Unit* target = nullptr;
    int best = 2;
    for (Unit& a : s.ally_creeps) {
      const int d = chebyshev(c.x, c.y, a.x, a.y);
      if (a.hp > 0.0 && d < best) {
        target = &a;
        best = d;
        kind = Creep;
      }
    }
    if (s.alive && chebyshev(c.x, c.y, s.agent_x, s.agent_y) < best) {
      best = chebyshev(c.x, c.y, s.agent_x, s.agent_y);
      kind = Agent;
    }
    if (chebyshev(c.x, c.y, s.own_base.x, s.own_base.y) < best) kind = Base;
    switch (kind) {
      case Creep: target->hp = std::max(0.0, target->hp - config_.creep_damage); break;
      case Agent: damage_agent(config_.creep_damage); break;
      case Base:
        s.own_base.hp = std::max(0.0, s.own_base.hp - config_.creep_damage);
        ev.own_base_attacked = 1;
        break;
      case None:
        if (move_frame) step_toward(c.x, c.y, s.own_base.x, s.own_base.y);
        break;
    }
  }
}

void Env::structures_act() {
  auto& s = state_;
  // Enemy towers and base: nearest in-range ally unit, creeps win ties.
  auto shoot = [&](const Unit& shooter) {
    Unit* target = nullptr;
    int best = config_.tower_range + 1;
    for (Unit& a : s.ally_creeps) {
      const int d = chebyshev(shooter.x, shooter.y, a.x, a.y);
      if (a.hp > 0.0 && d < best) {
        target = &a;
        best = d;
      }
    }
    if (s.alive && chebyshev(shooter.x, shooter.y, s.agent_x, s.agent_y) < best)
      damage_agent(config_.tower_damage);
    else if (target)
      target->hp = std::max(0.0, target->hp - config_.tower_damage);
  };
  for (const Unit& t : s.towers)
    if (t.hp > 0.0) shoot(t);
  if (s.enemy_base.hp > 0.0) shoot(s.enemy_base);

  Unit* target = nullptr;
  int best = config_.tower_range + 1;
  for (Unit& e : s.enemy_creeps) {
    const int d = chebyshev(s.own_base.x, s.own_base.y, e.x, e.y);
    if (e.hp > 0.0 && d < best) {
      target = &e;
      best = d;
    }
  }
  if (target) target->hp = std::max(0.0, target->hp - config_.own_base_damage);
}

StepResult Env::step(Action action) {
  auto& s = state_;
  if (s.needs_reset) throw UsageError("Env::step called before reset()");
  if (done()) throw UsageError("Env::step called after the episode finished; call reset()");
  if (action < 0 || action >= config_.num_actions())
    throw UsageError("Env::step: action " + std::to_string(action) + " out of range");

  FrameEvents ev;
  ev.reach_region.assign(static_cast<std::size_t>(config_.num_regions), 0);
  ev.tower_destroyed.assign(s.towers.size(), 0);

  std::vector<double> tower_hp_before;
  for (const Unit& t : s.towers) tower_hp_before.push_back(t.hp);
  const double base_hp_before = s.enemy_base.hp;
  const bool alive_before = s.alive;

  if (s.alive) agent_act(action, ev);
  creeps_act(ev);
  structures_act();

  std::erase_if(s.ally_creeps, [](const Unit& u) { return u.hp <= 0.0; });
  std::erase_if(s.enemy_creeps, [](const Unit& u) { return u.hp <= 0.0; });

  if (alive_before && !s.alive) {
    ev.death = 1;
    ev.death_penalty = config_.death_penalty;
  }
  for (std::size_t k = 0; k < s.towers.size(); ++k) {
    if (tower_hp_before[k] > 0.0 && s.towers[k].hp <= 0.0) {
      ev.tower_destroyed[k] = 1;
      ev.gold_gain += config_.tower_bounty;
    }
  }
  if (base_hp_before > 0.0 && s.enemy_base.hp <= 0.0) {
    ev.base_destroyed = 1;
    ev.win = 1;
    ev.gold_gain += config_.base_bounty;
    s.outcome = Outcome::Win;
  } else if (s.own_base.hp <= 0.0) {
    s.outcome = Outcome::Loss;
  }
  s.gold += ev.gold_gain;

  ++s.frame_index;
  for (int& c : s.cooldown_left)
    if (c > 0) --c;
  if (!s.alive && --s.respawn_timer <= 0) {
    s.respawn_timer = 0;
    s.alive = true;
    s.agent_hp = config_.agent_max_hp;
    s.agent_x = s.own_base.x;
    s.agent_y = s.own_base.y;
  }
  if (s.alive) {
    const int r = region_of(s.agent_x, s.agent_y);
    if (r != s.last_region) {
      ev.reach_region[static_cast<std::size_t>(r)] = 1;
      s.last_region = r;
    }
  }
  if (s.outcome == Outcome::Running) {
    if (s.frame_index % config_.creep_spawn_period == 0) spawn_wave();
    if (s.frame_index >= config_.max_episode_len) s.outcome = Outcome::Timeout;
  }
  return {observe(), std::move(ev), done()};
}

Observation Env::observe() const {
  const auto& s = state_;
  const double g = static_cast<double>(config_.grid_size);
  Observation o;
  o.agent_x = s.agent_x;
  o.agent_y = s.agent_y;
  o.agent_hp = s.agent_hp / config_.agent_max_hp;
  o.gold = s.gold;
  o.alive = s.alive;
  o.respawn_timer = s.respawn_timer;
  o.own_base_hp = s.own_base.hp / config_.own_base_hp;
  o.frame_index = static_cast<std::uint32_t>(s.frame_index);
  for (std::size_t a = 0; a < s.cooldown_left.size(); ++a) {
    const auto cd = config_.abilities[a].cooldown;
    o.cooldowns.push_back(cd == 0 ? 0.0 : static_cast<double>(s.cooldown_left[a]) / cd);
  }
  auto record = [&](const Unit& u, std::uint32_t type, double max_hp, bool vulnerable) {
    EntityRecord r;
    r.present = u.hp > 0.0;
    r.type_id = type;
    if (r.present) {
      r.rel_x = (u.x - s.agent_x) / g;
      r.rel_y = (u.y - s.agent_y) / g;
      r.hp = u.hp / max_hp;
      r.vulnerable = vulnerable;
    }
    return r;
  };
  for (std::size_t k = 0; k < s.towers.size(); ++k)
    o.entities.push_back(record(s.towers[k], EnemyTower, config_.tower_hp, tower_vulnerable(k)));
  o.entities.push_back(record(s.enemy_base, EnemyBase, config_.enemy_base_hp,
                              enemy_base_vulnerable() && s.enemy_base.hp > 0.0));

  auto nearest = [&](const std::vector<Unit>& units, std::size_t slots, std::uint32_t type) {
    std::vector<const Unit*> order;
    for (const Unit& u : units) order.push_back(&u);
    std::stable_sort(order.begin(), order.end(), [&](const Unit* a, const Unit* b) {
      const int da = chebyshev(a->x, a->y, s.agent_x, s.agent_y);
      const int db = chebyshev(b->x, b->y, s.agent_x, s.agent_y);
      return da != db ? da < db : a->id < b->id;
    });
    for (std::size_t i = 0; i < slots; ++i) {
      if (i < order.size()) {
        o.entities.push_back(record(*order[i], type, config_.creep_hp, true));
      } else {
        EntityRecord empty;
        empty.type_id = type;
        o.entities.push_back(empty);
      }
    }
  };
  nearest(s.enemy_creeps, kEnemyCreepSlots, EnemyCreep);
  nearest(s.ally_creeps, kAllyCreepSlots, AllyCreep);
  return o;
}

}  // namespace planprobe::env
