#pragma once

// Grid level with four monster types, a two-weapon inventory, kill rewards, a
// per-step penalty, and an informational Query action that runs an extractor
// over the nearest monster's page and stores the result for the episode.
//
// Each episode draws concrete monsters from the bestiary for the four type
// slots. Slots 0 and 1 are the discriminating pair (one resists weapon 1's
// damage type only, the other weapon 2's only) with their order shuffled
// per episode; slots 2 and 3 resist neither. The slot identity is visible,
// which resistance a discriminating slot has is not.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qf/attributes.hpp"
#include "qf/bestiary.hpp"
#include "qf/error.hpp"
#include "qf/random.hpp"

namespace qf {

inline constexpr std::size_t kMonsterTypes = 4;
inline constexpr std::size_t kObservationSize = 13;

enum class Action { MoveN = 0, MoveS, MoveE, MoveW, AttackWeapon1, AttackWeapon2, Query };
inline constexpr std::size_t kActionCount = 7;

inline std::string_view to_string(Action a) {
  static constexpr std::array<std::string_view, kActionCount> names{"move_n",  "move_s",  "move_e", "move_w",
                                                                    "attack1", "attack2", "query"};
  return names[static_cast<std::size_t>(a)];
}

/// How resistance knowledge reaches the observation.
enum class KnowledgeMode {
  Queryable,  // starts empty, filled by Query
  Oracle,     // pre-filled with ground truth, Query unavailable
  Baseline,   // always empty, Query unavailable
};

struct GridConfig {
  int width = 9;
  int height = 9;
  int monsters_per_type = 2;
  int agent_hp = 10;
  int monster_hp = 2;
  int contact_damage = 1;
  std::string weapon1 = "fire";
  std::string weapon2 = "cold";
  int effective_damage = 2;
  int resisted_damage = 0;
  double step_penalty = -0.01;
  double kill_reward = 1.0;
  int horizon = 200;
  bool respawn = true;
  // A monster that takes no damage from a hit moves to a random free cell,
  // mirroring the kill-and-respawn outcome of an effective hit.
  bool relocate_on_resist = true;

  void validate() const {
    std::vector<std::string> bad;
    if (width <= 0 || height <= 0) bad.push_back("width/height");
    if (monsters_per_type <= 0) bad.push_back("monsters_per_type");
    if (agent_hp <= 0) bad.push_back("agent_hp");
    if (monster_hp <= 0) bad.push_back("monster_hp");
    if (contact_damage < 0) bad.push_back("contact_damage");
    if (effective_damage <= 0 || resisted_damage < 0) bad.push_back("effective_damage/resisted_damage");
    if (horizon <= 0) bad.push_back("horizon");
    if (resistance_vocabulary().index_of(weapon1) == resistance_vocabulary().size()) bad.push_back("weapon1");
    if (resistance_vocabulary().index_of(weapon2) == resistance_vocabulary().size() || weapon2 == weapon1) bad.push_back("weapon2");
    if (!bad.empty()) {
      std::string msg = "invalid grid config:";
      for (const auto& b : bad) msg += " " + b;
      throw ConfigError(msg);
    }
    if (static_cast<long>(kMonsterTypes) * monsters_per_type + 1 > static_cast<long>(width) * height) {
      throw ConfigError("monster population exceeds free cells");
    }
  }
};

struct Position {
  int x = 0;
  int y = 0;
  friend bool operator==(const Position&, const Position&) = default;
};

struct Monster {
  int type = 0;  // slot 0..3
  Position pos;
  int hp = 0;
};

struct TypeKnowledge {
  bool known = false;
  AttributeSet resistances{VocabKind::Resistance};
};

struct GridState {
  Position agent;
  int agent_hp = 0;
  std::vector<Monster> monsters;
  int step = 0;
  bool done = false;
  std::array<int, kMonsterTypes> type_monster{};  // bestiary id behind each slot
  std::array<TypeKnowledge, kMonsterTypes> knowledge{};
  Rng rng{0};
  // episode counters
  int kills = 0;
  int queries = 0;
  double episode_return = 0;
};

using Observation = std::array<double, kObservationSize>;

struct AttackEvent {
  int type = 0;
  int weapon = 1;  // 1 or 2
  bool discriminating = false;
  bool effective = false;
};

struct StepInfo {
  int kills = 0;
  int queries_executed = 0;
  int query_target_type = -1;  // slot queried, -1 when nothing was targeted
  std::vector<AttackEvent> attack_events;
};

struct StepResult {
  Observation observation{};
  double reward = 0;
  bool done = false;
  StepInfo info;
};

/// Resolves a monster's resistances from its page. Must be deterministic.
using ResistanceExtractor = std::function<AttributeSet(const Document&)>;

class GridWorld {
 public:
  GridWorld(GridConfig config, const Bestiary& bestiary, const Corpus& corpus, ResistanceExtractor extractor,
            KnowledgeMode mode = KnowledgeMode::Queryable)
      : config_(std::move(config)), bestiary_(bestiary), corpus_(corpus), extractor_(std::move(extractor)), mode_(mode) {
    config_.validate();
    weapon_bits_ = {resistance_vocabulary().index_of(config_.weapon1), resistance_vocabulary().index_of(config_.weapon2)};
    for (const auto& m : bestiary_.monsters) {
      const bool r1 = m.resistances.contains(weapon_bits_[0]);
      const bool r2 = m.resistances.contains(weapon_bits_[1]);
      if (r1 && !r2) resists_first_.push_back(m.id);
      if (r2 && !r1) resists_second_.push_back(m.id);
      if (!r1 && !r2) neutral_.push_back(m.id);
    }
    if (resists_first_.empty() || resists_second_.empty() || neutral_.size() < 2) {
      throw ConfigError("bestiary lacks monsters for the discriminating and neutral slots");
    }
  }

  const GridConfig& config() const { return config_; }
  KnowledgeMode mode() const { return mode_; }
  const GridState& state() const { return state_; }
  GridState& mutable_state() { return state_; }
  bool query_available() const { return mode_ == KnowledgeMode::Queryable; }
  std::size_t action_count() const { return query_available() ? kActionCount : kActionCount - 1; }

  /// True when the slot's monster resists exactly one of the two weapons.
  bool discriminating(int type) const {
    const auto& r = bestiary_.at(state_.type_monster[static_cast<std::size_t>(type)]).resistances;
    return r.contains(weapon_bits_[0]) != r.contains(weapon_bits_[1]);
  }

  Observation reset(std::uint64_t seed) {
    state_ = GridState{};
    state_.rng = Rng(Rng::mix(seed ^ 0x6772696477ULL));
    auto& rng = state_.rng;
    state_.agent = Position{config_.width / 2, config_.height / 2};
    state_.agent_hp = config_.agent_hp;

    std::array<int, 2> pair{rng.pick(resists_first_), rng.pick(resists_second_)};
    if (rng.bernoulli(0.5)) std::swap(pair[0], pair[1]);
    const int n0 = rng.pick(neutral_);
    int n1;
    do {
      n1 = rng.pick(neutral_);
    } while (n1 == n0);
    state_.type_monster = {pair[0], pair[1], n0, n1};

    for (std::size_t t = 0; t < kMonsterTypes; ++t) {
      if (mode_ == KnowledgeMode::Oracle) {
        state_.knowledge[t] = TypeKnowledge{true, bestiary_.at(state_.type_monster[t]).resistances};
      }
      for (int k = 0; k < config_.monsters_per_type; ++k) {
        state_.monsters.push_back(Monster{static_cast<int>(t), random_free_cell(), config_.monster_hp});
      }
    }
    return observe();
  }

  StepResult step(Action action) {
    if (state_.done) throw Error("step() called on a finished episode");
    if (action == Action::Query && !query_available()) throw ConfigError("Query is not in this environment's action set");
    StepResult result;
    auto& info = result.info;

    switch (action) {
      case Action::MoveN: move_agent(0, -1); break;
      case Action::MoveS: move_agent(0, 1); break;
      case Action::MoveE: move_agent(1, 0); break;
      case Action::MoveW: move_agent(-1, 0); break;
      case Action::AttackWeapon1: attack(1, result); break;
      case Action::AttackWeapon2: attack(2, result); break;
      case Action::Query:
        info.queries_executed = 1;
        info.query_target_type = execute_query();
        break;
    }

    move_monsters();
    for (const auto& m : state_.monsters) {
      if (manhattan(m.pos, state_.agent) == 1) state_.agent_hp -= config_.contact_damage;
    }
    result.reward += config_.step_penalty;
    ++state_.step;
    state_.done = state_.agent_hp <= 0 || state_.step >= config_.horizon;

    state_.kills += info.kills;
    state_.queries += info.queries_executed;
    state_.episode_return += result.reward;
    result.done = state_.done;
    result.observation = observe();
    return result;
  }

  /// Looks up the nearest monster's page through the extractor and records
  /// its resistances for that slot. Returns the slot, or -1 with no monster.
  int execute_query() {
    const auto target = nearest_monster();
    if (!target) return -1;
    const int type = state_.monsters[*target].type;
    const int id = state_.type_monster[static_cast<std::size_t>(type)];
    auto it = extracted_.find(id);
    if (it == extracted_.end()) {
      auto doc = corpus_.find(id);
      if (doc == corpus_.end()) throw ConfigError("no document for monster " + std::to_string(id));
      it = extracted_.emplace(id, extractor_(doc->second)).first;
    }
    state_.knowledge[static_cast<std::size_t>(type)] = TypeKnowledge{true, it->second};
    return type;
  }

  Observation observe() const {
    Observation obs{};
    if (const auto n = nearest_monster()) {
      const auto& m = state_.monsters[*n];
      obs[static_cast<std::size_t>(m.type)] = 1.0;
      obs[4] = sign(m.pos.x - state_.agent.x);
      obs[5] = sign(m.pos.y - state_.agent.y);
      obs[6] = manhattan(m.pos, state_.agent) == 1 ? 1.0 : 0.0;
      const auto& k = state_.knowledge[static_cast<std::size_t>(m.type)];
      if (k.known && mode_ != KnowledgeMode::Baseline) {
        obs[7] = 1.0;
        obs[8] = k.resistances.contains(weapon_bits_[0]) ? 1.0 : 0.0;
        obs[9] = k.resistances.contains(weapon_bits_[1]) ? 1.0 : 0.0;
      }
    }
    const double hp = static_cast<double>(state_.agent_hp) / config_.agent_hp;
    obs[hp > 2.0 / 3.0 ? 10 : hp > 1.0 / 3.0 ? 11 : 12] = 1.0;
    return obs;
  }

  /// Index into state().monsters of the nearest monster by Euclidean
  /// distance, ties to the lowest slot.
  std::optional<std::size_t> nearest_monster() const {
    std::optional<std::size_t> best;
    long best_d = 0;
    for (std::size_t i = 0; i < state_.monsters.size(); ++i) {
      const auto& m = state_.monsters[i];
      const long dx = m.pos.x - state_.agent.x, dy = m.pos.y - state_.agent.y;
      const long d = dx * dx + dy * dy;
      if (!best || d < best_d || (d == best_d && m.type < state_.monsters[*best].type)) {
        best = i;
        best_d = d;
      }
    }
    return best;
  }

  bool occupied(Position p) const {
    if (p == state_.agent) return true;
    for (const auto& m : state_.monsters) {
      if (m.pos == p) return true;
    }
    return false;
  }

  bool in_bounds(Position p) const { return p.x >= 0 && p.y >= 0 && p.x < config_.width && p.y < config_.height; }

  static int manhattan(Position a, Position b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

 private:
  static double sign(int v) { return v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0; }

  Position random_free_cell() {
    std::vector<Position> free;
    for (int y = 0; y < config_.height; ++y) {
      for (int x = 0; x < config_.width; ++x) {
        if (!occupied({x, y})) free.push_back({x, y});
      }
    }
    if (free.empty()) throw ConfigError("no free cell left for a monster");
    return state_.rng.pick(free);
  }

  void move_agent(int dx, int dy) {
    const Position next{state_.agent.x + dx, state_.agent.y + dy};
    if (in_bounds(next) && !occupied(next)) state_.agent = next;
  }

  void attack(int weapon, StepResult& result) {
    std::optional<std::size_t> target;
    for (std::size_t i = 0; i < state_.monsters.size(); ++i) {
      if (manhattan(state_.monsters[i].pos, state_.agent) != 1) continue;
      if (!target || state_.monsters[i].type < state_.monsters[*target].type) target = i;
    }
    if (!target) return;
    auto& m = state_.monsters[*target];
    const auto& resist = bestiary_.at(state_.type_monster[static_cast<std::size_t>(m.type)]).resistances;
    const bool resisted = resist.contains(weapon_bits_[static_cast<std::size_t>(weapon - 1)]);
    result.info.attack_events.push_back(AttackEvent{m.type, weapon, discriminating(m.type), !resisted});
    const int damage = resisted ? config_.resisted_damage : config_.effective_damage;
    m.hp -= damage;
    if (m.hp > 0) {
      if (damage == 0 && config_.relocate_on_resist) {
        const auto keep = *target;
        state_.monsters[keep].pos = state_.agent;  // vacate the old cell while picking a new one
        state_.monsters[keep].pos = random_free_cell();
      }
      return;
    }
    const int type = m.type;
    state_.monsters.erase(state_.monsters.begin() + static_cast<long>(*target));
    result.reward += config_.kill_reward;
    ++result.info.kills;
    if (config_.respawn) state_.monsters.push_back(Monster{type, random_free_cell(), config_.monster_hp});
  }

  void move_monsters() {
    static constexpr std::array<std::array<int, 2>, 4> dirs{{{0, -1}, {0, 1}, {1, 0}, {-1, 0}}};
    for (auto& m : state_.monsters) {
      std::vector<Position> options{m.pos};
      for (const auto& d : dirs) {
        const Position p{m.pos.x + d[0], m.pos.y + d[1]};
        if (in_bounds(p) && !occupied(p)) options.push_back(p);
      }
      m.pos = state_.rng.pick(options);
    }
  }

  GridConfig config_;
  const Bestiary& bestiary_;
  const Corpus& corpus_;
  ResistanceExtractor extractor_;
  KnowledgeMode mode_;
  std::array<std::size_t, 2> weapon_bits_{};
  std::vector<int> resists_first_, resists_second_, neutral_;
  std::map<int, AttributeSet> extracted_;
  GridState state_;
};

}  // namespace qf
