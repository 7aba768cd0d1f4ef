#pragma once

// Semi-gradient Q-learning agents for the grid level: Baseline, Query,
// Query+Explore and Oracle, the forced-query exploration schedule, and the
// weapon-choice / query-relevance evaluation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qf/gridworld.hpp"
#include "qf/numerics.hpp"

namespace qf {

enum class AgentKind { Baseline, Query, QueryExplore, Oracle };

inline std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::Baseline: return "baseline";
    case AgentKind::Query: return "query";
    case AgentKind::QueryExplore: return "query_explore";
    case AgentKind::Oracle: return "oracle";
  }
  return "?";
}

inline AgentKind parse_agent_kind(std::string_view name) {
  for (auto k : {AgentKind::Baseline, AgentKind::Query, AgentKind::QueryExplore, AgentKind::Oracle}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown agent kind '" + std::string(name) + "' (expected baseline | query | query_explore | oracle)");
}

inline KnowledgeMode knowledge_mode(AgentKind kind) {
  switch (kind) {
    case AgentKind::Baseline: return KnowledgeMode::Baseline;
    case AgentKind::Oracle: return KnowledgeMode::Oracle;
    default: return KnowledgeMode::Queryable;
  }
}

/// Forced-query probability p0·max(0, 1 − t/decay_steps).
struct QueryExploreSchedule {
  double p0 = 0.25;
  long decay_steps = 50000;

  double probability(long t) const {
    if (decay_steps <= 0) return 0.0;
    return p0 * std::max(0.0, 1.0 - static_cast<double>(t) / static_cast<double>(decay_steps));
  }
};

/// Linear ε decay from `start` to `end` over the first `fraction` of training.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double fraction = 0.3;
  long total_steps = 150000;

  double value(long t) const {
    const double span = fraction * static_cast<double>(total_steps);
    if (span <= 0 || static_cast<double>(t) >= span) return end;
    return start + (end - start) * static_cast<double>(t) / span;
  }
};

struct QAgentConfig {
  std::size_t hidden = 64;
  double gamma = 0.95;
  double learning_rate = 3e-4;
  double final_learning_rate = 3e-5;  // linear anneal toward this by the last training step
  EpsilonSchedule epsilon;
};

enum class PolicyMode { Train, Eval };

struct Transition {
  Observation obs{};
  std::size_t action = 0;
  double reward = 0;
  Observation next_obs{};
  bool done = false;
};

class QAgent {
 public:
  QAgent(std::size_t action_count, const QAgentConfig& config, std::uint64_t seed)
      : config_(config),
        actions_(action_count),
        net_(DenseNet::seeded({kObservationSize, config.hidden, action_count}, seed)),
        optimizer_(OptimizerKind::Adam, config.learning_rate) {
    if (action_count != kActionCount && action_count != kActionCount - 1) throw ConfigError("agent needs 6 or 7 actions");
  }

  std::size_t action_count() const { return actions_; }
  bool has_query() const { return actions_ == kActionCount; }
  const QAgentConfig& config() const { return config_; }
  DenseNet& network() { return net_; }
  const DenseNet& network() const { return net_; }

  Vector q_values(const Observation& obs) const { return net_.forward(Vector(obs.begin(), obs.end())); }

  std::size_t greedy(const Observation& obs) const {
    const auto q = q_values(obs);
    return static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
  }

  /// Train mode: forced Query with the schedule's probability, otherwise
  /// ε-greedy. Eval mode: argmax, ties to the lowest action index.
  Action select_action(const Observation& obs, long t, PolicyMode mode, const QueryExploreSchedule* schedule, Rng& rng,
                       bool* forced = nullptr) const {
    if (schedule != nullptr && !has_query()) throw ConfigError("query schedule given to an agent without Query");
    if (forced != nullptr) *forced = false;
    if (mode == PolicyMode::Eval) return static_cast<Action>(greedy(obs));
    if (schedule != nullptr && rng.bernoulli(schedule->probability(t))) {
      if (forced != nullptr) *forced = true;
      return Action::Query;
    }
    if (rng.bernoulli(config_.epsilon.value(t))) return static_cast<Action>(rng.below(actions_));
    return static_cast<Action>(greedy(obs));
  }

  void set_learning_rate(double lr) { optimizer_.set_learning_rate(lr); }

  /// One semi-gradient Q-learning step on the taken action's value.
  double td_update(const Transition& tr) {
    if (tr.action >= actions_) throw ConfigError("transition action outside the action set");
    double target = tr.reward;
    if (!tr.done) {
      const auto next = q_values(tr.next_obs);
      target += config_.gamma * *std::max_element(next.begin(), next.end());
    }
    if (!std::isfinite(target)) throw DivergenceError("non-finite TD target");
    DenseNet::Tape tape;
    const auto q = net_.forward(Vector(tr.obs.begin(), tr.obs.end()), tape);
    const double err = q[tr.action] - target;
    const double loss = err * err;
    if (!std::isfinite(loss)) throw DivergenceError("non-finite TD loss");
    Vector grad(actions_, 0.0);
    grad[tr.action] = 2.0 * err;
    net_.zero_grad();
    net_.backward(tape, grad);
    auto params = net_.parameters();
    optimizer_.step(params);
    return loss;
  }

 private:
  QAgentConfig config_;
  std::size_t actions_;
  DenseNet net_;
  Optimizer optimizer_;
};

struct AgentReport {
  long eval_step = 0;
  double mean_reward = 0;  // mean episode return
  double mean_kills = 0;
  std::optional<double> weapon_choice;    // unset when no discriminating attack happened
  std::optional<double> query_relevance;  // unset when no query was executed
  double queries_per_episode = 0;
  long episodes = 0;
  std::uint64_t seed = 0;
};

/// Running tallies behind an AgentReport.
struct EpisodeTally {
  double total_return = 0;
  long kills = 0;
  long discriminating_attacks = 0;
  long correct_attacks = 0;
  long queries = 0;
  long relevant_queries = 0;
  long episodes = 0;

  void record(const GridWorld& env, const StepResult& r) {
    for (const auto& a : r.info.attack_events) {
      if (!a.discriminating) continue;
      ++discriminating_attacks;
      correct_attacks += a.effective ? 1 : 0;
    }
    if (r.info.queries_executed > 0) {
      queries += r.info.queries_executed;
      if (r.info.query_target_type >= 0 && env.discriminating(r.info.query_target_type)) ++relevant_queries;
    }
    if (r.done) {
      total_return += env.state().episode_return;
      kills += env.state().kills;
      ++episodes;
    }
  }

  AgentReport report() const {
    AgentReport rep;
    rep.episodes = episodes;
    if (episodes > 0) {
      rep.mean_reward = total_return / static_cast<double>(episodes);
      rep.mean_kills = static_cast<double>(kills) / static_cast<double>(episodes);
      rep.queries_per_episode = static_cast<double>(queries) / static_cast<double>(episodes);
    }
    if (discriminating_attacks > 0) {
      rep.weapon_choice = static_cast<double>(correct_attacks) / static_cast<double>(discriminating_attacks);
    }
    if (queries > 0) rep.query_relevance = static_cast<double>(relevant_queries) / static_cast<double>(queries);
    return rep;
  }
};

/// Runs `episodes` full episodes of an arbitrary policy and tallies metrics.
template <class Policy>
AgentReport evaluate_policy(GridWorld& env, Policy&& policy, long episodes, std::uint64_t seed) {
  if (episodes <= 0) throw ConfigError("evaluation needs at least one episode");
  EpisodeTally tally;
  Rng seeds(seed);
  for (long e = 0; e < episodes; ++e) {
    auto obs = env.reset(seeds.bits());
    while (true) {
      const auto r = env.step(policy(obs, env));
      tally.record(env, r);
      if (r.done) break;
      obs = r.observation;
    }
  }
  auto rep = tally.report();
  rep.seed = seed;
  return rep;
}

/// Greedy rollouts of a trained agent.
inline AgentReport evaluate(const QAgent& agent, GridWorld& env, long episodes, std::uint64_t seed) {
  if (agent.action_count() != env.action_count()) throw ConfigError("agent and environment action sets differ");
  return evaluate_policy(
      env, [&](const Observation& obs, const GridWorld&) { return static_cast<Action>(agent.greedy(obs)); }, episodes,
      seed);
}

struct AgentTrainConfig {
  long steps = 150000;
  long eval_every = 1000;
  long eval_episodes = 50;
  QAgentConfig agent;
  QueryExploreSchedule schedule;
};

struct AgentRun {
  AgentKind kind = AgentKind::Baseline;
  std::uint64_t seed = 0;
  std::vector<AgentReport> reports;
  long forced_queries = 0;
  std::vector<long> forced_query_steps;  // training steps at which Query was forced
};

/// First evaluation step whose weapon choice reaches `threshold`, if any.
inline std::optional<long> steps_to_weapon_choice(const AgentRun& run, double threshold = 0.8) {
  for (const auto& r : run.reports) {
    if (r.weapon_choice && *r.weapon_choice >= threshold) return r.eval_step;
  }
  return std::nullopt;
}

/// Trains one agent kind from scratch and evaluates it every `eval_every`
/// steps with a frozen greedy policy on a fixed set of evaluation episodes.
inline AgentRun train_agent(AgentKind kind, const GridConfig& grid, const Bestiary& bestiary, const Corpus& corpus,
                            const ResistanceExtractor& extractor, const AgentTrainConfig& config, std::uint64_t seed,
                            QAgent* trained = nullptr) {
  if (config.steps <= 0 || config.eval_every <= 0) throw ConfigError("training steps and eval interval must be positive");
  Rng root(Rng::mix(seed ^ 0xa9e7ULL));
  const auto mode = knowledge_mode(kind);
  GridWorld env(grid, bestiary, corpus, extractor, mode);
  GridWorld eval_env(grid, bestiary, corpus, extractor, mode);
  auto agent_config = config.agent;
  agent_config.epsilon.total_steps = config.steps;
  QAgent agent(env.action_count(), agent_config, root.bits());
  const QueryExploreSchedule* schedule = kind == AgentKind::QueryExplore ? &config.schedule : nullptr;
  Rng policy_rng = root.fork(1), episode_rng = root.fork(2);
  const auto eval_seed = root.bits();

  AgentRun run;
  run.kind = kind;
  run.seed = seed;
  auto obs = env.reset(episode_rng.bits());
  for (long t = 0; t < config.steps; ++t) {
    const double progress = static_cast<double>(t) / static_cast<double>(config.steps);
    agent.set_learning_rate(agent_config.learning_rate +
                            (agent_config.final_learning_rate - agent_config.learning_rate) * progress);
    bool forced = false;
    const auto action = agent.select_action(obs, t, PolicyMode::Train, schedule, policy_rng, &forced);
    if (forced) {
      ++run.forced_queries;
      run.forced_query_steps.push_back(t);
    }
    const auto r = env.step(action);
    agent.td_update(Transition{obs, static_cast<std::size_t>(action), r.reward, r.observation, r.done});
    obs = r.done ? env.reset(episode_rng.bits()) : r.observation;
    if ((t + 1) % config.eval_every == 0 || t + 1 == config.steps) {
      auto rep = evaluate(agent, eval_env, config.eval_episodes, eval_seed);
      rep.eval_step = t + 1;
      rep.seed = seed;
      run.reports.push_back(rep);
    }
  }
  if (trained != nullptr) *trained = std::move(agent);
  return run;
}

}  // namespace qf
