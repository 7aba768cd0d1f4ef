#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "qf/agents.hpp"
#include "qf/extraction.hpp"

using namespace qf;
using qf_test::default_bestiary;

namespace {

ResistanceExtractor mock_extractor() {
  auto client = std::make_shared<MockQaClient>();
  return [client](const Document& doc) { return qa_extract(doc, resistance_vocabulary(), *client, QaTask::Resistance); };
}

GridWorld make_env(KnowledgeMode mode = KnowledgeMode::Queryable) {
  return GridWorld(GridConfig{}, default_bestiary(), qf_test::default_corpus(1.0), mock_extractor(), mode);
}

Observation unit(std::size_t i) {
  Observation o{};
  o[i] = 1.0;
  return o;
}

Action step_toward(const GridWorld& env) {
  const auto n = env.nearest_monster();
  if (!n) return Action::MoveN;
  const auto& m = env.state().monsters[*n];
  const auto& a = env.state().agent;
  if (m.pos.x != a.x) return m.pos.x > a.x ? Action::MoveE : Action::MoveW;
  return m.pos.y > a.y ? Action::MoveS : Action::MoveN;
}

/// Attacks the adjacent monster the environment will target (lowest slot)
/// with the weapon its true resistances allow.
Action always_correct(const Observation&, const GridWorld& env) {
  const auto& s = env.state();
  int target = -1;
  for (const auto& m : s.monsters) {
    if (GridWorld::manhattan(m.pos, s.agent) == 1 && (target < 0 || m.type < target)) target = m.type;
  }
  if (target < 0) return step_toward(env);
  const auto& r = default_bestiary().at(s.type_monster[static_cast<std::size_t>(target)]).resistances;
  return r.contains(env.config().weapon1) ? Action::AttackWeapon2 : Action::AttackWeapon1;
}

}  // namespace

TEST(AgentKinds, NamesAndModes) {
  for (auto k : {AgentKind::Baseline, AgentKind::Query, AgentKind::QueryExplore, AgentKind::Oracle}) {
    EXPECT_EQ(parse_agent_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_agent_kind("random"), ConfigError);
  EXPECT_EQ(knowledge_mode(AgentKind::Baseline), KnowledgeMode::Baseline);
  EXPECT_EQ(knowledge_mode(AgentKind::Oracle), KnowledgeMode::Oracle);
  EXPECT_EQ(knowledge_mode(AgentKind::Query), KnowledgeMode::Queryable);
  EXPECT_EQ(knowledge_mode(AgentKind::QueryExplore), KnowledgeMode::Queryable);
}

TEST(Schedules, QueryExploreIsLinear) {
  QueryExploreSchedule s;
  EXPECT_DOUBLE_EQ(s.probability(0), 0.25);
  EXPECT_DOUBLE_EQ(s.probability(25000), 0.125);
  EXPECT_DOUBLE_EQ(s.probability(50000), 0.0);
  EXPECT_DOUBLE_EQ(s.probability(80000), 0.0);
}

TEST(Schedules, EpsilonDecaysOverFirstThirtyPercent) {
  EpsilonSchedule e;
  e.total_steps = 1000;
  EXPECT_DOUBLE_EQ(e.value(0), 1.0);
  EXPECT_DOUBLE_EQ(e.value(150), 0.525);
  EXPECT_DOUBLE_EQ(e.value(300), 0.05);
  EXPECT_DOUBLE_EQ(e.value(999), 0.05);
}

TEST(QAgent, ShapeAndActionSets) {
  QAgent seven(7, {}, 1), six(6, {}, 1);
  EXPECT_TRUE(seven.has_query());
  EXPECT_FALSE(six.has_query());
  EXPECT_EQ(seven.network().sizes(), (std::vector<std::size_t>{13, 64, 7}));
  EXPECT_THROW(QAgent(5, {}, 1), ConfigError);
  Rng rng(1);
  QueryExploreSchedule s;
  EXPECT_THROW(six.select_action(unit(0), 0, PolicyMode::Train, &s, rng), ConfigError);
}

TEST(QAgent, ForcedQueryRateAtStart) {
  QAgent agent(7, {}, 2);
  QueryExploreSchedule s;
  Rng rng(3);
  int forced_count = 0;
  for (int i = 0; i < 20000; ++i) {
    bool forced = false;
    agent.select_action(unit(0), 0, PolicyMode::Train, &s, rng, &forced);
    forced_count += forced ? 1 : 0;
  }
  EXPECT_NEAR(forced_count / 20000.0, 0.25, 0.01);
}

TEST(QAgent, NoForcingAfterDecay) {
  QAgentConfig cfg;
  cfg.epsilon.total_steps = 100;
  QAgent agent(7, cfg, 2);
  QueryExploreSchedule s;
  Rng a(4), b(4);
  for (long t = 50000; t < 50500; ++t) {
    bool forced = true;
    const auto with = agent.select_action(unit(1), t, PolicyMode::Train, &s, a, &forced);
    EXPECT_FALSE(forced);
    // schedule still draws its (zero-probability) coin, so compare against a matched stream
    b.uniform();
    EXPECT_EQ(with, agent.select_action(unit(1), t, PolicyMode::Train, nullptr, b));
  }
}

TEST(QAgent, EvalModeIsArgmaxWithLowestTie) {
  QAgent agent(6, {}, 5);
  for (auto& layer : agent.network().layers()) std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
  Rng rng(1);
  EXPECT_EQ(agent.select_action(unit(3), 0, PolicyMode::Eval, nullptr, rng), Action::MoveN);
  agent.network().layers()[1].bias[4] = 0.5;
  EXPECT_EQ(agent.select_action(unit(3), 0, PolicyMode::Eval, nullptr, rng), Action::AttackWeapon1);
}

TEST(QAgent, DoneTransitionTargetIsReward) {
  QAgent agent(7, {}, 6);
  for (auto& layer : agent.network().layers()) {
    std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  EXPECT_DOUBLE_EQ(agent.td_update(Transition{unit(0), 2, 1.0, unit(1), true}), 1.0);
  EXPECT_THROW(agent.td_update(Transition{unit(0), 9, 1.0, unit(1), true}), ConfigError);
}

TEST(QAgent, ZeroDiscountIsRegression) {
  QAgentConfig cfg;
  cfg.gamma = 0.0;
  cfg.learning_rate = 1e-2;
  QAgent agent(6, cfg, 7);
  // large next-state values must not leak into the target
  agent.network().layers()[1].bias[0] = 100.0;
  for (int i = 0; i < 3000; ++i) agent.td_update(Transition{unit(2), 1, 0.3, unit(5), false});
  EXPECT_NEAR(agent.q_values(unit(2))[1], 0.3, 1e-2);
}

TEST(QAgent, TwoStateChainMatchesValueIteration) {
  // s0 --a0--> s1 (r=0); s0 --other--> end (r=0.1); s1 --a1--> end (r=1); s1 --other--> end (r=0)
  const std::size_t n_actions = 6;
  auto reward = [](int s, std::size_t a) { return s == 0 ? (a == 0 ? 0.0 : 0.1) : (a == 1 ? 1.0 : 0.0); };
  auto next = [](int s, std::size_t a) { return s == 0 && a == 0 ? 1 : -1; };
  const double gamma = 0.95;

  double q_star[2][6] = {};
  for (int sweep = 0; sweep < 100; ++sweep) {
    for (int s = 0; s < 2; ++s) {
      for (std::size_t a = 0; a < n_actions; ++a) {
        const int s2 = next(s, a);
        double v = 0;
        if (s2 >= 0) v = *std::max_element(std::begin(q_star[s2]), std::end(q_star[s2]));
        q_star[s][a] = reward(s, a) + gamma * v;
      }
    }
  }

  QAgentConfig cfg;
  cfg.gamma = gamma;
  cfg.learning_rate = 3e-3;
  QAgent agent(n_actions, cfg, 8);
  Rng rng(9);
  const long steps = 10000;
  int s = 0;
  for (long t = 0; t < steps; ++t) {
    agent.set_learning_rate(3e-3 + (1e-4 - 3e-3) * static_cast<double>(t) / steps);
    const auto a = static_cast<std::size_t>(rng.below(n_actions));
    const int s2 = next(s, a);
    agent.td_update(Transition{unit(static_cast<std::size_t>(s)), a, reward(s, a),
                               unit(static_cast<std::size_t>(s2 < 0 ? 0 : s2)), s2 < 0});
    s = s2 < 0 ? 0 : s2;
  }
  for (int st = 0; st < 2; ++st) {
    const auto q = agent.q_values(unit(static_cast<std::size_t>(st)));
    for (std::size_t a = 0; a < n_actions; ++a) EXPECT_NEAR(q[a], q_star[st][a], 1e-2) << st << "," << a;
  }
}

TEST(Evaluate, ScriptedCorrectWeaponScoresOne) {
  auto env = make_env(KnowledgeMode::Baseline);
  const auto rep = evaluate_policy(env, always_correct, 20, 1);
  ASSERT_TRUE(rep.weapon_choice.has_value());
  EXPECT_DOUBLE_EQ(*rep.weapon_choice, 1.0);
  EXPECT_FALSE(rep.query_relevance.has_value());
  EXPECT_EQ(rep.episodes, 20);
  EXPECT_GT(rep.mean_kills, 0.0);
}

TEST(Evaluate, WrongWeaponScoresZero) {
  auto env = make_env(KnowledgeMode::Baseline);
  auto wrong = [](const Observation& o, const GridWorld& env) {
    const auto a = always_correct(o, env);
    if (a == Action::AttackWeapon1) return Action::AttackWeapon2;
    if (a == Action::AttackWeapon2) return Action::AttackWeapon1;
    return a;
  };
  const auto rep = evaluate_policy(env, wrong, 10, 2);
  ASSERT_TRUE(rep.weapon_choice.has_value());
  EXPECT_DOUBLE_EQ(*rep.weapon_choice, 0.0);
}

TEST(Evaluate, NeutralOnlyQueriesAreIrrelevant) {
  auto env = make_env();
  Rng rng(3);
  auto policy = [&](const Observation&, const GridWorld& env) {
    const auto n = env.nearest_monster();
    if (n && env.state().monsters[*n].type >= 2) return Action::Query;
    return static_cast<Action>(rng.below(4));
  };
  const auto rep = evaluate_policy(env, policy, 20, 3);
  ASSERT_TRUE(rep.query_relevance.has_value());
  EXPECT_DOUBLE_EQ(*rep.query_relevance, 0.0);
  EXPECT_GT(rep.queries_per_episode, 0.0);
}

TEST(Evaluate, RandomQueryTargetingIsHalfRelevant) {
  auto env = make_env();
  Rng rng(4);
  auto policy = [&](const Observation&, const GridWorld&) {
    return rng.bernoulli(0.5) ? Action::Query : static_cast<Action>(rng.below(4));
  };
  const auto rep = evaluate_policy(env, policy, 500, 4);
  ASSERT_TRUE(rep.query_relevance.has_value());
  EXPECT_NEAR(*rep.query_relevance, 0.5, 0.05);
}

TEST(Evaluate, ZeroEpisodesIsAnError) {
  auto env = make_env();
  EXPECT_THROW(evaluate_policy(env, always_correct, 0, 1), ConfigError);
  QAgent agent(7, {}, 1);
  auto six = make_env(KnowledgeMode::Oracle);
  EXPECT_THROW(evaluate(agent, six, 1, 1), ConfigError);
}

TEST(TrainAgent, ShortRunIsDeterministicAndWellFormed) {
  AgentTrainConfig cfg;
  cfg.steps = 1500;
  cfg.eval_every = 500;
  cfg.eval_episodes = 3;
  const auto& corpus = qf_test::default_corpus(1.0);
  const auto a = train_agent(AgentKind::QueryExplore, GridConfig{}, default_bestiary(), corpus, mock_extractor(), cfg, 1);
  const auto b = train_agent(AgentKind::QueryExplore, GridConfig{}, default_bestiary(), corpus, mock_extractor(), cfg, 1);
  ASSERT_EQ(a.reports.size(), 3u);
  EXPECT_EQ(a.reports[2].eval_step, 1500);
  EXPECT_EQ(a.forced_queries, b.forced_queries);
  EXPECT_GT(a.forced_queries, 0);
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    EXPECT_EQ(a.reports[i].mean_reward, b.reports[i].mean_reward);
    EXPECT_EQ(a.reports[i].weapon_choice, b.reports[i].weapon_choice);
    EXPECT_EQ(a.reports[i].query_relevance, b.reports[i].query_relevance);
    EXPECT_EQ(a.reports[i].episodes, 3);
  }
}

TEST(TrainAgent, BaselineAndOracleNeverQuery) {
  AgentTrainConfig cfg;
  cfg.steps = 1000;
  cfg.eval_every = 500;
  cfg.eval_episodes = 3;
  for (auto kind : {AgentKind::Baseline, AgentKind::Oracle}) {
    QAgent trained(kActionCount, cfg.agent, 0);
    const auto run = train_agent(kind, GridConfig{}, default_bestiary(), qf_test::default_corpus(1.0), mock_extractor(),
                                 cfg, 2, &trained);
    EXPECT_FALSE(trained.has_query());
    EXPECT_EQ(run.forced_queries, 0);
    for (const auto& r : run.reports) {
      EXPECT_EQ(r.queries_per_episode, 0.0);
      EXPECT_FALSE(r.query_relevance.has_value());
    }
  }
}

TEST(TrainAgent, StepsToWeaponChoice) {
  AgentRun run;
  for (long s : {1000L, 2000L, 3000L}) {
    AgentReport r;
    r.eval_step = s;
    run.reports.push_back(r);
  }
  EXPECT_EQ(steps_to_weapon_choice(run), std::nullopt);
  run.reports[1].weapon_choice = 0.79;
  run.reports[2].weapon_choice = 0.8;
  EXPECT_EQ(steps_to_weapon_choice(run), 3000);
  EXPECT_EQ(steps_to_weapon_choice(run, 0.5), 2000);
}
