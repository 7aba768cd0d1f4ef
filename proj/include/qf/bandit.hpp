#pragma once

// Goal-conditioned two-monster contextual bandit. A shared value network
// scores each candidate from [goal one-hot ‖ candidate features]; the agent
// picks the higher score ε-greedily and regresses the chosen score onto the
// 0/1 reward.

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "qf/bestiary.hpp"
#include "qf/encodings.hpp"
#include "qf/numerics.hpp"

namespace qf {

inline constexpr std::size_t kGoalCount = 5;

struct BanditTask {
  std::size_t goal = 0;  // index into goal_resistances()
  int candidate_a = 0;
  int candidate_b = 0;
  int conferring = 0;  // 0 → candidate_a carries the goal, 1 → candidate_b

  int conferring_id() const { return conferring == 0 ? candidate_a : candidate_b; }
};

/// Precomputed carrier / non-carrier lists for one split.
class TaskSampler {
 public:
  TaskSampler(const Bestiary& bestiary, const std::vector<int>& split_ids) {
    for (std::size_t g = 0; g < kGoalCount; ++g) {
      const auto bit = resistance_vocabulary().require_index(goal_resistances()[g]);
      for (int id : split_ids) {
        (bestiary.at(id).resistances.contains(bit) ? carriers_[g] : others_[g]).push_back(id);
      }
      if (!carriers_[g].empty() && !others_[g].empty()) valid_goals_.push_back(g);
    }
    if (valid_goals_.empty()) throw ConfigError("split has no goal with both a carrier and a non-carrier");
  }

  BanditTask sample(Rng& rng) const {
    BanditTask t;
    t.goal = rng.pick(valid_goals_);
    const int yes = rng.pick(carriers_[t.goal]);
    const int no = rng.pick(others_[t.goal]);
    t.conferring = static_cast<int>(rng.below(2));
    t.candidate_a = t.conferring == 0 ? yes : no;
    t.candidate_b = t.conferring == 0 ? no : yes;
    return t;
  }

  const std::vector<std::size_t>& valid_goals() const { return valid_goals_; }

 private:
  std::array<std::vector<int>, kGoalCount> carriers_;
  std::array<std::vector<int>, kGoalCount> others_;
  std::vector<std::size_t> valid_goals_;
};

inline BanditTask sample_task(const std::vector<int>& split_ids, const Bestiary& bestiary, Rng& rng) {
  return TaskSampler(bestiary, split_ids).sample(rng);
}

struct BanditAgentConfig {
  std::size_t hidden = 64;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 3e-3;
  // Magnitude of the active goal indicator. A unit one-hot forces the tanh
  // layer to grow large goal weights before it can gate per-goal features,
  // which stalls memorization-style encoders within the iteration budget.
  double goal_scale = 10.0;
  double epsilon = 0.1;
  bool zero_init = false;
};

class BanditAgent {
 public:
  BanditAgent(std::unique_ptr<TextEncoder> encoder, const Bestiary& bestiary, const Corpus& corpus,
              const BanditAgentConfig& config, std::uint64_t seed)
      : encoder_(std::move(encoder)),
        bestiary_(bestiary),
        corpus_(corpus),
        epsilon_(config.epsilon),
        goal_scale_(config.goal_scale),
        optimizer_(config.optimizer, config.learning_rate) {
    const std::vector<std::size_t> sizes{kGoalCount + encoder_->dim(), config.hidden, 1};
    net_ = config.zero_init ? DenseNet(sizes) : DenseNet::seeded(sizes, seed);
    recurrent_ = dynamic_cast<RecurrentEncoder*>(encoder_.get());
  }

  const TextEncoder& encoder() const { return *encoder_; }
  DenseNet& value_net() { return net_; }
  const DenseNet& value_net() const { return net_; }
  double epsilon() const { return epsilon_; }
  void set_epsilon(double e) { epsilon_ = e; }

  const Document& document(int id) const {
    auto it = corpus_.find(id);
    if (it == corpus_.end()) throw ConfigError("no document for monster " + std::to_string(id));
    return it->second;
  }

  /// Features of a monster. Frozen encoders are computed once and cached.
  const Vector& features(int id) const {
    if (recurrent_ != nullptr && !frozen_) {
      scratch_ = encoder_->encode(bestiary_.at(id), document(id)).values;
      return scratch_;
    }
    auto it = cache_.find(id);
    if (it == cache_.end()) it = cache_.emplace(id, encoder_->encode(bestiary_.at(id), document(id)).values).first;
    return it->second;
  }

  Vector input(std::size_t goal, const Vector& features) const {
    Vector x(kGoalCount + features.size(), 0.0);
    x[goal] = goal_scale_;
    std::copy(features.begin(), features.end(), x.begin() + kGoalCount);
    return x;
  }

  double score(std::size_t goal, int id) const { return net_.forward(input(goal, features(id)))[0]; }

  /// 0 picks candidate_a, 1 picks candidate_b. Ties go to candidate_a.
  int greedy_choice(const BanditTask& task) const {
    return score(task.goal, task.candidate_b) > score(task.goal, task.candidate_a) ? 1 : 0;
  }

  /// MSE step of the chosen candidate's score toward `reward`; gradients
  /// reach the encoder when it is trainable.
  double learn(std::size_t goal, int id, double reward) {
    if (frozen_) throw Error("learn() called on a frozen bandit agent");
    Vector target{reward};
    if (recurrent_ == nullptr) return train_step(net_, input(goal, features(id)), target, optimizer_);

    RecurrentEncoder::Trace trace;
    const auto h = recurrent_->encode(bestiary_.at(id), document(id), trace);
    DenseNet::Tape tape;
    const auto y = net_.forward(input(goal, h), tape);
    const double loss = mse(y, target);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite bandit loss");
    auto params = parameters();
    params.zero_grad();
    const auto grad_in = net_.backward(tape, mse_grad(y, target));
    recurrent_->backward(trace, Vector(grad_in.begin() + kGoalCount, grad_in.end()));
    optimizer_.step(params);
    return loss;
  }

  /// While frozen, trainable encoders memoize features too; learn() is
  /// rejected. Used for evaluation blocks.
  void freeze() { frozen_ = true; }
  void unfreeze() {
    frozen_ = false;
    if (recurrent_ != nullptr) cache_.clear();
  }

  /// Value net plus any trainable encoder parameters.
  ParameterSet parameters() {
    auto p = net_.parameters();
    if (recurrent_ != nullptr) p.append(recurrent_->parameters());
    return p;
  }

 private:
  std::unique_ptr<TextEncoder> encoder_;
  const Bestiary& bestiary_;
  const Corpus& corpus_;
  double epsilon_;
  double goal_scale_;
  DenseNet net_;
  Optimizer optimizer_;
  RecurrentEncoder* recurrent_ = nullptr;
  bool frozen_ = false;
  mutable std::map<int, Vector> cache_;
  mutable Vector scratch_;
};

struct RoundResult {
  int choice = 0;
  double reward = 0;
};

/// One interaction: ε-greedy choice, 0/1 reward, and (if `learn`) one update
/// on the chosen candidate.
inline RoundResult bandit_round(BanditAgent& agent, const BanditTask& task, Rng& rng, bool learn = true) {
  RoundResult r;
  r.choice = rng.bernoulli(agent.epsilon()) ? static_cast<int>(rng.below(2)) : agent.greedy_choice(task);
  r.reward = r.choice == task.conferring ? 1.0 : 0.0;
  if (learn) agent.learn(task.goal, r.choice == 0 ? task.candidate_a : task.candidate_b, r.reward);
  return r;
}

/// Greedy accuracy over `tasks`. Parameters are left untouched.
inline double evaluate_block(BanditAgent& agent, const std::vector<BanditTask>& tasks) {
  if (tasks.empty()) return 0.0;
  agent.freeze();
  double hits = 0;
  for (const auto& t : tasks) hits += agent.greedy_choice(t) == t.conferring ? 1.0 : 0.0;
  agent.unfreeze();
  return hits / static_cast<double>(tasks.size());
}

struct BanditRunConfig {
  long iterations = 20000;
  long window = 500;
  long eval_tasks = 200;
  double split_ratio = 0.8;
  BanditAgentConfig agent;
  RecurrentEncoderConfig recurrent;
};

struct CurvePoint {
  long window_start = 0;
  double train = 0;  // greedy accuracy on fresh train-split tasks
  double eval = 0;   // greedy accuracy on eval-split tasks
  double online = 0;  // mean reward of the ε-greedy learning rounds
};

struct LearningCurve {
  EncodingKind method = EncodingKind::GroundTruth;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> points;
};

/// Optional observer for every task the run touches: (split, task, learned).
using TaskLog = std::function<void(bool eval_split, const BanditTask&, bool learned)>;

inline LearningCurve run_bandit(EncodingKind method, const Bestiary& bestiary, const Corpus& corpus,
                                const BanditRunConfig& config, std::uint64_t seed,
                                std::shared_ptr<QaClient> client = nullptr, const TaskLog& log = {}) {
  if (config.iterations <= 0 || config.window <= 0 || config.eval_tasks <= 0) throw ConfigError("bandit counts must be positive");
  Rng root(Rng::mix(seed));
  const auto split = split_train_eval(bestiary, config.split_ratio, root.bits());
  const TaskSampler train_sampler(bestiary, split.train_ids);
  const TaskSampler eval_sampler(bestiary, split.eval_ids);
  Rng task_rng = root.fork(1), explore_rng = root.fork(2), probe_rng = root.fork(3);
  const auto init_seed = root.bits();

  BanditAgent agent(make_encoder(method, bestiary, init_seed ^ 0xe7c0, std::move(client), config.recurrent), bestiary,
                    corpus, config.agent, init_seed);
  LearningCurve curve{method, seed, {}};
  double online = 0;
  for (long it = 0; it < config.iterations; ++it) {
    const auto task = train_sampler.sample(task_rng);
    if (log) log(false, task, true);
    online += bandit_round(agent, task, explore_rng).reward;
    if ((it + 1) % config.window == 0 || it + 1 == config.iterations) {
      const long start = it - (it % config.window);
      std::vector<BanditTask> train_block, eval_block;
      for (long k = 0; k < config.eval_tasks; ++k) train_block.push_back(train_sampler.sample(probe_rng));
      for (long k = 0; k < config.eval_tasks; ++k) eval_block.push_back(eval_sampler.sample(probe_rng));
      if (log) {
        for (const auto& t : train_block) log(false, t, false);
        for (const auto& t : eval_block) log(true, t, false);
      }
      CurvePoint p;
      p.window_start = start;
      p.train = evaluate_block(agent, train_block);
      p.eval = evaluate_block(agent, eval_block);
      p.online = online / static_cast<double>(it + 1 - start);
      curve.points.push_back(p);
      online = 0;
    }
  }
  return curve;
}

}  // namespace qf
