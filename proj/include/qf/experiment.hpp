#pragma once

// Experiment configuration, orchestration and aggregation behind the `qf`
// command line: corpus generation, extraction scoring, the bandit study and
// the grid-level agents. Every artifact is a pure function of (config, seed).

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qf/agents.hpp"
#include "qf/bandit.hpp"
#include "qf/bestiary.hpp"
#include "qf/extraction.hpp"
#include "qf/qa.hpp"

namespace qf {

inline constexpr std::string_view kVersion = "0.1.0";

namespace fs = std::filesystem;

enum class ExperimentKind { GenCorpus, EvalExtraction, RunBandit, RunGridworld, Aggregate };

inline std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::GenCorpus: return "gen-corpus";
    case ExperimentKind::EvalExtraction: return "eval-extraction";
    case ExperimentKind::RunBandit: return "run-bandit";
    case ExperimentKind::RunGridworld: return "run-gridworld";
    case ExperimentKind::Aggregate: return "aggregate";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::GenCorpus, ExperimentKind::EvalExtraction, ExperimentKind::RunBandit,
                 ExperimentKind::RunGridworld, ExperimentKind::Aggregate}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

struct DataConfig {
  std::uint64_t bestiary_seed = 7;
  std::uint64_t corpus_seed = 11;
  std::uint64_t label_seed = 98;
  std::size_t labeled_pages = 98;
  std::optional<fs::path> corpus_dir;  // previously generated corpus; generated in memory when unset
  BestiaryConfig bestiary;
  StyleConfig style;
};

struct QaConfig {
  std::string backend = "mock";  // mock | remote
  std::string url;               // QF_QA_URL takes precedence
  RemoteOptions remote;
};

struct ExtractionExperimentConfig {
  std::vector<std::string> extractors{"keyword", "qa"};
};

struct BanditExperimentConfig {
  std::vector<EncodingKind> methods{EncodingKind::StateOneHot, EncodingKind::Recurrent, EncodingKind::FrozenLM,
                                    EncodingKind::QAModel, EncodingKind::GroundTruth};
  BanditRunConfig run;
};

struct GridworldExperimentConfig {
  std::vector<AgentKind> agents{AgentKind::Baseline, AgentKind::Query, AgentKind::QueryExplore, AgentKind::Oracle};
  std::string extractor = "qa";  // qa | keyword | ground_truth
  bool trace = false;            // one greedy JSON-lines episode per (agent, seed)
  GridConfig env;
  AgentTrainConfig train;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::GenCorpus;
  std::vector<std::uint64_t> seeds;
  fs::path output_dir;
  unsigned workers = 0;  // 0: one per hardware thread
  DataConfig data;
  QaConfig qa;
  ExtractionExperimentConfig extraction;
  BanditExperimentConfig bandit;
  GridworldExperimentConfig gridworld;
  std::vector<fs::path> runs;  // aggregate inputs
};

// ---- number formatting ----

/// Shortest round-trip decimal form; identical bits give identical text.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct SummaryStats {
  double mean = 0;
  double std = 0;  // sample standard deviation; 0.0 for a single value
  std::size_t n = 0;
};

inline SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  s.n = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

inline nlohmann::ordered_json to_json(const SummaryStats& s, const std::vector<double>& values) {
  return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}, {"values", values}};
}

// ---- config parsing ----

namespace detail {

/// Reads fields out of one JSON object, recording every problem instead of
/// stopping at the first, and flags keys nobody asked for.
class FieldReader {
 public:
  FieldReader(const nlohmann::json* obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (obj_ != nullptr && !obj_->is_object()) {
      errors_.push_back(where("") + ": expected an object");
      obj_ = nullptr;
    }
  }

  ~FieldReader() {
    if (obj_ == nullptr) return;
    for (const auto& [key, value] : obj_->items()) {
      if (seen_.count(key) == 0) errors_.push_back(where(key) + ": unknown field");
    }
  }

  FieldReader(const FieldReader&) = delete;
  FieldReader& operator=(const FieldReader&) = delete;

  bool has(const std::string& key) const { return obj_ != nullptr && obj_->contains(key); }

  FieldReader child(const std::string& key) {
    seen_.insert(key);
    return FieldReader(has(key) ? &(*obj_)[key] : nullptr, where(key), errors_);
  }

  const nlohmann::json* raw(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &(*obj_)[key] : nullptr;
  }

  template <class T, class Check = bool (*)(const T&)>
  void read(const std::string& key, T& out, Check ok = nullptr, const char* rule = "") {
    const auto* j = raw(key);
    if (j == nullptr) return;
    T value{};
    if (!convert(*j, value)) {
      errors_.push_back(where(key) + ": expected " + type_name<T>());
      return;
    }
    if constexpr (!std::is_same_v<Check, std::nullptr_t>) {
      if (ok != nullptr && !ok(value)) {
        errors_.push_back(where(key) + ": " + rule);
        return;
      }
    }
    out = value;
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return prefix_.empty() ? "<root>" : prefix_;
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  void error(const std::string& key, const std::string& msg) { errors_.push_back(where(key) + ": " + msg); }

 private:
  template <class T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_unsigned_v<T>) return "a non-negative integer";
    else return "an integer";
  }

  template <class T>
  static bool convert(const nlohmann::json& j, T& out) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) return false;
      out = j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) return false;
      out = j.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) return false;
      out = j.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (j.is_number_unsigned()) {
        out = static_cast<T>(j.get<std::uint64_t>());
      } else if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
        out = static_cast<T>(j.get<std::int64_t>());
      } else {
        return false;
      }
    } else {
      if (!j.is_number_integer()) return false;
      out = static_cast<T>(j.get<std::int64_t>());
    }
    return true;
  }

  const nlohmann::json* obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

template <class T>
bool positive(const T& v) {
  return v > 0;
}
inline bool probability(const double& v) { return v >= 0.0 && v <= 1.0; }
inline bool non_negative(const double& v) { return v >= 0.0; }

template <class T, class Parse>
void read_name_list(FieldReader& r, const std::string& key, std::vector<T>& out, Parse parse) {
  const auto* j = r.raw(key);
  if (j == nullptr) return;
  if (!j->is_array() || j->empty()) {
    r.error(key, "expected a non-empty array of names");
    return;
  }
  std::vector<T> values;
  std::set<std::string> names;
  for (const auto& item : *j) {
    if (!item.is_string()) {
      r.error(key, "expected a non-empty array of names");
      return;
    }
    const auto name = item.get<std::string>();
    if (!names.insert(name).second) {
      r.error(key, "duplicate entry '" + name + "'");
      return;
    }
    try {
      values.push_back(parse(name));
    } catch (const ConfigError& e) {
      r.error(key, e.what());
      return;
    }
  }
  out = std::move(values);
}

}  // namespace detail

/// Builds a validated config. Throws ConfigError listing every violated field.
/// `kind` comes from the command line; a config that names a different
/// experiment is rejected.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, ExperimentKind kind) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  c.kind = kind;
  {
    detail::FieldReader root(&j, "", errors);
    std::string named;
    root.read("experiment", named);
    if (!named.empty() && named != to_string(kind)) {
      root.error("experiment", "config is for '" + named + "' but '" + std::string(to_string(kind)) + "' was requested");
    }

    if (const auto* seeds = root.raw("seeds")) {
      std::set<std::uint64_t> distinct;
      bool ok = seeds->is_array() && !seeds->empty();
      if (ok) {
        for (const auto& s : *seeds) {
          if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
            ok = false;
            break;
          }
          const auto v = s.get<std::uint64_t>();
          if (!distinct.insert(v).second) {
            root.error("seeds", "duplicate seed " + std::to_string(v));
          }
          c.seeds.push_back(v);
        }
      }
      if (!ok) root.error("seeds", "expected a non-empty array of non-negative integers");
    } else if (kind == ExperimentKind::RunBandit || kind == ExperimentKind::RunGridworld) {
      root.error("seeds", "required");
    }

    std::string out;
    root.read("output_dir", out);
    c.output_dir = out;
    root.read("workers", c.workers);

    {
      auto d = root.child("data");
      d.read("bestiary_seed", c.data.bestiary_seed);
      d.read("corpus_seed", c.data.corpus_seed);
      d.read("label_seed", c.data.label_seed);
      d.read("labeled_pages", c.data.labeled_pages, detail::positive<std::size_t>, "must be positive");
      std::string dir;
      d.read("corpus_dir", dir);
      if (!dir.empty()) {
        c.data.corpus_dir = dir;
        if (!fs::is_regular_file(fs::path(dir) / "bestiary.json") || !fs::is_directory(fs::path(dir) / "corpus")) {
          d.error("corpus_dir", "'" + dir + "' does not contain bestiary.json and corpus/");
        }
      }
      auto b = d.child("bestiary");
      b.read("count", c.data.bestiary.count, +[](const int& v) { return v >= 10; }, "must be at least 10");
      b.read("resistance_probability", c.data.bestiary.resistance_probability, detail::probability, "must lie in [0, 1]");
      b.read("min_attacks", c.data.bestiary.min_attacks, +[](const int& v) { return v >= 0; }, "must be non-negative");
      b.read("max_attacks", c.data.bestiary.max_attacks, +[](const int& v) { return v >= 0; }, "must be non-negative");
      if (c.data.bestiary.max_attacks < c.data.bestiary.min_attacks) b.error("max_attacks", "must not be below min_attacks");
      b.read("goal_coverage", c.data.bestiary.goal_coverage, +[](const double& v) { return v >= 0.0 && v <= 0.5; },
             "must lie in [0, 0.5]");
      b.read("max_resamples", c.data.bestiary.max_resamples, detail::positive<int>, "must be positive");
      auto s = d.child("style");
      s.read("distractor_rate", c.data.style.distractor_rate, detail::non_negative, "must be non-negative");
      s.read("filler_sentences", c.data.style.filler_sentences, +[](const int& v) { return v >= 0; },
             "must be non-negative");
    }

    {
      auto q = root.child("qa");
      q.read("backend", c.qa.backend, +[](const std::string& v) { return v == "mock" || v == "remote"; },
             "must be 'mock' or 'remote'");
      q.read("url", c.qa.url);
      q.read("retries", c.qa.remote.retries, +[](const int& v) { return v >= 0; }, "must be non-negative");
      q.read("timeout_seconds", c.qa.remote.timeout_seconds, detail::positive<int>, "must be positive");
    }

    {
      auto e = root.child("extraction");
      detail::read_name_list(e, "extractors", c.extraction.extractors, [](const std::string& n) {
        if (n != "keyword" && n != "qa" && n != "ground_truth") {
          throw ConfigError("unknown extractor '" + n + "' (expected keyword | qa | ground_truth)");
        }
        return n;
      });
    }

    {
      auto b = root.child("bandit");
      detail::read_name_list(b, "methods", c.bandit.methods, [](const std::string& n) { return parse_encoding(n); });
      auto& r = c.bandit.run;
      b.read("iterations", r.iterations, detail::positive<long>, "must be positive");
      b.read("window", r.window, detail::positive<long>, "must be positive");
      b.read("eval_tasks", r.eval_tasks, detail::positive<long>, "must be positive");
      b.read("split_ratio", r.split_ratio, +[](const double& v) { return v > 0.0 && v < 1.0; },
             "must lie strictly between 0 and 1");
      b.read("hidden", r.agent.hidden, detail::positive<std::size_t>, "must be positive");
      b.read("learning_rate", r.agent.learning_rate, detail::positive<double>, "must be positive");
      b.read("goal_scale", r.agent.goal_scale, detail::positive<double>, "must be positive");
      b.read("epsilon", r.agent.epsilon, detail::probability, "must lie in [0, 1]");
      std::string opt = r.agent.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
      b.read("optimizer", opt, +[](const std::string& v) { return v == "adam" || v == "sgd"; }, "must be 'adam' or 'sgd'");
      r.agent.optimizer = opt == "sgd" ? OptimizerKind::SGD : OptimizerKind::Adam;
      auto rc = b.child("recurrent");
      rc.read("buckets", r.recurrent.buckets, detail::positive<std::size_t>, "must be positive");
      rc.read("embedding_dim", r.recurrent.embedding_dim, detail::positive<std::size_t>, "must be positive");
      rc.read("hidden_dim", r.recurrent.hidden_dim, detail::positive<std::size_t>, "must be positive");
      rc.read("max_tokens", r.recurrent.max_tokens, detail::positive<std::size_t>, "must be positive");
    }

    {
      auto g = root.child("gridworld");
      auto& gw = c.gridworld;
      detail::read_name_list(g, "agents", gw.agents, [](const std::string& n) { return parse_agent_kind(n); });
      g.read("extractor", gw.extractor,
             +[](const std::string& v) { return v == "qa" || v == "keyword" || v == "ground_truth"; },
             "must be 'qa', 'keyword' or 'ground_truth'");
      g.read("trace", gw.trace);
      g.read("steps", gw.train.steps, detail::positive<long>, "must be positive");
      g.read("eval_every", gw.train.eval_every, detail::positive<long>, "must be positive");
      g.read("eval_episodes", gw.train.eval_episodes, detail::positive<long>, "must be positive");

      auto env = g.child("env");
      auto& e = gw.env;
      env.read("width", e.width);
      env.read("height", e.height);
      env.read("monsters_per_type", e.monsters_per_type);
      env.read("agent_hp", e.agent_hp);
      env.read("monster_hp", e.monster_hp);
      env.read("contact_damage", e.contact_damage);
      env.read("weapon1", e.weapon1);
      env.read("weapon2", e.weapon2);
      env.read("effective_damage", e.effective_damage);
      env.read("resisted_damage", e.resisted_damage);
      env.read("step_penalty", e.step_penalty);
      env.read("kill_reward", e.kill_reward);
      env.read("horizon", e.horizon);
      env.read("respawn", e.respawn);
      env.read("relocate_on_resist", e.relocate_on_resist);
      try {
        e.validate();
      } catch (const ConfigError& err) {
        env.error("", err.what());
      }

      auto a = g.child("agent");
      auto& ac = gw.train.agent;
      a.read("hidden", ac.hidden, detail::positive<std::size_t>, "must be positive");
      a.read("gamma", ac.gamma, +[](const double& v) { return v >= 0.0 && v < 1.0; }, "must lie in [0, 1)");
      a.read("learning_rate", ac.learning_rate, detail::positive<double>, "must be positive");
      a.read("final_learning_rate", ac.final_learning_rate, detail::positive<double>, "must be positive");
      a.read("epsilon_start", ac.epsilon.start, detail::probability, "must lie in [0, 1]");
      a.read("epsilon_end", ac.epsilon.end, detail::probability, "must lie in [0, 1]");
      a.read("epsilon_fraction", ac.epsilon.fraction, detail::probability, "must lie in [0, 1]");

      auto s = g.child("schedule");
      s.read("p0", gw.train.schedule.p0, detail::probability, "must lie in [0, 1]");
      s.read("decay_steps", gw.train.schedule.decay_steps, +[](const long& v) { return v >= 0; }, "must be non-negative");
    }

    if (const auto* runs = root.raw("runs")) {
      if (!runs->is_array()) {
        root.error("runs", "expected an array of run directories");
      } else {
        for (const auto& r : *runs) {
          if (!r.is_string()) {
            root.error("runs", "expected an array of run directories");
            break;
          }
          fs::path p = r.get<std::string>();
          if (!fs::is_directory(p)) root.error("runs", "'" + p.string() + "' is not a directory");
          c.runs.push_back(p);
        }
      }
    }
    if (kind == ExperimentKind::Aggregate && c.runs.empty()) root.error("runs", "aggregate needs at least one run directory");
  }
  if (c.qa.backend == "remote") {
    if (const char* env = std::getenv("QF_QA_URL"); env != nullptr && *env != '\0') c.qa.url = env;
    if (c.qa.url.empty()) {
      errors.push_back("qa.url: remote backend needs a URL (config or QF_QA_URL)");
    } else {
      try {
        parse_endpoint(c.qa.url);
      } catch (const Error& e) {
        errors.push_back(std::string("qa.url: ") + e.what());
      }
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config (" + std::to_string(errors.size()) + " problem" + (errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

inline ExperimentConfig load_experiment_config(const fs::path& path, ExperimentKind kind) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  const auto text = read_file(path);
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
  return parse_experiment_config(j, kind);
}

/// Canonical echo of every setting that can influence results. Output paths
/// and worker counts are left out so they do not change the config hash.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["experiment"] = to_string(c.kind);
  j["seeds"] = c.seeds;
  const auto& d = c.data;
  j["data"] = {{"bestiary_seed", d.bestiary_seed},
               {"corpus_seed", d.corpus_seed},
               {"label_seed", d.label_seed},
               {"labeled_pages", d.labeled_pages},
               {"corpus_dir", d.corpus_dir ? d.corpus_dir->string() : ""},
               {"bestiary",
                {{"count", d.bestiary.count},
                 {"resistance_probability", d.bestiary.resistance_probability},
                 {"min_attacks", d.bestiary.min_attacks},
                 {"max_attacks", d.bestiary.max_attacks},
                 {"goal_coverage", d.bestiary.goal_coverage},
                 {"max_resamples", d.bestiary.max_resamples}}},
               {"style", {{"distractor_rate", d.style.distractor_rate}, {"filler_sentences", d.style.filler_sentences}}}};
  j["qa"] = {{"backend", c.qa.backend}};
  j["extraction"] = {{"extractors", c.extraction.extractors}};
  const auto& r = c.bandit.run;
  std::vector<std::string> methods;
  for (auto m : c.bandit.methods) methods.emplace_back(to_string(m));
  j["bandit"] = {{"methods", methods},
                 {"iterations", r.iterations},
                 {"window", r.window},
                 {"eval_tasks", r.eval_tasks},
                 {"split_ratio", r.split_ratio},
                 {"hidden", r.agent.hidden},
                 {"learning_rate", r.agent.learning_rate},
                 {"goal_scale", r.agent.goal_scale},
                 {"epsilon", r.agent.epsilon},
                 {"optimizer", r.agent.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
                 {"recurrent",
                  {{"buckets", r.recurrent.buckets},
                   {"embedding_dim", r.recurrent.embedding_dim},
                   {"hidden_dim", r.recurrent.hidden_dim},
                   {"max_tokens", r.recurrent.max_tokens}}}};
  const auto& g = c.gridworld;
  std::vector<std::string> agents;
  for (auto a : g.agents) agents.emplace_back(to_string(a));
  const auto& e = g.env;
  const auto& ac = g.train.agent;
  j["gridworld"] = {{"agents", agents},
                    {"extractor", g.extractor},
                    {"trace", g.trace},
                    {"steps", g.train.steps},
                    {"eval_every", g.train.eval_every},
                    {"eval_episodes", g.train.eval_episodes},
                    {"env",
                     {{"width", e.width},
                      {"height", e.height},
                      {"monsters_per_type", e.monsters_per_type},
                      {"agent_hp", e.agent_hp},
                      {"monster_hp", e.monster_hp},
                      {"contact_damage", e.contact_damage},
                      {"weapon1", e.weapon1},
                      {"weapon2", e.weapon2},
                      {"effective_damage", e.effective_damage},
                      {"resisted_damage", e.resisted_damage},
                      {"step_penalty", e.step_penalty},
                      {"kill_reward", e.kill_reward},
                      {"horizon", e.horizon},
                      {"respawn", e.respawn},
                      {"relocate_on_resist", e.relocate_on_resist}}},
                    {"agent",
                     {{"hidden", ac.hidden},
                      {"gamma", ac.gamma},
                      {"learning_rate", ac.learning_rate},
                      {"final_learning_rate", ac.final_learning_rate},
                      {"epsilon_start", ac.epsilon.start},
                      {"epsilon_end", ac.epsilon.end},
                      {"epsilon_fraction", ac.epsilon.fraction}}},
                    {"schedule", {{"p0", g.train.schedule.p0}, {"decay_steps", g.train.schedule.decay_steps}}}};
  std::vector<std::string> runs;
  for (const auto& p : c.runs) runs.push_back(p.string());
  j["runs"] = runs;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

// ---- data ----

struct Dataset {
  Bestiary bestiary;
  Corpus corpus;
  std::vector<int> labeled_ids;
};

inline nlohmann::ordered_json labels_json(const Bestiary& b, const std::vector<int>& ids) {
  auto arr = nlohmann::ordered_json::array();
  for (int id : ids) arr.push_back(to_json(b.at(id)));
  return arr;
}

inline Dataset load_dataset(const DataConfig& d) {
  Dataset ds;
  if (d.corpus_dir) {
    ds.bestiary = load_bestiary(*d.corpus_dir / "bestiary.json");
    ds.corpus = load_corpus(ds.bestiary, *d.corpus_dir / "corpus");
    const auto labels = *d.corpus_dir / "labels.json";
    if (fs::is_regular_file(labels)) {
      auto j = nlohmann::json::parse(read_file(labels), nullptr, false);
      if (j.is_discarded() || !j.is_array()) throw ConfigError("malformed labels file: " + labels.string());
      for (const auto& item : j) ds.labeled_ids.push_back(monster_from_json(item).id);
      std::sort(ds.labeled_ids.begin(), ds.labeled_ids.end());
      return ds;
    }
  } else {
    ds.bestiary = generate_bestiary(d.bestiary_seed, d.bestiary);
    ds.corpus = generate_corpus(ds.bestiary, d.style, d.corpus_seed);
  }
  ds.labeled_ids = sample_labeled_subset(ds.bestiary, d.labeled_pages, d.label_seed);
  return ds;
}

inline std::shared_ptr<QaClient> make_qa_client(const QaConfig& qa) {
  if (qa.backend == "remote") return std::make_shared<RemoteQaClient>(qa.url, qa.remote);
  return std::make_shared<MockQaClient>();
}

inline ResistanceExtractor make_resistance_extractor(const std::string& name, const Bestiary& bestiary,
                                                     std::shared_ptr<QaClient> client) {
  if (name == "keyword") {
    return [](const Document& doc) { return keyword_extract(doc, resistance_vocabulary()); };
  }
  if (name == "ground_truth") {
    return [&bestiary](const Document& doc) { return bestiary.at(doc.monster_id).resistances; };
  }
  if (!client) throw ConfigError("qa extractor needs a QA client");
  return [client](const Document& doc) { return qa_extract(doc, resistance_vocabulary(), *client, QaTask::Resistance); };
}

// ---- manifest ----

struct SeedOutcome {
  std::string job;  // e.g. "qa/seed=3"
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double seconds = 0;
};

struct RunManifest {
  std::string experiment;
  std::string config_hash;
  std::string code_version{kVersion};
  nlohmann::ordered_json config;
  std::vector<std::string> outputs;  // relative to the output directory
  std::vector<SeedOutcome> jobs;
  double seconds = 0;

  bool ok() const {
    return std::all_of(jobs.begin(), jobs.end(), [](const SeedOutcome& j) { return j.ok; });
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["experiment"] = experiment;
    j["status"] = ok() ? "ok" : "failed";
    j["config_hash"] = config_hash;
    j["code_version"] = code_version;
    j["config"] = config;
    j["outputs"] = outputs;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& o : jobs) {
      nlohmann::ordered_json e{{"job", o.job}, {"seed", o.seed}, {"status", o.ok ? "ok" : "failed"}};
      if (!o.ok) e["error"] = o.error;
      e["seconds"] = o.seconds;
      arr.push_back(e);
    }
    j["jobs"] = arr;
    j["seconds"] = seconds;
    return j;
  }
};

inline constexpr std::string_view kManifestFile = "run_manifest.json";

struct RunResult {
  int exit_code = 0;  // 0 ok, 3 when any job failed
  RunManifest manifest;
};

namespace detail {

/// Runs jobs on up to `workers` threads; job i writes only to slot i, so the
/// merged order never depends on scheduling.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Wraps a job so failures are recorded rather than thrown.
template <class Fn>
SeedOutcome guarded(std::string name, std::uint64_t seed, Fn&& fn, std::ostream* log) {
  SeedOutcome o{std::move(name), seed, true, {}, 0};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    fn();
  } catch (const std::exception& e) {
    o.ok = false;
    o.error = e.what();
  }
  o.seconds = seconds_since(t0);
  if (log != nullptr) {
    static std::mutex m;
    std::lock_guard lock(m);
    *log << "  " << o.job << (o.ok ? " ok" : " FAILED: " + o.error) << "\n";
  }
  return o;
}

}  // namespace detail

// ---- experiments ----

struct ExtractionTaskResult {
  std::string extractor;
  std::string task;  // resistance | attack
  MetricsReport metrics;
  std::vector<PredictionCounts> pages;  // aligned with the labeled ids
};

inline std::vector<ExtractionTaskResult> evaluate_extractors(const Dataset& ds, const std::vector<std::string>& extractors,
                                                             QaClient* client) {
  std::vector<ExtractionTaskResult> out;
  for (const auto& name : extractors) {
    for (auto kind : {VocabKind::Resistance, VocabKind::AttackType}) {
      ExtractionTaskResult r{name, kind == VocabKind::Resistance ? "resistance" : "attack", {}, {}};
      const auto& vocab = vocabulary(kind);
      for (int id : ds.labeled_ids) {
        const auto& doc = ds.corpus.at(id);
        const auto& monster = ds.bestiary.at(id);
        AttributeSet predicted(kind);
        if (name == "keyword") {
          predicted = keyword_extract(doc, vocab);
        } else if (name == "ground_truth") {
          predicted = ground_truth_extract(monster, kind);
        } else {
          if (client == nullptr) throw ConfigError("qa extractor needs a QA client");
          predicted = qa_extract(doc, vocab, *client, task_for(kind));
        }
        r.pages.push_back(score_prediction(predicted, monster.attributes(kind)));
      }
      r.metrics = aggregate_metrics(r.pages);
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const MetricsReport& m) {
  return {{"recall", m.recall}, {"precision", m.precision}, {"f1", m.f1}, {"iou", m.iou}, {"pages", m.pages}};
}

class ExperimentRunner {
 public:
  /// `client` overrides the configured QA backend (tests inject servers).
  explicit ExperimentRunner(ExperimentConfig config, std::shared_ptr<QaClient> client = nullptr,
                            std::ostream* log = nullptr)
      : config_(std::move(config)), client_(std::move(client)), log_(log) {
    if (config_.output_dir.empty()) throw ConfigError("output_dir: required (config or --out)");
  }

  RunResult run() {
    const auto t0 = std::chrono::steady_clock::now();
    manifest_ = RunManifest{};
    manifest_.experiment = std::string(to_string(config_.kind));
    manifest_.config_hash = config_hash(config_);
    manifest_.config = to_json(config_);
    fs::create_directories(config_.output_dir);
    if (log_ != nullptr) *log_ << "[" << manifest_.experiment << "] writing to " << config_.output_dir.string() << "\n";
    switch (config_.kind) {
      case ExperimentKind::GenCorpus: gen_corpus(); break;
      case ExperimentKind::EvalExtraction: eval_extraction(); break;
      case ExperimentKind::RunBandit: run_bandit_experiment(); break;
      case ExperimentKind::RunGridworld: run_gridworld_experiment(); break;
      case ExperimentKind::Aggregate: aggregate(); break;
    }
    manifest_.seconds = detail::seconds_since(t0);
    write_file(config_.output_dir / kManifestFile, manifest_.to_json().dump(2) + "\n");
    return RunResult{manifest_.ok() ? 0 : 3, manifest_};
  }

 private:
  QaClient* client() {
    if (!client_) client_ = make_qa_client(config_.qa);
    return client_.get();
  }

  void emit(const std::string& relative, std::string_view content) {
    write_file(config_.output_dir / relative, content);
    manifest_.outputs.push_back(relative);
  }

  void gen_corpus() {
    std::optional<Dataset> ds;
    manifest_.jobs.push_back(detail::guarded("corpus", config_.data.corpus_seed, [&] { ds = load_dataset(config_.data); }, log_));
    if (!ds) return;
    emit("bestiary.json", to_json(ds->bestiary).dump(2) + "\n");
    write_corpus(ds->corpus, config_.output_dir / "corpus");
    manifest_.outputs.push_back("corpus/");
    emit("labels.json", labels_json(ds->bestiary, ds->labeled_ids).dump(2) + "\n");
  }

  void eval_extraction() {
    std::optional<Dataset> ds;
    std::vector<ExtractionTaskResult> results;
    std::string model;
    const bool wants_qa = std::count(config_.extraction.extractors.begin(), config_.extraction.extractors.end(), "qa") > 0;
    manifest_.jobs.push_back(detail::guarded("extraction", config_.data.label_seed, [&] {
      ds = load_dataset(config_.data);
      QaClient* c = wants_qa ? client() : nullptr;
      if (c != nullptr) model = c->model_id();
      results = evaluate_extractors(*ds, config_.extraction.extractors, c);
    }, log_));
    if (results.empty()) return;

    nlohmann::ordered_json report;
    report["pages"] = ds->labeled_ids.size();
    if (!model.empty()) report["qa_model"] = model;
    nlohmann::ordered_json per;
    for (const auto& r : results) per[r.extractor][r.task] = to_json(r.metrics);
    report["extractors"] = per;
    emit("extraction_report.json", report.dump(2) + "\n");

    std::ostringstream csv;
    csv << "monster_id,extractor,task,tp,fp,fn\n";
    for (const auto& r : results) {
      for (std::size_t i = 0; i < r.pages.size(); ++i) {
        const auto& p = r.pages[i];
        csv << ds->labeled_ids[i] << ',' << r.extractor << ',' << r.task << ',' << p.tp << ',' << p.fp << ',' << p.fn << '\n';
      }
    }
    emit("extraction_pages.csv", csv.str());
  }

  void run_bandit_experiment() {
    const auto ds = load_dataset(config_.data);
    const auto& methods = config_.bandit.methods;
    const bool wants_qa = std::count(methods.begin(), methods.end(), EncodingKind::QAModel) > 0;
    std::shared_ptr<QaClient> shared;
    if (wants_qa) {
      client();
      shared = client_;
    }
    const auto& seeds = config_.seeds;
    const std::size_t n = methods.size() * seeds.size();
    std::vector<std::optional<LearningCurve>> curves(n);
    std::vector<SeedOutcome> outcomes(n);
    detail::parallel_for(n, config_.workers, [&](std::size_t i) {
      const auto method = methods[i / seeds.size()];
      const auto seed = seeds[i % seeds.size()];
      outcomes[i] = detail::guarded(std::string(to_string(method)) + "/seed=" + std::to_string(seed), seed, [&] {
        curves[i] = run_bandit(method, ds.bestiary, ds.corpus, config_.bandit.run, seed,
                               method == EncodingKind::QAModel ? shared : nullptr);
      }, log_);
    });
    manifest_.jobs = outcomes;

    std::ostringstream csv;
    csv << "method,seed,window_start,split,mean_reward\n";
    for (const auto& c : curves) {
      if (!c) continue;
      for (const auto& p : c->points) {
        csv << to_string(c->method) << ',' << c->seed << ',' << p.window_start << ",train," << format_double(p.train) << '\n';
        csv << to_string(c->method) << ',' << c->seed << ',' << p.window_start << ",eval," << format_double(p.eval) << '\n';
      }
    }
    emit("bandit_curve.csv", csv.str());

    nlohmann::ordered_json summary;
    summary["iterations"] = config_.bandit.run.iterations;
    summary["window"] = config_.bandit.run.window;
    nlohmann::ordered_json per;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::vector<double> train, eval;
      std::vector<std::uint64_t> used;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& c = curves[m * seeds.size() + s];
        if (!c || c->points.empty()) continue;
        train.push_back(c->points.back().train);
        eval.push_back(c->points.back().eval);
        used.push_back(seeds[s]);
      }
      per[std::string(to_string(methods[m]))] = {{"seeds", used},
                                                 {"train", to_json(summarize(train), train)},
                                                 {"eval", to_json(summarize(eval), eval)}};
    }
    summary["final_window"] = per;
    emit("bandit_summary.json", summary.dump(2) + "\n");
  }

  void run_gridworld_experiment() {
    const auto ds = load_dataset(config_.data);
    const auto& g = config_.gridworld;
    std::shared_ptr<QaClient> shared;
    if (g.extractor == "qa") {
      client();
      shared = client_;
    }
    const auto extractor = make_resistance_extractor(g.extractor, ds.bestiary, shared);
    const auto& seeds = config_.seeds;
    const std::size_t n = g.agents.size() * seeds.size();
    std::vector<std::optional<AgentRun>> runs(n);
    std::vector<std::string> traces(n);
    std::vector<SeedOutcome> outcomes(n);
    detail::parallel_for(n, config_.workers, [&](std::size_t i) {
      const auto kind = g.agents[i / seeds.size()];
      const auto seed = seeds[i % seeds.size()];
      outcomes[i] = detail::guarded(std::string(to_string(kind)) + "/seed=" + std::to_string(seed), seed, [&] {
        QAgent trained(kActionCount, g.train.agent, 0);  // overwritten by train_agent
        runs[i] = train_agent(kind, g.env, ds.bestiary, ds.corpus, extractor, g.train, seed, &trained);
        if (g.trace) {
          GridWorld env(g.env, ds.bestiary, ds.corpus, extractor, knowledge_mode(kind));
          traces[i] = trace_episode(trained, env, Rng::mix(seed ^ 0x7ace));
        }
      }, log_);
    });
    manifest_.jobs = outcomes;

    std::ostringstream csv;
    csv << "agent_kind,seed,eval_step,mean_reward,weapon_choice,query_relevance,queries_per_episode\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : runs) {
      if (!r) continue;
      for (const auto& rep : r->reports) {
        csv << to_string(r->kind) << ',' << r->seed << ',' << rep.eval_step << ',' << format_double(rep.mean_reward) << ','
            << opt(rep.weapon_choice) << ',' << opt(rep.query_relevance) << ',' << format_double(rep.queries_per_episode)
            << '\n';
      }
    }
    emit("agents_report.csv", csv.str());

    nlohmann::ordered_json summary;
    summary["steps"] = g.train.steps;
    summary["eval_every"] = g.train.eval_every;
    nlohmann::ordered_json per;
    for (std::size_t a = 0; a < g.agents.size(); ++a) {
      std::vector<double> reward, wc, qr, qpe;
      std::vector<std::uint64_t> used;
      auto s80 = nlohmann::ordered_json::array();
      std::vector<long> forced;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& r = runs[a * seeds.size() + s];
        if (!r || r->reports.empty()) continue;
        const auto& last = r->reports.back();
        used.push_back(seeds[s]);
        reward.push_back(last.mean_reward);
        if (last.weapon_choice) wc.push_back(*last.weapon_choice);
        if (last.query_relevance) qr.push_back(*last.query_relevance);
        qpe.push_back(last.queries_per_episode);
        const auto steps = steps_to_weapon_choice(*r);
        s80.push_back(steps ? nlohmann::ordered_json(*steps) : nlohmann::ordered_json());
        forced.push_back(r->forced_queries);
      }
      per[std::string(to_string(g.agents[a]))] = {{"seeds", used},
                                                  {"mean_reward", to_json(summarize(reward), reward)},
                                                  {"weapon_choice", to_json(summarize(wc), wc)},
                                                  {"query_relevance", to_json(summarize(qr), qr)},
                                                  {"queries_per_episode", to_json(summarize(qpe), qpe)},
                                                  {"steps_to_weapon_choice_0.8", s80},
                                                  {"forced_queries", forced}};
    }
    summary["final_evaluation"] = per;
    emit("agents_summary.json", summary.dump(2) + "\n");

    if (g.trace) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!runs[i]) continue;
        emit("traces/" + std::string(to_string(g.agents[i / seeds.size()])) + "_seed" +
                 std::to_string(seeds[i % seeds.size()]) + ".jsonl",
             traces[i]);
      }
    }
  }

  void aggregate();

  static std::string trace_episode(const QAgent& agent, GridWorld& env, std::uint64_t seed) {
    std::ostringstream out;
    auto obs = env.reset(seed);
    for (long t = 0;; ++t) {
      const auto action = agent.greedy(obs);
      const auto r = env.step(static_cast<Action>(action));
      nlohmann::ordered_json rec{{"t", t},
                                 {"action", action},
                                 {"reward", r.reward},
                                 {"kills", env.state().kills},
                                 {"queries", env.state().queries},
                                 {"agent_hp", env.state().agent_hp}};
      out << rec.dump() << '\n';
      if (r.done) break;
      obs = r.observation;
    }
    return out.str();
  }

  ExperimentConfig config_;
  std::shared_ptr<QaClient> client_;
  std::ostream* log_;
  RunManifest manifest_;
};

// ---- aggregation ----

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double parse_number(const std::string& s, const fs::path& file) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("bad number '" + s + "' in " + file.string());
  return v;
}

inline std::string fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// pads to a display width, counting UTF-8 code points
inline std::string pad(std::string s, std::size_t width) {
  const auto shown = static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
  if (shown < width) s.append(width - shown, ' ');
  return s;
}

inline std::string mean_std(const SummaryStats& s) {
  if (s.n == 0) return "-";
  return fixed(s.mean) + " ± " + fixed(s.std);
}

}  // namespace detail

/// Per-metric mean and sample standard deviation over every (run, seed)
/// found in the input directories, plus text tables shaped like the
/// extraction, bandit and agent result tables.
struct AggregateSummary {
  nlohmann::ordered_json json;
  std::string text;
};

inline AggregateSummary aggregate_runs(const std::vector<fs::path>& dirs) {
  using detail::fixed;
  using detail::pad;
  // extractor -> task -> metric -> values
  std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> extraction;
  std::vector<std::string> extractor_order;
  // method -> split -> final values (one per run directory and seed)
  std::map<std::string, std::map<std::string, std::vector<double>>> bandit;
  std::vector<std::string> method_order;
  // agent -> metric -> final values
  std::map<std::string, std::map<std::string, std::vector<double>>> agents;
  std::vector<std::string> agent_order;
  auto remember = [](std::vector<std::string>& order, const std::string& key) {
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
  };
  bool found = false;

  for (const auto& dir : dirs) {
    const auto report = dir / "extraction_report.json";
    if (fs::is_regular_file(report)) {
      found = true;
      auto j = nlohmann::json::parse(read_file(report), nullptr, false);
      if (j.is_discarded() || !j.contains("extractors")) throw Error("malformed " + report.string());
      for (const auto& [name, tasks] : j["extractors"].items()) {
        remember(extractor_order, name);
        for (const auto& [task, m] : tasks.items()) {
          for (const char* key : {"recall", "precision", "f1", "iou"}) {
            extraction[name][task][key].push_back(m.at(key).get<double>());
          }
        }
      }
    }
    const auto curve = dir / "bandit_curve.csv";
    if (fs::is_regular_file(curve)) {
      found = true;
      // last window per (method, seed, split)
      std::map<std::tuple<std::string, std::string, std::string>, std::pair<long, double>> last;
      for (const auto& row : detail::read_csv(curve)) {
        if (row.size() != 5) throw Error("malformed row in " + curve.string());
        remember(method_order, row[0]);
        const long start = static_cast<long>(detail::parse_number(row[2], curve));
        const double value = detail::parse_number(row[4], curve);
        auto key = std::make_tuple(row[0], row[1], row[3]);
        auto it = last.find(key);
        if (it == last.end() || start >= it->second.first) last[key] = {start, value};
      }
      for (const auto& [key, v] : last) bandit[std::get<0>(key)][std::get<2>(key)].push_back(v.second);
    }
    const auto agents_csv = dir / "agents_report.csv";
    if (fs::is_regular_file(agents_csv)) {
      found = true;
      std::map<std::pair<std::string, std::string>, std::pair<long, std::vector<std::string>>> last;
      for (const auto& row : detail::read_csv(agents_csv)) {
        if (row.size() != 7) throw Error("malformed row in " + agents_csv.string());
        remember(agent_order, row[0]);
        const long step = static_cast<long>(detail::parse_number(row[2], agents_csv));
        auto key = std::make_pair(row[0], row[1]);
        auto it = last.find(key);
        if (it == last.end() || step >= it->second.first) last[key] = {step, row};
      }
      for (const auto& [key, v] : last) {
        const auto& row = v.second;
        const char* names[] = {"mean_reward", "weapon_choice", "query_relevance", "queries_per_episode"};
        const int cols[] = {3, 4, 5, 6};
        for (int k = 0; k < 4; ++k) {
          if (!row[cols[k]].empty()) agents[key.first][names[k]].push_back(detail::parse_number(row[cols[k]], agents_csv));
        }
      }
    }
  }
  if (!found) throw ConfigError("runs: no experiment results found in the given directories");

  AggregateSummary out;
  std::ostringstream text;
  if (!extraction.empty()) {
    nlohmann::ordered_json je;
    text << "Extraction (micro-averaged over labeled pages)\n";
    text << pad("extractor", 14) << pad("task", 12) << pad("recall", 16) << pad("precision", 16) << pad("f1", 16) << "iou\n";
    for (const auto& name : extractor_order) {
      for (const char* task : {"resistance", "attack"}) {
        auto it = extraction[name].find(task);
        if (it == extraction[name].end()) continue;
        text << pad(name, 14) << pad(task, 12);
        for (const char* key : {"recall", "precision", "f1", "iou"}) {
          const auto& v = it->second[key];
          const auto s = summarize(v);
          je[name][task][key] = to_json(s, v);
          text << (std::string(key) == "iou" ? detail::mean_std(s) : pad(detail::mean_std(s), 16));
        }
        text << "\n";
      }
    }
    out.json["extraction"] = je;
    text << "\n";
  }
  if (!bandit.empty()) {
    nlohmann::ordered_json jb;
    text << "Bandit (final window accuracy)\n";
    text << pad("method", 14) << pad("train", 16) << "eval\n";
    for (const auto& m : method_order) {
      text << pad(m, 14);
      for (const char* split : {"train", "eval"}) {
        const auto& v = bandit[m][split];
        const auto s = summarize(v);
        jb[m][split] = to_json(s, v);
        text << (std::string(split) == "eval" ? detail::mean_std(s) : pad(detail::mean_std(s), 16));
      }
      text << "\n";
    }
    out.json["bandit"] = jb;
    text << "\n";
  }
  if (!agents.empty()) {
    nlohmann::ordered_json ja;
    text << "Agents (final evaluation)\n";
    text << pad("agent", 16) << pad("reward", 16) << pad("weapon choice", 16) << "query relevance\n";
    for (const auto& a : agent_order) {
      text << pad(a, 16);
      for (const char* key : {"mean_reward", "weapon_choice", "query_relevance", "queries_per_episode"}) {
        const auto& v = agents[a][key];
        const auto s = summarize(v);
        ja[a][key] = to_json(s, v);
        if (std::string(key) == "queries_per_episode") continue;
        text << (std::string(key) == "query_relevance" ? detail::mean_std(s) : pad(detail::mean_std(s), 16));
      }
      text << "\n";
    }
    out.json["agents"] = ja;
  }
  out.text = text.str();
  return out;
}

inline void ExperimentRunner::aggregate() {
  std::optional<AggregateSummary> summary;
  manifest_.jobs.push_back(detail::guarded("aggregate", 0, [&] { summary = aggregate_runs(config_.runs); }, log_));
  if (!summary) return;
  emit("summary.json", summary->json.dump(2) + "\n");
  emit("summary.txt", summary->text);
}

}  // namespace qf
