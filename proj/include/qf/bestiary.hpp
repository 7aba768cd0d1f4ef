#pragma once

// Ground-truth monster roster, synthetic wiki-like pages, and train/eval
// splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qf/attributes.hpp"
#include "qf/error.hpp"
#include "qf/random.hpp"

namespace qf {

struct MonsterRecord {
  int id = 0;
  std::string name;
  AttributeSet resistances{VocabKind::Resistance};
  AttributeSet attacks{VocabKind::AttackType};

  const AttributeSet& attributes(VocabKind kind) const {
    return kind == VocabKind::Resistance ? resistances : attacks;
  }
};

struct Bestiary {
  std::vector<MonsterRecord> monsters;  // monsters[i].id == i for generated rosters
  std::uint64_t seed = 0;

  std::size_t size() const { return monsters.size(); }

  const MonsterRecord& at(int id) const {
    if (id >= 0 && static_cast<std::size_t>(id) < monsters.size() && monsters[id].id == id) return monsters[id];
    for (const auto& m : monsters) {
      if (m.id == id) return m;
    }
    throw ConfigError("unknown monster id " + std::to_string(id));
  }

  const MonsterRecord* find(std::string_view name) const {
    for (const auto& m : monsters) {
      if (m.name == name) return &m;
    }
    return nullptr;
  }

  std::vector<int> ids() const {
    std::vector<int> out;
    out.reserve(monsters.size());
    for (const auto& m : monsters) out.push_back(m.id);
    return out;
  }
};

enum class DocumentSource { Synthetic, IngestedWiki };

struct Document {
  int monster_id = 0;
  std::string title;
  std::string text;
  DocumentSource source = DocumentSource::Synthetic;
};

/// Documents keyed by monster id.
using Corpus = std::map<int, Document>;

struct BestiaryConfig {
  int count = 388;
  double resistance_probability = 0.3;
  int min_attacks = 1;
  int max_attacks = 4;
  double goal_coverage = 0.2;  // minimum carrier and non-carrier share per goal
  int max_resamples = 10000;
};

struct StyleConfig {
  double distractor_rate = 0.0;  // distractor sentences per attribute sentence
  int filler_sentences = 3;
};

namespace detail {

inline std::string make_name(Rng& rng) {
  static const std::vector<std::string> syllables{
      "ka", "zor", "mel", "thu", "rim", "gax", "bel", "oth", "vin", "dra", "quo", "lek", "sar", "mun",
      "tib", "yor", "fen", "gul", "hask", "pim", "rud", "sel", "tor", "ul", "vex", "wim", "xan", "zed",
      "bro", "cal", "dun", "esk", "fal", "gri", "hol", "jin", "kro", "lum", "nar", "orr", "pex", "ril"};
  std::string name;
  const auto parts = 2 + rng.below(2);
  for (std::uint64_t i = 0; i < parts; ++i) name += rng.pick(syllables);
  name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  return name;
}

inline bool is_vocabulary_word(std::string_view word) {
  std::string lower(word);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "it" || lower == "its" || lower == "the") return true;
  for (auto kind : {VocabKind::Resistance, VocabKind::AttackType}) {
    for (const auto& e : vocabulary(kind).entries()) {
      for (const auto& a : e.aliases) {
        if (a == lower) return true;
      }
    }
  }
  return false;
}

inline std::size_t ceil_share(double share, std::size_t count) {
  return static_cast<std::size_t>(std::ceil(share * static_cast<double>(count) - 1e-9));
}

inline bool coverage_holds(const std::vector<MonsterRecord>& monsters, double share) {
  const auto need = ceil_share(share, monsters.size());
  for (const auto& goal : goal_resistances()) {
    const auto bit = resistance_vocabulary().require_index(goal);
    std::size_t carriers = 0;
    for (const auto& m : monsters) carriers += m.resistances.contains(bit) ? 1 : 0;
    if (carriers < need || monsters.size() - carriers < need) return false;
  }
  return true;
}

}  // namespace detail

/// Builds a seeded roster. Attribute sets are redrawn until every goal
/// resistance is carried by at least `goal_coverage` of the roster and
/// missing from at least the same share.
inline Bestiary generate_bestiary(std::uint64_t seed, const BestiaryConfig& config = {}) {
  if (config.count < 10) {
    throw ConfigError("bestiary count " + std::to_string(config.count) +
                      " cannot satisfy goal coverage (need at least 10 monsters)");
  }
  if (config.min_attacks < 1 || config.max_attacks < config.min_attacks ||
      config.max_attacks > static_cast<int>(attack_vocabulary().size())) {
    throw ConfigError("invalid attack count range");
  }
  Rng rng(seed);
  Bestiary out;
  out.seed = seed;

  std::set<std::string> used;
  for (int id = 0; id < config.count; ++id) {
    std::string name;
    do {
      name = detail::make_name(rng);
    } while (used.count(name) || detail::is_vocabulary_word(name));
    used.insert(name);
    out.monsters.push_back(MonsterRecord{id, name, AttributeSet(VocabKind::Resistance), AttributeSet(VocabKind::AttackType)});
  }

  const auto& rv = resistance_vocabulary();
  const auto& av = attack_vocabulary();
  for (int attempt = 0;; ++attempt) {
    if (attempt == config.max_resamples) {
      throw ConfigError("goal coverage unsatisfiable after " + std::to_string(attempt) + " resamples");
    }
    for (auto& m : out.monsters) {
      m.resistances = AttributeSet(VocabKind::Resistance);
      for (std::size_t r = 0; r < rv.size(); ++r) {
        if (rng.bernoulli(config.resistance_probability)) m.resistances.insert(r);
      }
      m.attacks = AttributeSet(VocabKind::AttackType);
      const auto n_attacks = config.min_attacks + static_cast<int>(rng.below(config.max_attacks - config.min_attacks + 1));
      std::vector<std::size_t> order(av.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      for (int k = 0; k < n_attacks; ++k) m.attacks.insert(order[k]);
    }
    if (detail::coverage_holds(out.monsters, config.goal_coverage)) break;
  }
  return out;
}

/// Role of each sentence on a generated page; tests use it to check subject
/// discipline without re-parsing prose.
enum class SentenceRole { Intro, Attribute, Distractor, Filler };

struct AnnotatedPage {
  Document document;
  std::vector<std::pair<SentenceRole, std::string>> sentences;
};

namespace detail {

inline std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    out += items[i];
  }
  return out;
}

inline std::vector<std::string> surface_forms(const AttributeSet& set, Rng& rng) {
  const auto& v = vocabulary(set.kind());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (set.contains(i)) out.push_back(rng.pick(v.aliases(i)));
  }
  return out;
}

inline std::string resistance_sentence(const std::string& subject, const std::vector<std::string>& items, Rng& rng) {
  if (items.empty()) return subject + " has no notable resistances.";
  switch (rng.below(3)) {
    case 0: return subject + " is resistant to " + join_list(items) + ".";
    case 1: return subject + " resists " + join_list(items) + ".";
    default: return subject + " has resistance to " + join_list(items) + ".";
  }
}

inline std::string attack_sentence(const std::string& subject, const std::vector<std::string>& items, Rng& rng) {
  switch (rng.below(3)) {
    case 0: return subject + " attacks with " + join_list(items) + ".";
    case 1: return subject + " can deal damage with " + join_list(items) + ".";
    default:
      return subject + (items.size() == 1 ? " has a " + items[0] + " attack." : " has " + join_list(items) + " attacks.");
  }
}

/// Splits a non-empty list into one or two sentence-sized chunks.
inline std::vector<std::vector<std::string>> chunk(std::vector<std::string> items, Rng& rng) {
  if (items.size() < 2 || rng.bernoulli(0.5)) return {items};
  const auto cut = 1 + rng.below(items.size() - 1);
  return {std::vector<std::string>(items.begin(), items.begin() + static_cast<long>(cut)),
          std::vector<std::string>(items.begin() + static_cast<long>(cut), items.end())};
}

}  // namespace detail

inline AnnotatedPage generate_annotated_page(const MonsterRecord& monster, const Bestiary& bestiary,
                                             const StyleConfig& style, std::uint64_t seed) {
  if (bestiary.find(monster.name) == nullptr) throw ConfigError("monster not in bestiary: " + monster.name);
  static const std::vector<std::string> kinds{"beast", "creature", "humanoid", "spirit", "reptile", "horror"};
  static const std::vector<std::string> places{"upper dungeon", "deep caverns", "swamp levels", "old ruins", "lower halls"};
  static const std::vector<std::string> fillers{
      "It is often found in small groups.",
      "Its corpse is safe to eat.",
      "Players usually meet it early in the game.",
      "It moves at normal speed.",
      "It is generated with a random inventory.",
      "Some variants of the game change its color.",
      "It can be tamed with the right food.",
      "It rarely appears on the first level.",
      "Its experience level is modest.",
      "It is not generated in the quest branch."};

  Rng rng(Rng::mix(seed ^ Rng::mix(static_cast<std::uint64_t>(monster.id) + 1)));
  std::vector<std::pair<SentenceRole, std::string>> body;

  auto subject = [&] { return rng.bernoulli(0.5) ? std::string("It") : monster.name; };

  for (auto& items : detail::chunk(detail::surface_forms(monster.resistances, rng), rng)) {
    body.emplace_back(SentenceRole::Attribute, detail::resistance_sentence(subject(), items, rng));
  }
  for (auto& items : detail::chunk(detail::surface_forms(monster.attacks, rng), rng)) {
    body.emplace_back(SentenceRole::Attribute, detail::attack_sentence(subject(), items, rng));
  }

  const auto attribute_sentences = body.size();
  const auto distractors = static_cast<std::size_t>(std::llround(style.distractor_rate * static_cast<double>(attribute_sentences)));
  if (bestiary.size() > 1) {
    for (std::size_t d = 0; d < distractors; ++d) {
      const MonsterRecord* other = nullptr;
      do {
        other = &bestiary.monsters[rng.below(bestiary.size())];
      } while (other->id == monster.id);
      const bool use_resistance = !other->resistances.empty() && rng.bernoulli(0.5);
      auto forms = detail::surface_forms(use_resistance ? other->resistances : other->attacks, rng);
      body.emplace_back(SentenceRole::Distractor, use_resistance ? detail::resistance_sentence(other->name, forms, rng)
                                                                 : detail::attack_sentence(other->name, forms, rng));
    }
  }
  for (int f = 0; f < style.filler_sentences; ++f) body.emplace_back(SentenceRole::Filler, rng.pick(fillers));
  rng.shuffle(body);

  AnnotatedPage page;
  page.sentences.emplace_back(SentenceRole::Intro,
                              monster.name + " is a " + rng.pick(kinds) + " found in the " + rng.pick(places) + ".");
  page.sentences.insert(page.sentences.end(), body.begin(), body.end());
  std::string text;
  for (const auto& [role, sentence] : page.sentences) {
    if (!text.empty()) text += ' ';
    text += sentence;
  }
  page.document = Document{monster.id, monster.name, std::move(text), DocumentSource::Synthetic};
  return page;
}

/// Synthetic page: the monster's true attributes under subject "It" or its
/// name, distractor sentences about other monsters, and keyword-free filler.
inline Document generate_page(const MonsterRecord& monster, const Bestiary& bestiary, const StyleConfig& style,
                              std::uint64_t seed) {
  return generate_annotated_page(monster, bestiary, style, seed).document;
}

inline Corpus generate_corpus(const Bestiary& bestiary, const StyleConfig& style, std::uint64_t seed) {
  Corpus corpus;
  for (const auto& m : bestiary.monsters) corpus.emplace(m.id, generate_page(m, bestiary, style, seed));
  return corpus;
}

struct SplitAssignment {
  std::vector<int> train_ids;  // sorted
  std::vector<int> eval_ids;   // sorted
};

inline SplitAssignment split_train_eval(const Bestiary& bestiary, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie strictly between 0 and 1");
  auto ids = bestiary.ids();
  Rng rng(seed);
  rng.shuffle(ids);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ids.size())));
  SplitAssignment out;
  out.train_ids.assign(ids.begin(), ids.begin() + static_cast<long>(n_train));
  out.eval_ids.assign(ids.begin() + static_cast<long>(n_train), ids.end());
  std::sort(out.train_ids.begin(), out.train_ids.end());
  std::sort(out.eval_ids.begin(), out.eval_ids.end());
  return out;
}

/// Uniformly sampled ids for a labeled evaluation subset, sorted.
inline std::vector<int> sample_labeled_subset(const Bestiary& bestiary, std::size_t n, std::uint64_t seed) {
  auto ids = bestiary.ids();
  Rng rng(seed);
  rng.shuffle(ids);
  ids.resize(std::min(n, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

// ---- serialization ----

inline nlohmann::ordered_json to_json(const MonsterRecord& m) {
  nlohmann::ordered_json j;
  j["id"] = m.id;
  j["name"] = m.name;
  j["resistances"] = m.resistances.names();
  j["attacks"] = m.attacks.names();
  return j;
}

inline MonsterRecord monster_from_json(const nlohmann::json& j) {
  MonsterRecord m;
  m.id = j.at("id").get<int>();
  m.name = j.at("name").get<std::string>();
  m.resistances = AttributeSet::from_names(VocabKind::Resistance, j.at("resistances").get<std::vector<std::string>>());
  m.attacks = AttributeSet::from_names(VocabKind::AttackType, j.at("attacks").get<std::vector<std::string>>());
  return m;
}

inline nlohmann::ordered_json to_json(const Bestiary& b) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : b.monsters) arr.push_back(to_json(m));
  return arr;
}

inline Bestiary bestiary_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("bestiary JSON must be an array");
  Bestiary b;
  std::set<std::string> names;
  for (const auto& item : j) {
    b.monsters.push_back(monster_from_json(item));
    if (!names.insert(b.monsters.back().name).second) throw ConfigError("duplicate monster name: " + b.monsters.back().name);
  }
  return b;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline Bestiary load_bestiary(const std::filesystem::path& path) {
  try {
    return bestiary_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Writes `corpus/<id>.txt`, one plain-text page per monster.
inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  for (const auto& [id, doc] : corpus) write_file(dir / (std::to_string(id) + ".txt"), doc.text + "\n");
}

inline Corpus load_corpus(const Bestiary& bestiary, const std::filesystem::path& dir) {
  Corpus corpus;
  for (const auto& m : bestiary.monsters) {
    auto text = read_file(dir / (std::to_string(m.id) + ".txt"));
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    corpus.emplace(m.id, Document{m.id, m.name, std::move(text), DocumentSource::Synthetic});
  }
  return corpus;
}

}  // namespace qf
