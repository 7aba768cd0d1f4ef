#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "fixtures.hpp"
#include "qf/extraction.hpp"

using namespace qf;
using qf_test::default_bestiary;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.bits(), b.bits());
}

TEST(Rng, MatchesStandardEngine) {
  // the standard fixes the 10000th output of a default-seeded mt19937_64
  Rng r(5489);
  for (int i = 0; i < 9999; ++i) r.bits();
  EXPECT_EQ(r.bits(), 9981545732273789042ULL);
}

TEST(Rng, ForkIsDeterministicAndDistinct) {
  Rng a(8), b(8);
  auto fa = a.fork(1), fb = b.fork(1);
  EXPECT_EQ(fa.bits(), fb.bits());
  Rng c(8);
  auto fc = c.fork(2);
  Rng d(8);
  EXPECT_NE(fc.bits(), d.fork(1).bits());
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng r(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_THROW(r.below(0), std::invalid_argument);
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(3);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Fnv1a, ReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Vocabulary, SizesAndOrder) {
  EXPECT_EQ(resistance_vocabulary().size(), 8u);
  EXPECT_EQ(attack_vocabulary().size(), 17u);
  const std::vector<std::string> order{"fire", "cold", "sleep", "shock", "poison", "acid", "disintegration", "stoning"};
  for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(resistance_vocabulary().name(i), order[i]);
  EXPECT_EQ(kVocabularyVersion, 1);
}

TEST(Vocabulary, RejectsDuplicatesAndSharedAliases) {
  EXPECT_THROW(AttributeVocabulary(VocabKind::Resistance, {{"a", {}}, {"a", {}}}), ConfigError);
  EXPECT_THROW(AttributeVocabulary(VocabKind::Resistance, {{"a", {"x"}}, {"b", {"x"}}}), ConfigError);
  EXPECT_THROW(AttributeVocabulary(VocabKind::Resistance, {}), ConfigError);
}

TEST(Vocabulary, GoalResistancesAreInVocabulary) {
  ASSERT_EQ(goal_resistances().size(), 5u);
  for (const auto& g : goal_resistances()) EXPECT_LT(resistance_vocabulary().index_of(g), 8u);
}

TEST(AttributeSet, NamesRoundTrip) {
  auto s = AttributeSet::from_names(VocabKind::Resistance, {"poison", "fire"});
  EXPECT_EQ(s.names(), (std::vector<std::string>{"fire", "poison"}));
  EXPECT_TRUE(s.contains("fire"));
  EXPECT_FALSE(s.contains("cold"));
  EXPECT_TRUE(s.fits(8));
  EXPECT_THROW(AttributeSet::from_names(VocabKind::Resistance, {"bite"}), ConfigError);
}

TEST(GenerateBestiary, DefaultShapeAndDeterminism) {
  const auto& b = default_bestiary();
  ASSERT_EQ(b.size(), 388u);
  const auto again = generate_bestiary(7);
  EXPECT_EQ(to_json(b).dump(), to_json(again).dump());
  std::set<std::string> names;
  for (const auto& m : b.monsters) {
    EXPECT_TRUE(names.insert(m.name).second) << m.name;
    EXPECT_GE(m.attacks.size(), 1u);
    EXPECT_LE(m.attacks.size(), 4u);
    EXPECT_TRUE(m.resistances.fits(8));
    EXPECT_TRUE(m.attacks.fits(17));
  }
}

TEST(GenerateBestiary, GoalCoverage) {
  const auto& b = default_bestiary();
  for (const auto& goal : goal_resistances()) {
    int carriers = 0;
    for (const auto& m : b.monsters) carriers += m.resistances.contains(goal) ? 1 : 0;
    EXPECT_GE(carriers, 78) << goal;
    EXPECT_LE(carriers, 310) << goal;
  }
}

TEST(GenerateBestiary, TooSmallIsAnError) { EXPECT_THROW(generate_bestiary(7, BestiaryConfig{4}), ConfigError); }

TEST(GenerateBestiary, NamesAreNotVocabularyWords) {
  for (const auto& m : default_bestiary().monsters) {
    const auto lower = to_lower(m.name);
    for (auto kind : {VocabKind::Resistance, VocabKind::AttackType}) {
      const auto& v = vocabulary(kind);
      for (std::size_t i = 0; i < v.size(); ++i) {
        for (const auto& a : v.aliases(i)) ASSERT_FALSE(extraction_detail::contains_word(lower, a)) << m.name;
      }
    }
  }
}

TEST(GeneratePage, StatesResistanceUnderPageSubject) {
  const auto& b = default_bestiary();
  StyleConfig style;
  for (const auto& m : b.monsters) {
    if (m.resistances != AttributeSet::from_names(VocabKind::Resistance, {"fire"})) continue;
    const auto page = generate_annotated_page(m, b, style, 11);
    bool found = false;
    for (const auto& [role, s] : page.sentences) {
      if (role != SentenceRole::Attribute) continue;
      const bool own_subject = s.rfind("It ", 0) == 0 || s.rfind(m.name + " ", 0) == 0;
      if (own_subject && keyword_scan(s, resistance_vocabulary()).contains("fire")) found = true;
    }
    EXPECT_TRUE(found) << page.document.text;
    return;
  }
  GTEST_SKIP() << "no fire-only monster in the default bestiary";
}

TEST(GeneratePage, DistractorFreeKeywordScanIsExact) {
  const auto& b = default_bestiary();
  const auto& corpus = qf_test::default_corpus(0.0);
  for (const auto& m : b.monsters) {
    const auto& doc = corpus.at(m.id);
    ASSERT_EQ(keyword_extract(doc, resistance_vocabulary()), m.resistances) << doc.text;
    ASSERT_EQ(keyword_extract(doc, attack_vocabulary()), m.attacks) << doc.text;
  }
}

TEST(GeneratePage, DistractorSubjectDiscipline) {
  const auto& b = default_bestiary();
  StyleConfig style;
  style.distractor_rate = 2.0;
  std::size_t distractors = 0;
  for (int id = 0; id < 60; ++id) {
    const auto& m = b.at(id);
    const auto page = generate_annotated_page(m, b, style, 11);
    std::size_t attribute = 0, here = 0;
    for (const auto& [role, s] : page.sentences) {
      if (role == SentenceRole::Attribute) ++attribute;
      if (role != SentenceRole::Distractor) continue;
      ++here;
      EXPECT_NE(s.rfind("It ", 0), 0u) << s;
      EXPECT_NE(s.rfind(m.name + " ", 0), 0u) << s;
      const auto subject = s.substr(0, s.find(' '));
      const auto* other = b.find(subject);
      ASSERT_NE(other, nullptr) << s;
      // the sentence states the other monster's true attributes
      const auto r = keyword_scan(s, resistance_vocabulary());
      const auto a = keyword_scan(s, attack_vocabulary());
      EXPECT_TRUE(r.is_subset_of(other->resistances)) << s;
      EXPECT_TRUE(a.is_subset_of(other->attacks)) << s;
    }
    EXPECT_EQ(here, static_cast<std::size_t>(std::llround(2.0 * static_cast<double>(attribute))));
    distractors += here;
  }
  EXPECT_GT(distractors, 0u);
}

TEST(GeneratePage, FillersCarryNoKeywords) {
  const auto& b = default_bestiary();
  StyleConfig style;
  style.filler_sentences = 10;
  const auto page = generate_annotated_page(b.at(3), b, style, 5);
  for (const auto& [role, s] : page.sentences) {
    if (role != SentenceRole::Filler) continue;
    EXPECT_TRUE(keyword_scan(s, resistance_vocabulary()).empty()) << s;
    EXPECT_TRUE(keyword_scan(s, attack_vocabulary()).empty()) << s;
  }
}

TEST(GeneratePage, DistractorsLowerKeywordPrecisionOnly) {
  const auto& b = default_bestiary();
  StyleConfig style;
  style.distractor_rate = 2.0;
  PredictionCounts total;
  for (int id : sample_labeled_subset(b, 98, 98)) {
    const auto& m = b.at(id);
    const auto doc = generate_page(m, b, style, 11);
    total += score_prediction(keyword_extract(doc, resistance_vocabulary()), m.resistances);
    total += score_prediction(keyword_extract(doc, attack_vocabulary()), m.attacks);
  }
  const auto r = metrics_from_totals(total, 98);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_LT(r.precision, 0.6);
}

TEST(GeneratePage, DisjointNeighboursBreakKeywordPrecision) {
  // pages carrying a distractor whose stated attributes are disjoint from the page monster's
  const auto& b = default_bestiary();
  StyleConfig style;
  style.distractor_rate = 2.0;
  int eligible = 0, imprecise = 0;
  for (int id : sample_labeled_subset(b, 98, 98)) {
    const auto& m = b.at(id);
    const auto page = generate_annotated_page(m, b, style, 11);
    bool disjoint = false;
    for (const auto& [role, s] : page.sentences) {
      if (role != SentenceRole::Distractor) continue;
      const auto r = keyword_scan(s, resistance_vocabulary());
      const auto a = keyword_scan(s, attack_vocabulary());
      const bool stated = !r.empty() || !a.empty();
      if (stated && (r.bits() & m.resistances.bits()).none() && (a.bits() & m.attacks.bits()).none()) disjoint = true;
    }
    if (!disjoint) continue;
    ++eligible;
    PredictionCounts c = score_prediction(keyword_extract(page.document, resistance_vocabulary()), m.resistances);
    c += score_prediction(keyword_extract(page.document, attack_vocabulary()), m.attacks);
    if (c.fp > 0) ++imprecise;
  }
  ASSERT_GT(eligible, 20);
  EXPECT_GE(imprecise, static_cast<int>(std::ceil(0.8 * eligible)));
}

TEST(GeneratePage, DeterministicPerMonsterAndSeed) {
  const auto& b = default_bestiary();
  StyleConfig style;
  style.distractor_rate = 1.0;
  EXPECT_EQ(generate_page(b.at(9), b, style, 1).text, generate_page(b.at(9), b, style, 1).text);
  EXPECT_NE(generate_page(b.at(9), b, style, 1).text, generate_page(b.at(9), b, style, 2).text);
}

TEST(GeneratePage, MonsterMustBelongToBestiary) {
  const auto& b = default_bestiary();
  MonsterRecord stranger;
  stranger.id = 999;
  stranger.name = "Nobody";
  EXPECT_THROW(generate_page(stranger, b, {}, 1), ConfigError);
}

TEST(Split, SizesAndDeterminism) {
  const auto& b = default_bestiary();
  const auto s = split_train_eval(b, 0.8, 3);
  EXPECT_EQ(s.train_ids.size(), 310u);
  EXPECT_EQ(s.eval_ids.size(), 78u);
  const auto again = split_train_eval(b, 0.8, 3);
  EXPECT_EQ(s.train_ids, again.train_ids);
  const auto other = split_train_eval(b, 0.8, 4);
  EXPECT_EQ(other.train_ids.size(), 310u);
  EXPECT_NE(other.train_ids, s.train_ids);
}

TEST(Split, IsAPartition) {
  BestiaryConfig cfg;
  cfg.count = 10;
  cfg.goal_coverage = 0.1;
  const auto b = generate_bestiary(1, cfg);
  const auto s = split_train_eval(b, 0.5, 9);
  EXPECT_EQ(s.train_ids.size(), 5u);
  EXPECT_EQ(s.eval_ids.size(), 5u);
  std::set<int> all(s.train_ids.begin(), s.train_ids.end());
  all.insert(s.eval_ids.begin(), s.eval_ids.end());
  EXPECT_EQ(all.size(), 10u);
  EXPECT_THROW(split_train_eval(b, 1.0, 1), ConfigError);
}

TEST(Serialization, BestiaryAndCorpusRoundTrip) {
  qf_test::TempDir tmp;
  const auto& b = default_bestiary();
  write_file(tmp.path / "bestiary.json", to_json(b).dump(2));
  const auto loaded = load_bestiary(tmp.path / "bestiary.json");
  EXPECT_EQ(to_json(loaded).dump(), to_json(b).dump());
  const auto& corpus = qf_test::default_corpus(1.0);
  write_corpus(corpus, tmp.path / "corpus");
  const auto back = load_corpus(loaded, tmp.path / "corpus");
  ASSERT_EQ(back.size(), corpus.size());
  for (const auto& [id, doc] : corpus) EXPECT_EQ(back.at(id).text, doc.text);
}

TEST(Serialization, JsonShape) {
  const auto j = to_json(default_bestiary().at(0));
  EXPECT_TRUE(j.contains("id"));
  EXPECT_TRUE(j.contains("name"));
  EXPECT_TRUE(j["resistances"].is_array());
  EXPECT_TRUE(j["attacks"].is_array());
}

TEST(Serialization, DuplicateNamesRejected) {
  auto j = nlohmann::json::array();
  j.push_back({{"id", 0}, {"name", "Grob"}, {"resistances", {"fire"}}, {"attacks", {"bite"}}});
  j.push_back({{"id", 1}, {"name", "Grob"}, {"resistances", nlohmann::json::array()}, {"attacks", {"claw"}}});
  EXPECT_THROW(bestiary_from_json(j), ConfigError);
}

TEST(LabeledSubset, SortedUniqueAndSeeded) {
  const auto& b = default_bestiary();
  const auto ids = sample_labeled_subset(b, 98, 98);
  EXPECT_EQ(ids.size(), 98u);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(std::set<int>(ids.begin(), ids.end()).size(), 98u);
  EXPECT_EQ(ids, sample_labeled_subset(b, 98, 98));
}
