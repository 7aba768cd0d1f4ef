#pragma once

// Attribute vocabularies and the bitset representation used for extraction,
// labeling, scoring and encoding.

#include <bitset>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qf/error.hpp"

namespace qf {

enum class VocabKind { Resistance, AttackType };

inline std::string_view to_string(VocabKind kind) {
  return kind == VocabKind::Resistance ? "resistance" : "attack";
}

/// Bumped whenever the canonical order of either vocabulary changes, since
/// the order defines bit positions in every serialized feature vector.
inline constexpr int kVocabularyVersion = 1;

inline constexpr std::size_t kMaxVocabularySize = 32;

class AttributeVocabulary {
 public:
  struct Entry {
    std::string canonical;
    std::vector<std::string> aliases;  // surface forms, includes canonical
  };

  AttributeVocabulary(VocabKind kind, std::vector<Entry> entries) : kind_(kind), entries_(std::move(entries)) {
    if (entries_.empty() || entries_.size() > kMaxVocabularySize) {
      throw ConfigError("vocabulary size must be in [1, 32]");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].aliases.empty()) entries_[i].aliases.push_back(entries_[i].canonical);
      for (std::size_t j = 0; j < i; ++j) {
        if (entries_[i].canonical == entries_[j].canonical) {
          throw ConfigError("duplicate vocabulary entry: " + entries_[i].canonical);
        }
        for (const auto& a : entries_[i].aliases) {
          for (const auto& b : entries_[j].aliases) {
            if (a == b) throw ConfigError("alias maps to two entries: " + a);
          }
        }
      }
    }
  }

  VocabKind kind() const { return kind_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& name(std::size_t i) const { return entries_.at(i).canonical; }
  const std::vector<std::string>& aliases(std::size_t i) const { return entries_.at(i).aliases; }

  /// Position of a canonical name, or size() when absent.
  std::size_t index_of(std::string_view canonical) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].canonical == canonical) return i;
    }
    return entries_.size();
  }

  std::size_t require_index(std::string_view canonical) const {
    auto i = index_of(canonical);
    if (i == size()) throw ConfigError("unknown " + std::string(to_string(kind_)) + ": " + std::string(canonical));
    return i;
  }

 private:
  VocabKind kind_;
  std::vector<Entry> entries_;
};

/// The eight resistances. Order is frozen (kVocabularyVersion).
inline const AttributeVocabulary& resistance_vocabulary() {
  static const AttributeVocabulary vocab(VocabKind::Resistance,
                                         {
                                             {"fire", {"fire", "flames"}},
                                             {"cold", {"cold", "frost"}},
                                             {"sleep", {"sleep"}},
                                             {"shock", {"shock", "electricity", "lightning"}},
                                             {"poison", {"poison", "venom"}},
                                             {"acid", {"acid"}},
                                             {"disintegration", {"disintegration"}},
                                             {"stoning", {"stoning", "petrification"}},
                                         });
  return vocab;
}

/// The seventeen attack types. Order is frozen (kVocabularyVersion).
inline const AttributeVocabulary& attack_vocabulary() {
  static const AttributeVocabulary vocab(VocabKind::AttackType,
                                         {
                                             {"bite", {"bite", "bites"}},
                                             {"claw", {"claw", "claws"}},
                                             {"sting", {"sting", "stinger"}},
                                             {"touch", {"touch"}},
                                             {"gaze", {"gaze"}},
                                             {"breath", {"breath"}},
                                             {"spit", {"spit"}},
                                             {"kick", {"kick", "kicks"}},
                                             {"butt", {"butt", "head butt"}},
                                             {"engulf", {"engulf", "engulfing"}},
                                             {"weapon", {"weapon", "weapons"}},
                                             {"magic", {"magic", "spellcasting"}},
                                             {"tentacle", {"tentacle", "tentacles"}},
                                             {"passive", {"passive"}},
                                             {"explode", {"explode", "explosion"}},
                                             {"drain", {"drain", "level drain"}},
                                             {"steal", {"steal", "theft"}},
                                         });
  return vocab;
}

inline const AttributeVocabulary& vocabulary(VocabKind kind) {
  return kind == VocabKind::Resistance ? resistance_vocabulary() : attack_vocabulary();
}

/// The resistances a bandit goal may ask for.
inline const std::vector<std::string>& goal_resistances() {
  static const std::vector<std::string> goals{"fire", "shock", "sleep", "poison", "cold"};
  return goals;
}

/// A subset of one vocabulary, stored as bits in canonical order.
class AttributeSet {
 public:
  using Bits = std::bitset<kMaxVocabularySize>;

  explicit AttributeSet(VocabKind kind = VocabKind::Resistance) : kind_(kind) {}
  AttributeSet(VocabKind kind, Bits bits) : kind_(kind), bits_(bits) {}

  static AttributeSet from_names(VocabKind kind, const std::vector<std::string>& names) {
    AttributeSet s(kind);
    for (const auto& n : names) s.insert(vocabulary(kind).require_index(n));
    return s;
  }

  VocabKind kind() const { return kind_; }
  const Bits& bits() const { return bits_; }

  void insert(std::size_t i) {
    if (i >= kMaxVocabularySize) throw ShapeError("attribute index out of range");
    bits_.set(i);
  }
  bool contains(std::size_t i) const { return i < kMaxVocabularySize && bits_.test(i); }
  bool contains(std::string_view canonical) const { return contains(vocabulary(kind_).index_of(canonical)); }
  std::size_t size() const { return bits_.count(); }
  bool empty() const { return bits_.none(); }

  std::vector<std::string> names() const { return names(vocabulary(kind_)); }

  std::vector<std::string> names(const AttributeVocabulary& v) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (bits_.test(i)) out.push_back(v.name(i));
    }
    return out;
  }

  bool is_subset_of(const AttributeSet& other) const { return (bits_ & ~other.bits_).none(); }

  /// True when no bit lies at or beyond position n.
  bool fits(std::size_t n) const { return (bits_ >> n).none(); }

  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;

 private:
  VocabKind kind_;
  Bits bits_;
};

}  // namespace qf
