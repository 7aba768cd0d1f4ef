#pragma once

// The five text representations compared in the bandit: state one-hot,
// trainable LSTM over hashed tokens, frozen random projection of a hashed
// bag of words, QA-extracted resistance bits, and ground-truth bits.

#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qf/bestiary.hpp"
#include "qf/extraction.hpp"
#include "qf/numerics.hpp"
#include "qf/qa.hpp"

namespace qf {

enum class EncodingKind { StateOneHot, Recurrent, FrozenLM, QAModel, GroundTruth };

inline std::string_view to_string(EncodingKind kind) {
  switch (kind) {
    case EncodingKind::StateOneHot: return "state_onehot";
    case EncodingKind::Recurrent: return "rnn";
    case EncodingKind::FrozenLM: return "frozen_lm";
    case EncodingKind::QAModel: return "qa";
    case EncodingKind::GroundTruth: return "ground_truth";
  }
  return "?";
}

inline EncodingKind parse_encoding(std::string_view name) {
  for (auto k : {EncodingKind::StateOneHot, EncodingKind::Recurrent, EncodingKind::FrozenLM, EncodingKind::QAModel,
                 EncodingKind::GroundTruth}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown encoding method '" + std::string(name) +
                    "' (expected state_onehot | rnn | frozen_lm | qa | ground_truth)");
}

struct FeatureVector {
  Vector values;
  EncodingKind method = EncodingKind::GroundTruth;
};

/// Lowercased alphanumeric words.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

inline std::size_t hash_bucket(std::string_view word, std::size_t buckets) { return fnv1a(word) % buckets; }

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual EncodingKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual FeatureVector encode(const MonsterRecord& monster, const Document& doc) const = 0;
  virtual std::size_t trainable_parameter_count() const { return 0; }
  bool trainable() const { return trainable_parameter_count() > 0; }

 protected:
  static void check_pair(const MonsterRecord& monster, const Document& doc) {
    if (doc.monster_id != monster.id) {
      throw ConfigError("document for monster " + std::to_string(doc.monster_id) + " passed with monster " +
                        std::to_string(monster.id));
    }
  }
};

/// e_id over the roster; ignores text entirely.
class StateOneHotEncoder : public TextEncoder {
 public:
  explicit StateOneHotEncoder(std::size_t roster_size) : size_(roster_size) {}
  EncodingKind kind() const override { return EncodingKind::StateOneHot; }
  std::size_t dim() const override { return size_; }
  FeatureVector encode(const MonsterRecord& monster, const Document&) const override {
    if (monster.id < 0 || static_cast<std::size_t>(monster.id) >= size_) throw ShapeError("monster id outside roster");
    Vector v(size_, 0.0);
    v[static_cast<std::size_t>(monster.id)] = 1.0;
    return {std::move(v), kind()};
  }

 private:
  std::size_t size_;
};

/// L2-normalized hashed bag of words through a fixed seeded projection.
class FrozenLmEncoder : public TextEncoder {
 public:
  explicit FrozenLmEncoder(std::uint64_t seed, std::size_t buckets = 4096, std::size_t dim = 64)
      : projection_(dim, buckets) {
    Rng rng(seed);
    fill_uniform(projection_.data, std::sqrt(3.0), rng);
  }
  EncodingKind kind() const override { return EncodingKind::FrozenLM; }
  std::size_t dim() const override { return projection_.rows; }
  const Matrix& projection() const { return projection_; }

  FeatureVector encode(const MonsterRecord& monster, const Document& doc) const override {
    check_pair(monster, doc);
    Vector bag(projection_.cols, 0.0);
    for (const auto& w : tokenize(doc.text)) bag[hash_bucket(w, projection_.cols)] += 1.0;
    double norm = 0;
    for (double x : bag) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0) {
      for (auto& x : bag) x /= norm;
    }
    Vector out(projection_.rows);
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = dot(projection_.row(r), bag.data(), bag.size());
    return {std::move(out), kind()};
  }

 private:
  Matrix projection_;
};

/// Resistance bits from QA extraction over the page.
class QaEncoder : public TextEncoder {
 public:
  explicit QaEncoder(std::shared_ptr<QaClient> client) : client_(std::move(client)) {}
  EncodingKind kind() const override { return EncodingKind::QAModel; }
  std::size_t dim() const override { return resistance_vocabulary().size(); }
  FeatureVector encode(const MonsterRecord& monster, const Document& doc) const override {
    check_pair(monster, doc);
    return bits(qa_extract(doc, resistance_vocabulary(), *client_, QaTask::Resistance), kind());
  }

  static FeatureVector bits(const AttributeSet& set, EncodingKind kind) {
    Vector v(resistance_vocabulary().size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = set.contains(i) ? 1.0 : 0.0;
    return {std::move(v), kind};
  }

 private:
  std::shared_ptr<QaClient> client_;
};

class GroundTruthEncoder : public TextEncoder {
 public:
  EncodingKind kind() const override { return EncodingKind::GroundTruth; }
  std::size_t dim() const override { return resistance_vocabulary().size(); }
  FeatureVector encode(const MonsterRecord& monster, const Document&) const override {
    return QaEncoder::bits(ground_truth_extract(monster, VocabKind::Resistance), kind());
  }
};

struct RecurrentEncoderConfig {
  std::size_t buckets = 1024;
  std::size_t embedding_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t max_tokens = 256;  // longer pages keep their first max_tokens words
};

/// Hashed-token embeddings fed through an LSTM; the final hidden state is the
/// feature. Trained end-to-end with the downstream value network.
class RecurrentEncoder : public TextEncoder {
 public:
  struct Trace {
    std::vector<std::size_t> buckets;
    RecurrentCell::Tape tape;
  };

  explicit RecurrentEncoder(std::uint64_t seed, RecurrentEncoderConfig config = {})
      : config_(config),
        embedding_(config.buckets, config.embedding_dim, Rng::mix(seed ^ 0x51)),
        cell_(RecurrentCell::seeded(config.embedding_dim, config.hidden_dim, Rng::mix(seed ^ 0x52))) {}

  EncodingKind kind() const override { return EncodingKind::Recurrent; }
  std::size_t dim() const override { return config_.hidden_dim; }
  std::size_t trainable_parameter_count() const override { return embedding_.parameter_count() + cell_.parameter_count(); }

  std::vector<std::size_t> token_buckets(const Document& doc) const {
    std::vector<std::size_t> out;
    for (const auto& w : tokenize(doc.text)) {
      if (out.size() == config_.max_tokens) break;
      out.push_back(hash_bucket(w, config_.buckets));
    }
    if (out.empty()) out.push_back(0);
    return out;
  }

  FeatureVector encode(const MonsterRecord& monster, const Document& doc) const override {
    check_pair(monster, doc);
    return {cell_.encode(embed(token_buckets(doc))), kind()};
  }

  Vector encode(const MonsterRecord& monster, const Document& doc, Trace& trace) const {
    check_pair(monster, doc);
    trace.buckets = token_buckets(doc);
    return cell_.encode(embed(trace.buckets), trace.tape);
  }

  void backward(const Trace& trace, const Vector& grad_hidden) {
    const auto grads = cell_.backward(trace.tape, grad_hidden);
    for (std::size_t t = 0; t < grads.size(); ++t) embedding_.accumulate(trace.buckets[t], grads[t]);
  }

  ParameterSet parameters() {
    auto p = cell_.parameters();
    p.append(embedding_.parameters());
    return p;
  }

  const RecurrentCell& cell() const { return cell_; }

 private:
  std::vector<Vector> embed(const std::vector<std::size_t>& buckets) const {
    std::vector<Vector> tokens;
    tokens.reserve(buckets.size());
    for (auto b : buckets) tokens.push_back(embedding_.lookup(b));
    return tokens;
  }

  RecurrentEncoderConfig config_;
  Embedding embedding_;
  RecurrentCell cell_;
};

inline std::size_t encoder_trainable_params(const TextEncoder& encoder) { return encoder.trainable_parameter_count(); }

/// Builds the encoder for a method. `client` is only used by QAModel.
inline std::unique_ptr<TextEncoder> make_encoder(EncodingKind kind, const Bestiary& bestiary, std::uint64_t seed,
                                                 std::shared_ptr<QaClient> client = nullptr,
                                                 RecurrentEncoderConfig recurrent = {}) {
  switch (kind) {
    case EncodingKind::StateOneHot: return std::make_unique<StateOneHotEncoder>(bestiary.size());
    case EncodingKind::Recurrent: return std::make_unique<RecurrentEncoder>(seed, recurrent);
    case EncodingKind::FrozenLM: return std::make_unique<FrozenLmEncoder>(seed);
    case EncodingKind::QAModel:
      return std::make_unique<QaEncoder>(client ? std::move(client) : std::make_shared<MockQaClient>());
    case EncodingKind::GroundTruth: return std::make_unique<GroundTruthEncoder>();
  }
  throw ConfigError("unknown encoding kind");
}

}  // namespace qf
