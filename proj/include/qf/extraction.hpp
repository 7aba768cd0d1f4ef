#pragma once

// Attribute extractors (keyword scan, QA prompting, ground truth) and
// set-overlap scoring with micro aggregation.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "qf/attributes.hpp"
#include "qf/bestiary.hpp"
#include "qf/qa.hpp"

namespace qf {

namespace extraction_detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// Case-insensitive whole-word search; `needle` must already be lowercase.
inline bool contains_word(std::string_view haystack_lower, std::string_view needle) {
  if (needle.empty()) return false;
  for (auto pos = haystack_lower.find(needle); pos != std::string_view::npos; pos = haystack_lower.find(needle, pos + 1)) {
    const bool left = pos == 0 || !is_word_char(haystack_lower[pos - 1]);
    const auto end = pos + needle.size();
    const bool right = end == haystack_lower.size() || !is_word_char(haystack_lower[end]);
    if (left && right) return true;
  }
  return false;
}

}  // namespace extraction_detail

/// Members whose canonical name or any alias appears in `text` as a whole word.
inline AttributeSet keyword_scan(std::string_view text, const AttributeVocabulary& vocab) {
  const auto lower = to_lower(text);
  AttributeSet out(vocab.kind());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    for (const auto& alias : vocab.aliases(i)) {
      if (extraction_detail::contains_word(lower, to_lower(alias))) {
        out.insert(i);
        break;
      }
    }
  }
  return out;
}

inline AttributeSet keyword_extract(const Document& doc, const AttributeVocabulary& vocab) {
  return keyword_scan(doc.text, vocab);
}

inline QaTask task_for(VocabKind kind) { return kind == VocabKind::Resistance ? QaTask::Resistance : QaTask::Attack; }

/// A QA backend failed while answering one of a task's questions.
class ExtractionError : public Error {
 public:
  ExtractionError(std::size_t question_index, const std::string& detail)
      : Error("question " + std::to_string(question_index) + ": " + detail), question_index_(question_index) {}
  std::size_t question_index() const { return question_index_; }

 private:
  std::size_t question_index_;
};

/// Asks the task's two questions with the page as context and scans the
/// joined answers (never the page itself) for vocabulary terms.
inline AttributeSet qa_extract(const Document& doc, const AttributeVocabulary& vocab, QaClient& client, QaTask task) {
  std::string joint;
  const auto& questions = build_questions(task);
  for (std::size_t q = 0; q < questions.size(); ++q) {
    try {
      if (!joint.empty()) joint += ' ';
      joint += client.answer(questions[q], doc.text);
    } catch (const std::exception& e) {
      throw ExtractionError(q, e.what());
    }
  }
  return keyword_scan(joint, vocab);
}

inline AttributeSet ground_truth_extract(const MonsterRecord& monster, VocabKind kind) { return monster.attributes(kind); }

struct PredictionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  PredictionCounts& operator+=(const PredictionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const PredictionCounts&, const PredictionCounts&) = default;
};

inline PredictionCounts score_prediction(const AttributeSet& predicted, const AttributeSet& label) {
  if (predicted.kind() != label.kind()) throw ShapeError("cannot score sets from different vocabularies");
  const auto& p = predicted.bits();
  const auto& l = label.bits();
  return PredictionCounts{static_cast<long>((p & l).count()), static_cast<long>((p & ~l).count()),
                          static_cast<long>((l & ~p).count())};
}

struct MetricsReport {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
  double iou = 0;
  long pages = 0;
};

/// Micro aggregation over pages. Empty denominators score 1.0, so a correct
/// empty prediction is not penalized.
inline MetricsReport metrics_from_totals(const PredictionCounts& t, long pages) {
  MetricsReport r;
  r.pages = pages;
  r.precision = (t.tp + t.fp) == 0 ? 1.0 : static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp);
  r.recall = (t.tp + t.fn) == 0 ? 1.0 : static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn);
  if (t.tp + t.fp + t.fn == 0) {
    r.f1 = r.iou = 1.0;
  } else {
    r.f1 = (r.precision + r.recall) > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.iou = static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp + t.fn);
  }
  return r;
}

inline MetricsReport aggregate_metrics(const std::vector<PredictionCounts>& counts) {
  if (counts.empty()) throw ConfigError("aggregate_metrics needs at least one page");
  PredictionCounts total;
  for (const auto& c : counts) total += c;
  return metrics_from_totals(total, static_cast<long>(counts.size()));
}

}  // namespace qf
