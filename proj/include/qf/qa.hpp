#pragma once

// Question prompts, the QA wire protocol, a remote HTTP client, and a
// deterministic extractive mock that stands in for a reading-comprehension
// model.

#include <cctype>
#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "qf/error.hpp"

namespace qf {

enum class QaTask { Resistance, Attack };

/// The two prompts per task. Reproduced byte-for-byte, including "it's".
inline const std::vector<std::string>& build_questions(QaTask task) {
  static const std::vector<std::string> resistance{"What is it resistant to?", "What is it's resistance?"};
  static const std::vector<std::string> attack{"What attack does it do?", "What type of damage does it do?"};
  return task == QaTask::Resistance ? resistance : attack;
}

struct QaRequest {
  std::string question;
  std::string context;
};

/// Raised when a remote backend cannot produce an answer.
class TransportError : public Error {
 public:
  TransportError(const std::string& detail, int attempts)
      : Error("QA transport failed after " + std::to_string(attempts) + " attempt(s): " + detail), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class QaClient {
 public:
  virtual ~QaClient() = default;
  virtual std::string answer(const std::string& question, const std::string& context) = 0;
  virtual std::vector<std::string> answer_batch(const std::vector<QaRequest>& items) {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& r : items) out.push_back(answer(r.question, r.context));
    return out;
  }
  virtual std::string model_id() const = 0;
};

// ---- text helpers shared with the mock ----

/// Splits on `.`, `!` or `?` followed by whitespace. Terminators stay with
/// their sentence; surrounding whitespace is dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0, e = current.size();
    while (b < e && std::isspace(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(current[e - 1]))) --e;
    if (e > b) out.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      flush();
    }
  }
  flush();
  return out;
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace qa_detail {

inline bool starts_with_word_ci(std::string_view sentence, std::string_view word) {
  if (word.empty() || sentence.size() < word.size()) return false;
  if (to_lower(sentence.substr(0, word.size())) != to_lower(word)) return false;
  return sentence.size() == word.size() || !std::isalnum(static_cast<unsigned char>(sentence[word.size()]));
}

inline std::string_view strip_article(std::string_view s) {
  for (std::string_view article : {"the ", "a ", "an "}) {
    if (s.size() > article.size() && to_lower(s.substr(0, article.size())) == article) return s.substr(article.size());
  }
  return s;
}

}  // namespace qa_detail

/// The page's subject as named by its opening "<Title> is …" sentence, or
/// nullopt when the page does not open that way.
inline std::optional<std::string> page_subject(std::string_view context) {
  const auto sentences = split_sentences(context);
  if (sentences.empty()) return std::nullopt;
  const auto lower = to_lower(sentences.front());
  const auto is = lower.find(" is ");
  if (is == std::string::npos || is == 0) return std::nullopt;
  auto subject = qa_detail::strip_article(std::string_view(sentences.front()).substr(0, is));
  int words = 1;
  for (char c : subject) words += c == ' ' ? 1 : 0;
  if (words > 4 || qa_detail::starts_with_word_ci(subject, "it")) return std::nullopt;
  return std::string(subject);
}

enum class QuestionIntent { None, Resistance, Attack };

inline QuestionIntent classify_question(std::string_view question) {
  const auto q = to_lower(question);
  if (q.find("resist") != std::string::npos) return QuestionIntent::Resistance;
  if (q.find("attack") != std::string::npos || q.find("damage") != std::string::npos) return QuestionIntent::Attack;
  return QuestionIntent::None;
}

/// Deterministic extractive answerer. Returns the "; "-joined context
/// sentences that match the question's intent and whose subject is "It" or
/// the page subject; "" when none qualify.
inline std::string mock_answer(std::string_view question, std::string_view context) {
  const auto intent = classify_question(question);
  if (intent == QuestionIntent::None) return "";
  const auto subject = page_subject(context);
  std::string answer;
  for (const auto& sentence : split_sentences(context)) {
    const auto lower = to_lower(sentence);
    const bool on_topic = intent == QuestionIntent::Resistance
                              ? lower.find("resist") != std::string::npos
                              : lower.find("attack") != std::string::npos || lower.find("damage") != std::string::npos;
    if (!on_topic) continue;
    const auto body = qa_detail::strip_article(sentence);
    const bool about_page = qa_detail::starts_with_word_ci(sentence, "it") ||
                            (subject && qa_detail::starts_with_word_ci(body, *subject));
    if (!about_page) continue;
    if (!answer.empty()) answer += "; ";
    answer += sentence;
  }
  return answer;
}

inline constexpr std::string_view kMockModelId = "qf-extractive-mock-v1";

class MockQaClient : public QaClient {
 public:
  std::string answer(const std::string& question, const std::string& context) override {
    return mock_answer(question, context);
  }
  std::string model_id() const override { return std::string(kMockModelId); }
};

// ---- wire protocol ----

inline nlohmann::json answer_request_json(const std::string& question, const std::string& context) {
  return nlohmann::json{{"question", question}, {"context", context}};
}

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string base_path;         // prefix before /v1/…, usually empty
};

inline Endpoint parse_endpoint(std::string url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  Endpoint e;
  e.scheme_host_port = path_start == std::string::npos ? url : url.substr(0, path_start);
  if (path_start != std::string::npos) {
    e.base_path = url.substr(path_start);
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  }
  if (e.scheme_host_port.find("://") == std::string::npos) e.scheme_host_port = "http://" + e.scheme_host_port;
  const auto host = e.scheme_host_port.substr(e.scheme_host_port.find("://") + 3);
  if (e.scheme_host_port.rfind("http://", 0) != 0 || host.empty() || host.front() == ':' ||
      host.find_first_of(" \t") != std::string::npos) {
    throw ConfigError("malformed QA service URL '" + url + "' (expected http://host[:port][/path])");
  }
  return e;
}

struct RemoteOptions {
  int retries = 2;
  std::vector<int> backoff_ms{100, 400};
  int timeout_seconds = 30;
};

/// Client for a QA service speaking the JSON-over-HTTP protocol.
class RemoteQaClient : public QaClient {
 public:
  explicit RemoteQaClient(std::string url, RemoteOptions options = {})
      : endpoint_(parse_endpoint(std::move(url))), options_(std::move(options)) {}

  std::string answer(const std::string& question, const std::string& context) override {
    const auto body = post("/v1/answer", answer_request_json(question, context));
    if (!body.contains("answer") || !body["answer"].is_string()) throw TransportError("malformed /v1/answer body", 1);
    return body["answer"].get<std::string>();
  }

  std::vector<std::string> answer_batch(const std::vector<QaRequest>& items) override {
    auto arr = nlohmann::json::array();
    for (const auto& r : items) arr.push_back(answer_request_json(r.question, r.context));
    const auto body = post("/v1/answer_batch", nlohmann::json{{"items", arr}});
    if (!body.contains("answers") || !body["answers"].is_array() || body["answers"].size() != items.size()) {
      throw TransportError("malformed /v1/answer_batch body", 1);
    }
    return body["answers"].get<std::vector<std::string>>();
  }

  /// GET /healthz; returns the parsed body or throws TransportError.
  nlohmann::json health() const {
    httplib::Client client(endpoint_.scheme_host_port);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    auto res = client.Get(endpoint_.base_path + "/healthz");
    if (!res) throw TransportError(httplib::to_string(res.error()), 1);
    if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status), 1);
    auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || body.value("status", "") != "ok" || !body.contains("model")) {
      throw TransportError("malformed /healthz body", 1);
    }
    return body;
  }

  std::string model_id() const override { return health().at("model").get<std::string>(); }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& payload) const {
    std::string detail;
    const int attempts = options_.retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) {
        const auto idx = std::min<std::size_t>(attempt - 1, options_.backoff_ms.size() - 1);
        std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms.empty() ? 0 : options_.backoff_ms[idx]));
      }
      httplib::Client client(endpoint_.scheme_host_port);
      client.set_connection_timeout(options_.timeout_seconds);
      client.set_read_timeout(options_.timeout_seconds);
      auto res = client.Post(endpoint_.base_path + path, payload.dump(), "application/json");
      if (!res) {
        detail = httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        detail = "HTTP " + std::to_string(res->status);
        continue;
      }
      auto body = nlohmann::json::parse(res->body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        detail = "malformed response body";
        continue;
      }
      return body;
    }
    throw TransportError(detail, attempts);
  }

  Endpoint endpoint_;
  RemoteOptions options_;
};

/// Serves any QaClient (normally the mock) behind the wire protocol on a
/// background thread. Used for conformance tests and `qf serve-mock`.
class QaServer {
 public:
  explicit QaServer(std::shared_ptr<QaClient> backend) : backend_(std::move(backend)) {
    server_.Post("/v1/answer", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("question") || !body.contains("context") ||
          !body["question"].is_string() || !body["context"].is_string()) {
        res.status = 400;
        res.set_content(R"({"error":"expected {question, context}"})", "application/json");
        return;
      }
      auto answer = backend_->answer(body["question"].get<std::string>(), body["context"].get<std::string>());
      res.set_content(nlohmann::json{{"answer", answer}}.dump(), "application/json");
    });
    server_.Post("/v1/answer_batch", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("items") || !body["items"].is_array()) {
        res.status = 400;
        res.set_content(R"({"error":"expected {items: [...]}"})", "application/json");
        return;
      }
      std::vector<QaRequest> items;
      for (const auto& item : body["items"]) {
        items.push_back({item.value("question", ""), item.value("context", "")});
      }
      res.set_content(nlohmann::json{{"answers", backend_->answer_batch(items)}}.dump(), "application/json");
    });
    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"status", "ok"}, {"model", backend_->model_id()}}.dump(), "application/json");
    });
  }

  ~QaServer() { stop(); }
  QaServer(const QaServer&) = delete;
  QaServer& operator=(const QaServer&) = delete;

  /// Binds (port 0 picks a free port) and starts serving; returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error("cannot bind QA server on " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Blocks serving on the calling thread.
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  std::shared_ptr<QaClient> backend_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace qf
