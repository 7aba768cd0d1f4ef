#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "qf/extraction.hpp"

using namespace qf;

namespace {
const std::string kHellHound = "It resists fire. Unlike the hell hound, the kobold has a fire attack.";
}

TEST(Prompts, ExactStrings) {
  EXPECT_EQ(build_questions(QaTask::Resistance), (std::vector<std::string>{"What is it resistant to?", "What is it's resistance?"}));
  EXPECT_EQ(build_questions(QaTask::Attack), (std::vector<std::string>{"What attack does it do?", "What type of damage does it do?"}));
}

TEST(Prompts, IntentOfEveryPrompt) {
  for (const auto& q : build_questions(QaTask::Resistance)) EXPECT_EQ(classify_question(q), QuestionIntent::Resistance);
  for (const auto& q : build_questions(QaTask::Attack)) EXPECT_EQ(classify_question(q), QuestionIntent::Attack);
  EXPECT_EQ(classify_question("Where does it live?"), QuestionIntent::None);
}

TEST(SplitSentences, OnTerminalPunctuationFollowedBySpace) {
  EXPECT_EQ(split_sentences("A b. C d! E f? G"), (std::vector<std::string>{"A b.", "C d!", "E f?", "G"}));
  EXPECT_EQ(split_sentences("v1.2 is fine."), (std::vector<std::string>{"v1.2 is fine."}));
  EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(PageSubject, FromOpeningSentence) {
  EXPECT_EQ(page_subject("Zorkal is a beast found in the swamp. It bites."), std::optional<std::string>("Zorkal"));
  EXPECT_EQ(page_subject("The gnome lord is a humanoid."), std::optional<std::string>("gnome lord"));
  EXPECT_EQ(page_subject("It is a beast."), std::nullopt);
  EXPECT_EQ(page_subject("Resists fire."), std::nullopt);
}

TEST(MockAnswer, ResistanceFiltersForeignSubject) {
  EXPECT_EQ(mock_answer("What is it resistant to?", kHellHound), "It resists fire.");
}

TEST(MockAnswer, AttackDistractorExcluded) { EXPECT_EQ(mock_answer("What attack does it do?", kHellHound), ""); }

TEST(MockAnswer, NoMatchingSentence) {
  EXPECT_EQ(mock_answer("What is it resistant to?", "It is small. It eats lichen."), "");
  EXPECT_EQ(mock_answer("Where is it?", kHellHound), "");
}

TEST(MockAnswer, JoinsInDocumentOrderAndAcceptsTitleSubject) {
  const std::string ctx = "Grob is a beast. It resists cold. Kobold resists acid. Grob has resistance to sleep.";
  EXPECT_EQ(mock_answer("What is it resistant to?", ctx), "It resists cold.; Grob has resistance to sleep.");
}

TEST(MockAnswer, ExtractiveOverGeneratedPages) {
  const auto& corpus = qf_test::default_corpus(1.0);
  int checked = 0;
  for (const auto& [id, doc] : corpus) {
    if (++checked > 60) break;
    for (auto task : {QaTask::Resistance, QaTask::Attack}) {
      for (const auto& q : build_questions(task)) {
        const auto a = mock_answer(q, doc.text);
        EXPECT_EQ(a, mock_answer(q, doc.text));
        if (a.empty()) continue;
        std::size_t start = 0;
        while (start <= a.size()) {
          auto end = a.find("; ", start);
          const auto piece = a.substr(start, end == std::string::npos ? std::string::npos : end - start);
          EXPECT_NE(doc.text.find(piece), std::string::npos) << piece;
          if (end == std::string::npos) break;
          start = end + 2;
        }
      }
    }
  }
}

TEST(Endpoint, Parsing) {
  auto e = parse_endpoint("http://localhost:8080/qa");
  EXPECT_EQ(e.scheme_host_port, "http://localhost:8080");
  EXPECT_EQ(e.base_path, "/qa");
  e = parse_endpoint("localhost:9");
  EXPECT_EQ(e.scheme_host_port, "http://localhost:9");
  EXPECT_EQ(e.base_path, "");
}

TEST(Endpoint, RejectsMalformedUrls) {
  for (const char* bad : {"not a url", "https://secure.example", "http://", "http://:8080", "ftp://host"}) {
    EXPECT_THROW(parse_endpoint(bad), ConfigError) << bad;
  }
}

class WireProtocol : public ::testing::Test {
 protected:
  void SetUp() override { port_ = server_.start(); }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  QaServer server_{std::make_shared<MockQaClient>()};
  int port_ = 0;
};

TEST_F(WireProtocol, HealthReportsModel) {
  RemoteQaClient client(url());
  const auto h = client.health();
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["model"], std::string(kMockModelId));
  EXPECT_EQ(client.model_id(), kMockModelId);
}

TEST_F(WireProtocol, ConformanceFixture) {
  RemoteQaClient client(url());
  EXPECT_NE(client.answer("What is it resistant to?", "It is resistant to fire.").find("fire"), std::string::npos);
}

TEST_F(WireProtocol, RawJsonShapes) {
  httplib::Client http(url());
  auto res = http.Post("/v1/answer", R"({"question":"What is it resistant to?","context":"It resists fire."})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body), (nlohmann::json{{"answer", "It resists fire."}}));
  res = http.Post("/v1/answer", R"({"question":1})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(WireProtocol, BatchPreservesOrder) {
  RemoteQaClient client(url());
  std::vector<QaRequest> items{{"What attack does it do?", "It has a bite attack."},
                               {"What is it resistant to?", "It resists cold."},
                               {"What is it resistant to?", "Nothing here."}};
  EXPECT_EQ(client.answer_batch(items), (std::vector<std::string>{"It has a bite attack.", "It resists cold.", ""}));
}

TEST_F(WireProtocol, RemoteAndInProcessExtractIdentically) {
  RemoteQaClient remote(url());
  MockQaClient local;
  const auto& corpus = qf_test::default_corpus(1.0);
  for (int id : sample_labeled_subset(qf_test::default_bestiary(), 20, 98)) {
    const auto& doc = corpus.at(id);
    EXPECT_EQ(qa_extract(doc, resistance_vocabulary(), remote, QaTask::Resistance),
              qa_extract(doc, resistance_vocabulary(), local, QaTask::Resistance));
    EXPECT_EQ(qa_extract(doc, attack_vocabulary(), remote, QaTask::Attack),
              qa_extract(doc, attack_vocabulary(), local, QaTask::Attack));
  }
}

TEST(RemoteClient, RetriesThenRaisesTransportError) {
  int port = 0;
  {
    QaServer probe(std::make_shared<MockQaClient>());
    port = probe.start();
  }
  RemoteQaClient client("http://127.0.0.1:" + std::to_string(port), RemoteOptions{2, {1, 1}, 1});
  try {
    client.answer("What is it resistant to?", "It resists fire.");
    FAIL() << "expected TransportError";
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
}

TEST(RemoteClient, ExtractionErrorCarriesQuestionIndex) {
  struct SecondFails : QaClient {
    int calls = 0;
    std::string answer(const std::string&, const std::string&) override {
      if (++calls == 2) throw TransportError("boom", 3);
      return "It resists fire.";
    }
    std::string model_id() const override { return "x"; }
  } client;
  Document doc{0, "x", "It resists fire.", DocumentSource::Synthetic};
  try {
    qa_extract(doc, resistance_vocabulary(), client, QaTask::Resistance);
    FAIL() << "expected ExtractionError";
  } catch (const ExtractionError& e) {
    EXPECT_EQ(e.question_index(), 1u);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
}
