#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "stabaudit/judge_client.hpp"

using namespace stabaudit;

namespace {

Rubric eight_question_rubric() {
  Rubric rubric;
  rubric.scenario_id = "A";
  rubric.test_set = TestSet::Objective;
  rubric.categories = {QuestionCategory::InstructionCompleteness,
                       QuestionCategory::FormatAdherence};
  for (int i = 1; i <= 8; ++i) {
    RubricQuestion q;
    q.id = "A-obj-Q" + std::to_string(i);
    q.text = "Is requirement " + std::to_string(i) + " satisfied?";
    q.category = i <= 4 ? QuestionCategory::InstructionCompleteness
                        : QuestionCategory::FormatAdherence;
    q.test_set = TestSet::Objective;
    q.strategy = Strategy::Assertion;
    q.scenario_id = "A";
    rubric.questions.push_back(std::move(q));
  }
  rubric.validated = true;
  return rubric;
}

std::string well_formed_response(const Rubric& rubric, int drop = -1,
                                 const std::string& answer = "Yes") {
  ordered_json doc = ordered_json::object();
  for (const auto category : rubric.categories) {
    doc[std::string(category_name(category))] = ordered_json::array();
  }
  int index = 0;
  for (const auto& q : rubric.questions) {
    if (index++ == drop) continue;
    ordered_json item;
    item["question"] = q.text;
    item["justification"] = "Checked directly against the output.";
    item["answer"] = answer;
    doc[std::string(category_name(q.category))].push_back(item);
  }
  return doc.dump(2);
}

// Serves canned responses on a background thread; port auto-assigned.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ProviderConfig http_config(const std::string& endpoint, int max_retries = 1) {
  ProviderConfig cfg;
  cfg.id = "test";
  cfg.endpoint_url = endpoint;
  cfg.model_id = "test-model";
  cfg.max_retries = max_retries;
  cfg.timeout_ms = 2000;
  cfg.base_backoff_ms = 1;
  return cfg;
}

}  // namespace

TEST_CASE("build_judge_prompt substitutes all three slots") {
  const auto rubric = eight_question_rubric();
  const auto prompt = build_judge_prompt("System instructions.", "Model output.", rubric);

  CHECK(prompt.find("Do not skip any questions from the rubric.") != std::string::npos);
  CHECK(prompt.find("strict and fair evaluator") != std::string::npos);
  CHECK(prompt.find("System instructions.") != std::string::npos);
  CHECK(prompt.find("Model output.") != std::string::npos);
  CHECK(prompt.find("Is requirement 8 satisfied?") != std::string::npos);
  CHECK(prompt.find("{filled_prompt}") == std::string::npos);
  CHECK(prompt.find("{categorized_rubric_json}") == std::string::npos);

  CHECK(build_judge_prompt("System instructions.", "Model output.", rubric) == prompt);

  CHECK_THROWS_AS(build_judge_prompt("System instructions.", "", rubric), Error);
  auto unvalidated = rubric;
  unvalidated.validated = false;
  CHECK_THROWS_MATCHES(build_judge_prompt("a", "b", unvalidated), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::UnvalidatedRubric;
                       }));
}

TEST_CASE("invoke: canned response comes back through the text path") {
  LocalServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    REQUIRE(body["model"] == "test-model");
    REQUIRE(body["temperature"] == 0.0);
    REQUIRE(body["messages"][0]["role"] == "user");
    nlohmann::json reply;
    reply["choices"] = {{{"message", {{"role", "assistant"}, {"content", "canned"}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  CHECK(invoke(http_config(server.endpoint()), "prompt") == "canned");
}

TEST_CASE("invoke: 401 is an immediate auth error") {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
    res.set_content("{\"error\": \"bad key\"}", "application/json");
  });
  CHECK_THROWS_MATCHES(invoke(http_config(server.endpoint(), 3), "prompt"), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::Auth; }));
  CHECK(hits == 1);
}

TEST_CASE("invoke: transport failures retry max_retries+1 times then raise Transport") {
  // Nothing listens here; connections are refused immediately.
  auto cfg = http_config("http://127.0.0.1:1/v1/chat/completions", 2);
  CHECK_THROWS_MATCHES(invoke(cfg, "prompt"), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::Transport; }));
}

TEST_CASE("invoke: 5xx retries then surfaces Provider with the body") {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
    res.set_content("overloaded", "text/plain");
  });
  try {
    invoke(http_config(server.endpoint(), 2), "prompt");
    FAIL("expected Provider error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Provider);
    CHECK(e.detail().find("overloaded") != std::string::npos);
  }
  CHECK(hits == 3);
}

TEST_CASE("invoke: missing credential env is an auth error") {
  auto cfg = http_config("http://127.0.0.1:1/v1/chat/completions");
  cfg.credential_env = "STABAUDIT_TEST_MISSING_CREDENTIAL";
  CHECK_THROWS_MATCHES(invoke(cfg, "prompt"), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::Auth; }));
}

TEST_CASE("invoke: mock endpoints answer in-process") {
  ProviderConfig cfg;
  cfg.endpoint_url = "mock:static:hello";
  CHECK(invoke(cfg, "anything") == "hello");

  const auto rubric = eight_question_rubric();
  cfg.endpoint_url = "mock:judge-yes";
  const auto raw = invoke(cfg, build_judge_prompt("sys", "out", rubric));
  const auto items = parse_judge_output(raw, rubric);
  REQUIRE(items.size() == 8);
  for (const auto& item : items) CHECK(item.answer == Answer::Yes);

  // Bit-identical across calls.
  CHECK(invoke(cfg, build_judge_prompt("sys", "out", rubric)) == raw);
}

TEST_CASE("parse_judge_output: complete response in rubric order") {
  const auto rubric = eight_question_rubric();
  const auto items = parse_judge_output(well_formed_response(rubric), rubric);
  REQUIRE(items.size() == 8);
  for (size_t i = 0; i < items.size(); ++i) {
    CHECK(items[i].question == rubric.questions[i].text);
    CHECK(items[i].answer == Answer::Yes);
    CHECK_FALSE(items[i].justification.empty());
  }
}

TEST_CASE("parse_judge_output: fenced and bare bodies parse identically") {
  const auto rubric = eight_question_rubric();
  const auto bare = well_formed_response(rubric);
  const auto fenced = "```json\n" + bare + "\n```";
  const auto a = parse_judge_output(bare, rubric);
  const auto b = parse_judge_output(fenced, rubric);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].question == b[i].question);
    CHECK(a[i].answer == b[i].answer);
  }
}

TEST_CASE("parse_judge_output: case-insensitive answers normalize") {
  const auto rubric = eight_question_rubric();
  for (const std::string answer : {"yes", "YES", "Yes"}) {
    const auto items = parse_judge_output(well_formed_response(rubric, -1, answer), rubric);
    CHECK(items[0].answer == Answer::Yes);
  }
  for (const std::string answer : {"no", "NO", "No"}) {
    const auto items = parse_judge_output(well_formed_response(rubric, -1, answer), rubric);
    CHECK(items[0].answer == Answer::No);
  }
}

TEST_CASE("parse_judge_output: error taxonomy") {
  const auto rubric = eight_question_rubric();

  CHECK_THROWS_MATCHES(parse_judge_output("not json at all", rubric), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::MalformedJson; }));

  CHECK_THROWS_MATCHES(parse_judge_output(well_formed_response(rubric, 3), rubric), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::MissingQuestion &&
                                e.detail() == "A-obj-Q4";
                       }));

  CHECK_THROWS_MATCHES(parse_judge_output(well_formed_response(rubric, -1, "maybe"), rubric),
                       Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::InvalidAnswer;
                       }));

  // One extra self-invented question.
  auto doc = ordered_json::parse(well_formed_response(rubric));
  ordered_json invented;
  invented["question"] = "Did the judge make this up?";
  invented["justification"] = "Entirely.";
  invented["answer"] = "Yes";
  doc["Format Adherence"].push_back(invented);
  CHECK_THROWS_MATCHES(parse_judge_output(doc.dump(), rubric), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::InventedQuestion;
                       }));

  // Unknown top-level category.
  auto mislabeled = ordered_json::parse(well_formed_response(rubric));
  mislabeled["Creativity"] = ordered_json::array();
  CHECK_THROWS_AS(parse_judge_output(mislabeled.dump(), rubric), Error);

  // Unvalidated rubric is refused outright.
  auto unvalidated = rubric;
  unvalidated.validated = false;
  CHECK_THROWS_MATCHES(parse_judge_output(well_formed_response(rubric), unvalidated), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::UnvalidatedRubric;
                       }));
}

TEST_CASE("parse_judge_output never returns a question set differing from the rubric") {
  const auto rubric = eight_question_rubric();
  // Shuffle categories/items: assignment to the wrong (but known) category
  // is tolerated; the question set is what must match.
  auto doc = ordered_json::parse(well_formed_response(rubric));
  auto moved = doc["Format Adherence"][0];
  doc["Format Adherence"].erase(0);
  doc["Instruction Completeness"].push_back(moved);
  const auto items = parse_judge_output(doc.dump(), rubric);
  REQUIRE(items.size() == rubric.questions.size());
  for (size_t i = 0; i < items.size(); ++i) {
    CHECK(items[i].question == rubric.questions[i].text);
  }
}
