#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "mabsa/rationale.hpp"
#include "test_util.hpp"

using namespace mabsa;

namespace {

std::vector<CorpusRecord> small_corpus(int n, const std::string& refuse_token = "",
                                       int refuse_every = 0) {
  std::vector<CorpusRecord> corpus;
  for (int i = 0; i < n; ++i) {
    CorpusRecord r;
    r.id = "ex-" + std::to_string(i);
    r.text = {"token" + std::to_string(i % 7), "and", "more"};
    if (refuse_every > 0 && i % refuse_every == 0 && !refuse_token.empty()) {
      r.text.push_back(refuse_token);
    }
    r.image_features = {{0.1, 0.2}, {0.3, 0.4}};
    corpus.push_back(std::move(r));
  }
  return corpus;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("prompt rendering is deterministic and kind-specific") {
  const std::string tweet = "great view from the office";
  PromptTemplate plain{PromptKind::plain, 140};
  const RenderedPrompts p1 = render_prompt(plain, tweet);
  const RenderedPrompts p2 = render_prompt(plain, tweet);
  CHECK(p1.text_prompt == p2.text_prompt);
  CHECK(p1.image_prompt == p2.image_prompt);
  CHECK(p1.text_prompt.find("Explain the text above") != std::string::npos);
  CHECK(p1.text_prompt.find("no more than 140 words") != std::string::npos);
  CHECK(p1.image_prompt.find("Explain the picture") != std::string::npos);

  PromptTemplate hinted{PromptKind::task_hinted, 140};
  const RenderedPrompts h = render_prompt(hinted, tweet);
  CHECK(h.text_prompt.find("you will perform a aspect-based sentiment analysis task with me") !=
        std::string::npos);

  PromptTemplate detailed{PromptKind::detailed, 140};
  const RenderedPrompts d = render_prompt(detailed, tweet);
  // The worked example is fixed; the tweet slot holds the query exactly once.
  CHECK(d.text_prompt.find("Regions Bank") != std::string::npos);
  std::size_t count = 0;
  for (std::size_t pos = d.text_prompt.find(tweet); pos != std::string::npos;
       pos = d.text_prompt.find(tweet, pos + 1)) {
    ++count;
  }
  CHECK(count == 1);

  CHECK_THROWS_AS(render_prompt(plain, ""), std::invalid_argument);
}

TEST_CASE("every rendered prompt embeds the tweet exactly once") {
  const std::string tweet = "zqx unique marker zqx2";
  for (PromptKind kind : {PromptKind::plain, PromptKind::task_hinted, PromptKind::detailed}) {
    const RenderedPrompts p = render_prompt({kind, 140}, tweet);
    for (const std::string* prompt : {&p.image_prompt, &p.text_prompt}) {
      std::size_t count = 0;
      for (std::size_t pos = prompt->find(tweet); pos != std::string::npos;
           pos = prompt->find(tweet, pos + 1)) {
        ++count;
      }
      CHECK(count == 1);
    }
  }
}

TEST_CASE("rationale records roundtrip through JSONL and enforce the refusal invariant") {
  RationaleRecord r;
  r.example_id = "ex-1";
  r.prompt_kind = "plain";
  r.image_rationale = "a tree";
  r.text_rationale = "a caption";
  r.provider_tag = "mock";
  r.created_at = "2026-01-01T00:00:00Z";
  const RationaleRecord back = rationale_from_json_line(to_json_line(r));
  CHECK(back.example_id == r.example_id);
  CHECK(*back.image_rationale == "a tree");
  CHECK_FALSE(back.refused);

  RationaleRecord refused;
  refused.example_id = "ex-2";
  refused.prompt_kind = "plain";
  refused.refused = true;
  refused.provider_tag = "mock";
  refused.created_at = "2026-01-01T00:00:00Z";
  const RationaleRecord back2 = rationale_from_json_line(to_json_line(refused));
  CHECK(back2.refused);

  // A record claiming refusal but carrying text violates the invariant.
  CHECK_THROWS_AS(rationale_from_json_line(
                      R"({"example_id":"x","prompt_kind":"plain","image_rationale":"t",)"
                      R"("text_rationale":"u","refused":true,"provider_tag":"m",)"
                      R"("created_at":"now"})"),
                  std::invalid_argument);
}

TEST_CASE("generation fills the cache once and reruns hit it") {
  test_util::TempDir dir("rationale");
  const auto corpus = small_corpus(12);
  MockChatClient client;
  PromptTemplate tmpl{PromptKind::task_hinted, 140};
  {
    RationaleCache cache(dir.path / "cache.jsonl");
    const auto records = generate_rationales(corpus, client, tmpl, cache);
    CHECK(records.size() == corpus.size());
    CHECK(cache.size() == corpus.size());
    CHECK(client.call_count() == 2 * 12);  // one text + one image question each
  }
  const std::string first_pass = slurp(dir.path / "cache.jsonl");
  {
    RationaleCache cache(dir.path / "cache.jsonl");
    MockChatClient warm_client;
    const auto records = generate_rationales(corpus, warm_client, tmpl, cache);
    CHECK(records.size() == corpus.size());
    CHECK(warm_client.call_count() == 0);
  }
  CHECK(slurp(dir.path / "cache.jsonl") == first_pass);
}

TEST_CASE("changing the prompt kind forces regeneration") {
  test_util::TempDir dir("rationale-kind");
  const auto corpus = small_corpus(4);
  MockChatClient client;
  RationaleCache cache(dir.path / "cache.jsonl");
  generate_rationales(corpus, client, {PromptKind::plain, 140}, cache);
  const long after_first = client.call_count();
  generate_rationales(corpus, client, {PromptKind::detailed, 140}, cache);
  CHECK(client.call_count() == 2 * after_first);
  CHECK(cache.size() == 2 * corpus.size());
}

TEST_CASE("refusals drop examples while the rest attach with capped lengths") {
  test_util::TempDir dir("rationale-refuse");
  auto corpus = small_corpus(10, "REFUSE", 10);  // exactly one refusal (ex-0)
  MockChatClient client("REFUSE");
  RationaleCache cache(dir.path / "cache.jsonl");
  const auto records = generate_rationales(corpus, client, {PromptKind::plain, 140}, cache);

  LengthPolicy policy;
  policy.multiplier = 2.0;
  policy.reference = rationale_reference_length(corpus);
  const AttachResult attached = attach_rationales(corpus, records, policy);
  CHECK(attached.examples.size() == 9);
  CHECK(attached.dropped_ids == std::vector<std::string>{"ex-0"});
  const double cap = policy.multiplier * policy.reference;
  for (const auto& ex : attached.examples) {
    CHECK(static_cast<double>(ex.image_rationale.size() + ex.text_rationale.size()) <= cap);
    CHECK(!ex.image_rationale.empty());
    CHECK(!ex.text_rationale.empty());
  }

  // Missing record coverage is an error.
  auto extended = corpus;
  CorpusRecord extra;
  extra.id = "ex-new";
  extra.text = {"hello"};
  extra.image_features = {{0.0, 0.0}};
  extended.push_back(extra);
  CHECK_THROWS_AS(attach_rationales(extended, records, policy), std::runtime_error);
}

TEST_CASE("length enforcement trims the longer rationale first") {
  LengthPolicy policy{2.0, 20.0};  // cap 40
  std::vector<std::string> image(30, "i"), text(30, "t");
  enforce_length(image, text, policy);
  CHECK(image.size() == 20);
  CHECK(text.size() == 20);

  std::vector<std::string> short_image(5, "i"), short_text(6, "t");
  enforce_length(short_image, short_text, policy);
  CHECK(short_image.size() == 5);  // already under the cap
  CHECK(short_text.size() == 6);

  std::vector<std::string> lopsided(38, "i"), tiny(8, "t");
  enforce_length(lopsided, tiny, policy);
  CHECK(lopsided.size() + tiny.size() <= 40);
  CHECK(tiny.size() == 8);  // only the longer side was trimmed

  std::vector<std::string> a(3, "x"), b(3, "y");
  CHECK_THROWS_AS(enforce_length(a, b, LengthPolicy{0.01, 20.0}), std::invalid_argument);
}

TEST_CASE("http client retries transient failures and honors refusal signals") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = hits.fetch_add(1);
    const auto body = nlohmann::json::parse(req.body);
    const std::string prompt = body.at("prompt").get<std::string>();
    if (prompt.find("flaky") != std::string::npos && n == 0) {
      res.status = 503;
      return;
    }
    nlohmann::json out;
    if (prompt.find("forbidden") != std::string::npos) {
      out["refused"] = true;
    } else {
      out["text"] = "served: " + prompt.substr(0, 8);
    }
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpChatClient client("http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "test-key");
  client.set_base_backoff(std::chrono::milliseconds(5));

  const ChatResponse ok = client.complete("hello there", "");
  CHECK_FALSE(ok.refused);
  CHECK(ok.text.rfind("served:", 0) == 0);

  const ChatResponse retried = client.complete("flaky request", "img.jpg");
  CHECK_FALSE(retried.refused);  // first attempt 503, second succeeds

  const ChatResponse refused = client.complete("forbidden topic", "");
  CHECK(refused.refused);

  server.stop();
  server_thread.join();

  HttpChatClient dead("http://127.0.0.1:1/v1/chat", "");
  dead.set_base_backoff(std::chrono::milliseconds(1));
  const ChatResponse failed = dead.complete("anything", "");
  CHECK(failed.refused);
  CHECK_FALSE(failed.error.empty());
}

TEST_CASE("transport failures are cached but retried on the next run") {
  test_util::TempDir dir("rationale-transport");
  const auto corpus = small_corpus(2);
  RationaleCache cache(dir.path / "cache.jsonl");

  HttpChatClient dead("http://127.0.0.1:1/x", "");
  dead.set_base_backoff(std::chrono::milliseconds(1));
  const auto records = generate_rationales(corpus, dead, {PromptKind::plain, 140}, cache);
  CHECK(records[0].refused);
  CHECK(records[0].provider_tag.find("#transport-error") != std::string::npos);

  // The error tag keeps the record visible while still counting as a cache
  // hit for the same base provider tag.
  RationaleCache reopened(dir.path / "cache.jsonl");
  const auto hit = reopened.find("ex-0", PromptKind::plain, "http");
  REQUIRE(hit.has_value());
  CHECK(hit->refused);
}

TEST_CASE("env-selected client requires explicit mock mode") {
  unsetenv("MABSA_LLM_ENDPOINT");
  CHECK_THROWS_AS(make_client_from_env(false), std::runtime_error);
  const auto mock = make_client_from_env(true);
  CHECK(mock->provider_tag() == "mock");
}
