#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "llmtaxo/corpus.hpp"
#include "llmtaxo/embedding.hpp"
#include "llmtaxo/error.hpp"
#include "llmtaxo/providers.hpp"
#include "llmtaxo/util.hpp"
#include "support/helpers.hpp"

using namespace llmtaxo;
using namespace llmtaxo::providers;
using nlohmann::json;

namespace {

/// Local HTTP server for the wire-contract tests. Stops on destruction.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

class Flaky : public ChatProvider {
 public:
  explicit Flaky(int failures) : failures_(failures) {}
  std::string id() const override { return "flaky"; }
  std::string model() const override { return "flaky"; }

 protected:
  std::string do_complete(const std::vector<ChatMessage>&, double) override {
    if (failures_-- > 0) throw ProviderUnavailable("try again");
    return "ok";
  }

 private:
  int failures_;
};

const std::vector<ChatMessage> kHello{{"user", "hello"}};
const RetryPolicy kFastRetry{3, std::chrono::milliseconds(1)};

}  // namespace

TEST_SUITE("providers") {
  TEST_CASE("chat request and response shapes") {
    auto body = json::parse(chat_request_body("m1", 0.001, {{"system", "s"}, {"user", "u"}}));
    CHECK(body["model"] == "m1");
    CHECK(body["temperature"] == 0.001);
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "u");
    CHECK_FALSE(body.contains("seed"));
    CHECK(json::parse(chat_request_body("m1", 0, {}, 9))["seed"] == 9);
    CHECK(parse_chat_response(R"({"choices":[{"message":{"content":"hi"}}]})") == "hi");
    CHECK_THROWS_AS(parse_chat_response(R"({"choices":[]})"), ProviderMalformedResponse);
    CHECK_THROWS_AS(parse_chat_response("<html>"), ProviderMalformedResponse);
  }

  TEST_CASE("scripted replies: hash, then substring, then default") {
    auto chat = ScriptedChat::from_json(
        json{{"by_hash", {{sha256_hex("exact prompt"), "by hash"}}},
             {"by_substring", json::array({json::array({"needle", "by substring"})})}}
            .dump());
    CHECK(chat.complete({{"user", "exact prompt"}}, 0) == "by hash");
    CHECK(chat.complete({{"user", "has a needle in it"}}, 0) == "by substring");
    CHECK_THROWS_AS(chat.complete({{"user", "nothing"}}, 0), ProviderMalformedResponse);
    chat.set_default("fallback");
    CHECK(chat.complete({{"user", "nothing"}}, 0) == "fallback");
    CHECK(chat.calls() == 4);
  }

  TEST_CASE("retry recovers from transient failures and gives up after the budget") {
    Flaky twice(2);
    CHECK(complete_with_retry(twice, kHello, 0, kFastRetry) == "ok");
    CHECK(twice.calls() == 3);
    Flaky always(10);
    CHECK_THROWS_AS(complete_with_retry(always, kHello, 0, kFastRetry), ProviderUnavailable);
    CHECK(always.calls() == 3);
  }

  TEST_CASE("response cache persists across instances") {
    testing::TempDir dir("respcache");
    ScriptedChat chat;
    chat.set_default("reply");
    bool hit = true;
    {
      ResponseCache cache(dir / "c.jsonl");
      CHECK(cached_complete(chat, &cache, "p", 0, kFastRetry, &hit) == "reply");
      CHECK_FALSE(hit);
    }
    ResponseCache cache(dir / "c.jsonl");
    CHECK(cache.size() == 1);
    CHECK(cached_complete(chat, &cache, "p", 0, kFastRetry, &hit) == "reply");
    CHECK(hit);
    CHECK(chat.calls() == 1);
    CHECK(ResponseCache::key_for(chat, "p") != ResponseCache::key_for(chat, "q"));
  }

  TEST_CASE("OpenAI-compatible chat over HTTP") {
    LocalServer srv;
    json seen;
    std::string auth;
    srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      seen = json::parse(req.body);
      auth = req.get_header_value("Authorization");
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Broad topic: X"}}]})",
                      "application/json");
    });
    srv.server().Post("/busy", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
    srv.server().Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });

    OpenAIChat chat({srv.url("/v1/chat/completions"), "gpt-test", "sk-123", 5.0, std::nullopt});
    CHECK(chat.complete(kHello, 0.001) == "Broad topic: X");
    CHECK(seen["model"] == "gpt-test");
    CHECK(seen["messages"][0]["content"] == "hello");
    CHECK(auth == "Bearer sk-123");

    OpenAIChat busy({srv.url("/busy"), "m", "", 5.0, std::nullopt});
    CHECK_THROWS_AS(busy.complete(kHello, 0), ProviderUnavailable);
    OpenAIChat bad({srv.url("/bad"), "m", "", 5.0, std::nullopt});
    CHECK_THROWS_AS(bad.complete(kHello, 0), ProviderMalformedResponse);
    OpenAIChat nobody({"http://127.0.0.1:1/none", "m", "", 1.0, std::nullopt});
    CHECK_THROWS_AS(nobody.complete(kHello, 0), ProviderUnavailable);
    CHECK_THROWS_AS(OpenAIChat({"", "m", "", 1.0, std::nullopt}), ConfigError);
  }

  TEST_CASE("remote embedder and scorer wire contracts") {
    LocalServer srv;
    json embed_req, score_req;
    srv.server().Post("/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
      embed_req = json::parse(req.body);
      json data = json::array();
      for (std::size_t i = 0; i < embed_req["input"].size(); ++i) data.push_back({{"embedding", {3.0, 4.0 + i}}});
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    srv.server().Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
      score_req = json::parse(req.body);
      res.set_content(R"({"results":[{"score":0.3},{"score":0.8}]})", "application/json");
    });

    embedding::RemoteEmbedder emb(srv.url("/embeddings"), "mini", "", 2, 5.0);
    std::vector<corpus::Claim> claims{{"a", "x", "a", 1}, {"b", "y", "b", 1}, {"c", "z", "c", 1}};
    auto v = embedding::embed_batch(claims, emb);
    REQUIRE(v.size() == 3);
    CHECK(embed_req["model"] == "mini");
    CHECK(v[0].values[0] == doctest::Approx(0.6));
    CHECK(v[0].values[1] == doctest::Approx(0.8));

    corpus::RemoteScorer scorer(srv.url("/score"), "", 5.0);
    std::vector<corpus::Post> posts{{"p", "Officials said so."}};
    auto s = corpus::score_claims(posts, scorer);
    CHECK(score_req["input_text"] == "Officials said so.");
    CHECK(s[0].score == doctest::Approx(0.8));
  }
}
