#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "asap/error.hpp"
#include "asap/llm.hpp"
#include "support.hpp"

using namespace asap;
using asap::testing::FakeTransport;
using asap::testing::ok_completion;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

HttpResponse status(int code, std::map<std::string, std::string> headers = {}) {
    HttpResponse r;
    r.status = code;
    r.body = "{\"error\":\"nope\"}";
    r.headers = std::move(headers);
    return r;
}

ModelParams http_params() {
    ModelParams p = ModelParams::for_summarization();
    p.backend = Backend::http;
    p.endpoint = "http://localhost:9/v1/";
    return p;
}

struct SleepLog {
    std::vector<std::chrono::milliseconds> delays;
    Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) { delays.push_back(d); };
    }
};

ClientOptions http_options(std::shared_ptr<FakeTransport> t, SleepLog& log) {
    ::setenv("ASAP_TEST_API_KEY", "sk-test", 1);
    ClientOptions o;
    o.api_key_env = "ASAP_TEST_API_KEY";
    o.transport = std::move(t);
    o.sleeper = log.sleeper();
    o.retry.max_attempts = 4;
    o.retry.initial_delay = std::chrono::milliseconds(100);
    o.retry.jitter = 0.25;
    return o;
}

const char* kTwoShot =
    "int a() {}\n# Function: a\nSummary: First summary.\n\n"
    "int b() {}\n# Function: b\nSummary: Nearest summary.\n\n"
    "int t() {}\n# Function: t\nSummary:";

}  // namespace

TEST(Mock, NearestExemplarSummary) {
    EXPECT_EQ(mock_complete(kTwoShot), "Nearest summary.");
}

TEST(Mock, ZeroShotSummaryEchoesCode) {
    EXPECT_EQ(mock_complete("public static void main(String[] args) throws Exception {\n}\nSummary:"),
              "public static void main(String[] args) t");
}

TEST(Mock, CompletionSwapsCase) {
    EXPECT_EQ(mock_complete("def f(a):\n    Return A"), "    rETURN a");
    EXPECT_EQ(mock_complete("# Function: f\nx = SomeLongIdentifierName_that_keeps_going_on_and_on"),
              std::string("X = sOMElONGiDENTIFIERnAME_THAT_KEEPS_GOING_ON_AND_ON").substr(0, 40));
}

TEST(Mock, EmptyMarker) {
    std::string target = "// asap-mock: empty-below=3\nint t() {}\nSummary:";
    EXPECT_EQ(mock_complete(target), "");
    std::string two = std::string(kTwoShot).substr(0, std::string(kTwoShot).rfind("int t()")) + target;
    EXPECT_EQ(mock_complete(two), "");
    std::string three = "int z() {}\nSummary: Third.\n\n" + two;
    EXPECT_EQ(mock_complete(three), "Nearest summary.");
    // a marker inside an exemplar does not count
    std::string in_exemplar = "// asap-mock: empty-below=9\nint a() {}\nSummary: Only.\n\nint t() {}\nSummary:";
    EXPECT_EQ(mock_complete(in_exemplar), "Only.");
}

TEST(Mock, Pure) {
    for (int i = 0; i < 3; ++i) EXPECT_EQ(mock_complete(kTwoShot), mock_complete(kTwoShot));
}

TEST(ModelParams, Defaults) {
    auto s = ModelParams::for_summarization();
    EXPECT_EQ(s.max_output_tokens, 128u);
    EXPECT_EQ(s.stop_sequences, std::vector<std::string>{"\n\n"});
    EXPECT_EQ(s.temperature, 0.0);
    auto c = ModelParams::for_completion();
    EXPECT_EQ(c.max_output_tokens, 64u);
    EXPECT_EQ(c.stop_sequences, std::vector<std::string>{"\n"});
}

TEST(ModelParams, JsonRoundTrip) {
    auto p = http_params();
    p.api_mode = ApiMode::chat;
    p.stop_sequences = {"\n", "END"};
    EXPECT_EQ(model_params_from_json(to_json(p)), p);
    EXPECT_THROW(model_params_from_json(json{{"bogus", 1}}), ConfigError);
}

TEST(RequestHash, ChangesWithEveryField) {
    ModelParams base = ModelParams::for_summarization();
    std::string h = request_hash("prompt", base);
    EXPECT_EQ(h, request_hash("prompt", base));
    EXPECT_EQ(h.size(), 64u);
    EXPECT_NE(h, request_hash("prompt ", base));
    std::vector<ModelParams> variants(7, base);
    variants[0].model_name = "other";
    variants[1].temperature = 0.5;
    variants[2].max_output_tokens = 129;
    variants[3].stop_sequences = {"\n"};
    variants[4].endpoint = "http://x";
    variants[5].api_mode = ApiMode::chat;
    variants[6].backend = Backend::http;
    for (const auto& v : variants) EXPECT_NE(request_hash("prompt", v), h);
}

TEST(Cache, StoreLookupMiss) {
    ResponseCache cache(asap::testing::temp_dir("cache-basic"));
    EXPECT_FALSE(cache.lookup("abc"));
    CompletionResult r;
    r.text = "hello";
    r.finish_reason = FinishReason::length;
    cache.store("abc", json{{"prompt", "p"}}, r);
    auto hit = cache.lookup("abc");
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->text, "hello");
    EXPECT_EQ(hit->finish_reason, FinishReason::length);
    EXPECT_TRUE(hit->cached);
    // write-once
    r.text = "changed";
    cache.store("abc", json{{"prompt", "p"}}, r);
    EXPECT_EQ(cache.lookup("abc")->text, "hello");
}

TEST(Cache, CorruptEntryQuarantined) {
    auto dir = asap::testing::temp_dir("cache-corrupt");
    ResponseCache cache(dir);
    std::ofstream(cache.entry_path("deadbeef")) << "{ not json";
    EXPECT_FALSE(cache.lookup("deadbeef"));
    EXPECT_FALSE(fs::exists(cache.entry_path("deadbeef")));
    EXPECT_TRUE(fs::exists(dir / "quarantine"));
    EXPECT_FALSE(fs::is_empty(dir / "quarantine"));
}

TEST(Client, MockCachedSecondCall) {
    ClientOptions o;
    o.cache_dir = asap::testing::temp_dir("client-mock");
    LlmClient client(o);
    auto first = client.complete(kTwoShot, ModelParams::for_summarization());
    auto second = client.complete(kTwoShot, ModelParams::for_summarization());
    EXPECT_FALSE(first.cached);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(first.text, second.text);
    EXPECT_EQ(first.request_hash, second.request_hash);
    EXPECT_EQ(client.cache_hits(), 1u);
    EXPECT_EQ(client.http_calls(), 0u);
}

TEST(Client, EmptyCompletionThrownAndCached) {
    auto dir = asap::testing::temp_dir("client-empty");
    ClientOptions o;
    o.cache_dir = dir;
    LlmClient client(o);
    std::string target = "// asap-mock: empty-below=1\nint t() {}\nSummary:";
    EXPECT_THROW(client.complete(target, ModelParams::for_summarization()), EmptyCompletion);
    EXPECT_THROW(client.complete(target, ModelParams::for_summarization()), EmptyCompletion);
    EXPECT_EQ(client.cache_hits(), 1u);
}

TEST(Client, CompletionRequestFormat) {
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{ok_completion(" Adds numbers.")});
    SleepLog log;
    LlmClient client(http_options(t, log));
    auto r = client.complete("code\nSummary:", http_params());
    EXPECT_EQ(r.text, " Adds numbers.");
    ASSERT_EQ(t->requests().size(), 1u);
    const auto reqs = t->requests();
    const auto& req = reqs[0];
    EXPECT_EQ(req.url, "http://localhost:9/v1/completions");
    json body = json::parse(req.body);
    EXPECT_EQ(body["prompt"], "code\nSummary:");
    EXPECT_EQ(body["model"], "gpt-3.5-turbo-instruct");
    EXPECT_EQ(body["temperature"], 0.0);
    EXPECT_EQ(body["max_tokens"], 128);
    EXPECT_EQ(body["stop"], json::array({"\n\n"}));
    EXPECT_FALSE(body.contains("messages"));
    bool auth = false;
    for (const auto& [k, v] : req.headers) auth |= k == "Authorization" && v == "Bearer sk-test";
    EXPECT_TRUE(auth);
}

TEST(Client, ChatRequestFormat) {
    HttpResponse ok;
    ok.status = 200;
    ok.body = R"({"choices":[{"message":{"role":"assistant","content":"Chat answer."},"finish_reason":"stop"}]})";
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{ok});
    SleepLog log;
    LlmClient client(http_options(t, log));
    auto p = http_params();
    p.api_mode = ApiMode::chat;
    EXPECT_EQ(client.complete("the prompt", p).text, "Chat answer.");
    const auto reqs = t->requests();
    const auto& req = reqs[0];
    EXPECT_EQ(req.url, "http://localhost:9/v1/chat/completions");
    json body = json::parse(req.body);
    ASSERT_EQ(body["messages"].size(), 1u);
    EXPECT_EQ(body["messages"][0]["role"], "user");
    EXPECT_EQ(body["messages"][0]["content"], "the prompt");
    EXPECT_FALSE(body.contains("prompt"));
}

TEST(Client, RetriesThenSucceeds) {
    auto t = std::make_shared<FakeTransport>(
        std::vector<HttpResponse>{status(429), status(503), status(0), ok_completion("done")});
    SleepLog log;
    LlmClient client(http_options(t, log));
    EXPECT_EQ(client.complete("p", http_params()).text, "done");
    EXPECT_EQ(client.http_calls(), 4u);
    ASSERT_EQ(log.delays.size(), 3u);
    // 100, 200, 400 ms plus at most 25% jitter
    EXPECT_GE(log.delays[0].count(), 100);
    EXPECT_LE(log.delays[0].count(), 125);
    EXPECT_GE(log.delays[1].count(), 200);
    EXPECT_LE(log.delays[1].count(), 250);
    EXPECT_GE(log.delays[2].count(), 400);
    EXPECT_LE(log.delays[2].count(), 500);
}

TEST(Client, RetryAfterHonoured) {
    auto t = std::make_shared<FakeTransport>(
        std::vector<HttpResponse>{status(429, {{"retry-after", "3"}}), ok_completion("ok")});
    SleepLog log;
    LlmClient client(http_options(t, log));
    client.complete("p", http_params());
    ASSERT_EQ(log.delays.size(), 1u);
    EXPECT_EQ(log.delays[0].count(), 3000);
}

TEST(Client, RetriesExhausted) {
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{status(500)});
    SleepLog log;
    LlmClient client(http_options(t, log));
    EXPECT_THROW(client.complete("p", http_params()), RetriesExhausted);
    EXPECT_EQ(client.http_calls(), 4u);
}

TEST(Client, AuthenticationFailures) {
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{status(401)});
    SleepLog log;
    LlmClient client(http_options(t, log));
    EXPECT_THROW(client.complete("p", http_params()), AuthenticationError);
    EXPECT_EQ(client.http_calls(), 1u);

    ClientOptions o = http_options(t, log);
    o.api_key_env = "ASAP_TEST_UNSET_KEY_VARIABLE";
    ::unsetenv("ASAP_TEST_UNSET_KEY_VARIABLE");
    LlmClient no_key(o);
    EXPECT_THROW(no_key.complete("p", http_params()), AuthenticationError);
}

TEST(Client, ClientErrorNotRetried) {
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{status(400)});
    SleepLog log;
    LlmClient client(http_options(t, log));
    try {
        client.complete("p", http_params());
        FAIL();
    } catch (const AuthenticationError&) {
        FAIL() << "400 is not an auth failure";
    } catch (const RetriesExhausted&) {
        FAIL() << "400 is not retried";
    } catch (const LlmError&) {
    }
    EXPECT_EQ(client.http_calls(), 1u);
}

TEST(Client, WhitespaceCompletionIsEmpty) {
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{ok_completion("  \n ")});
    SleepLog log;
    LlmClient client(http_options(t, log));
    EXPECT_THROW(client.complete("p", http_params()), EmptyCompletion);
}

TEST(Client, SecondRunMakesNoHttpCalls) {
    auto dir = asap::testing::temp_dir("client-http-cache");
    std::vector<std::string> prompts;
    for (int i = 0; i < 50; ++i) prompts.push_back("sample " + std::to_string(i) + "\nSummary:");
    {
        auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{ok_completion("text")});
        SleepLog log;
        ClientOptions o = http_options(t, log);
        o.cache_dir = dir;
        LlmClient client(o);
        for (const auto& p : prompts) client.complete(p, http_params());
        EXPECT_EQ(client.http_calls(), 50u);
    }
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{status(500)});
    SleepLog log;
    ClientOptions o = http_options(t, log);
    o.cache_dir = dir;
    LlmClient client(o);
    for (const auto& p : prompts) EXPECT_TRUE(client.complete(p, http_params()).cached);
    EXPECT_EQ(client.http_calls(), 0u);
    EXPECT_TRUE(t->requests().empty());
}

TEST(Backoff, Monotone) {
    RetryPolicy p;
    p.initial_delay = std::chrono::milliseconds(250);
    p.multiplier = 1.7;
    p.max_delay = std::chrono::milliseconds(5000);
    for (std::size_t i = 1; i < 30; ++i) EXPECT_LE(backoff_delay(p, i), backoff_delay(p, i + 1));
    EXPECT_EQ(backoff_delay(p, 1).count(), 250);
    EXPECT_EQ(backoff_delay(p, 29).count(), 5000);
}

TEST(RateLimiter, WaitsBetweenRequests) {
    SleepLog log;
    RateLimiter limiter(2.0, 1.0, log.sleeper());
    for (int i = 0; i < 5; ++i) limiter.acquire();
    ASSERT_EQ(log.delays.size(), 4u);
    for (auto d : log.delays) {
        EXPECT_GT(d.count(), 400);
        EXPECT_LE(d.count(), 500);
    }
    SleepLog none;
    RateLimiter off(0.0, 1.0, none.sleeper());
    for (int i = 0; i < 10; ++i) off.acquire();
    EXPECT_TRUE(none.delays.empty());
}
