#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "asap/prompt.hpp"

namespace asap {

enum class ApiMode { completion, chat };
enum class Backend { http, mock };
enum class FinishReason { stop, length, other };

std::string_view to_string(ApiMode mode) noexcept;
std::string_view to_string(Backend backend) noexcept;
std::string_view to_string(FinishReason reason) noexcept;
ApiMode parse_api_mode(std::string_view s);
Backend parse_backend(std::string_view s);

struct ModelParams {
    std::string model_name = "gpt-3.5-turbo-instruct";
    double temperature = 0.0;
    std::size_t max_output_tokens = 128;
    std::vector<std::string> stop_sequences{"\n\n"};
    std::string endpoint = "https://api.openai.com/v1";
    ApiMode api_mode = ApiMode::completion;
    Backend backend = Backend::mock;

    /// 128 tokens, stop at a blank line.
    static ModelParams for_summarization();
    /// 64 tokens, stop at the end of the line.
    static ModelParams for_completion();

    bool operator==(const ModelParams&) const = default;
};

nlohmann::json to_json(const ModelParams& p);
ModelParams model_params_from_json(const nlohmann::json& j);

struct CompletionResult {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    bool cached = false;
    std::string request_hash;
    std::chrono::milliseconds latency{0};
};

/// Canonical request document; its SHA-256 is the request hash.
nlohmann::json canonical_request(std::string_view prompt_text, const ModelParams& params);
std::string request_hash(std::string_view prompt_text, const ModelParams& params);

/// Offline backend: a pure function of the prompt text.
///  - summarization prompt (ends with "Summary:"): the summary of the exemplar nearest the
///    target, or the first 40 characters of the code's first line when there is none;
///  - otherwise (line completion): the first 40 characters of the last line, case swapped.
/// A marker "asap-mock: empty-below=K" in the target returns "" while fewer than K
/// exemplars precede it.
std::string mock_complete(std::string_view prompt_text);

/// One JSON file per request hash holding request and response. Entries are write-once;
/// unreadable entries move to `quarantine/` and count as misses.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::optional<CompletionResult> lookup(const std::string& hash);
    void store(const std::string& hash, const nlohmann::json& request, const CompletionResult& result);
    std::filesystem::path entry_path(const std::string& hash) const;

private:
    std::filesystem::path dir_;
    std::mutex write_mutex_;
};

struct HttpResponse {
    int status = 0;  ///< 0 when the connection failed
    std::string body;
    std::map<std::string, std::string> headers;  ///< lower-cased names
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// cpp-httplib based transport (TLS through OpenSSL).
std::unique_ptr<HttpTransport> make_default_transport(std::chrono::seconds timeout = std::chrono::seconds(60));

struct RetryPolicy {
    std::size_t max_attempts = 6;
    std::chrono::milliseconds initial_delay{1000};
    double multiplier = 2.0;
    std::chrono::milliseconds max_delay{60000};
    double jitter = 0.25;  ///< extra delay up to this fraction

    bool operator==(const RetryPolicy&) const = default;
};

/// Delay before retry number `retry` (1-based), without jitter. Non-decreasing in `retry`.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, std::size_t retry);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Token bucket shared by all workers of a client.
class RateLimiter {
public:
    /// rate <= 0 disables limiting.
    RateLimiter(double requests_per_second, double burst, Sleeper sleeper = {});
    void acquire();

private:
    double rate_;
    double burst_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    Sleeper sleeper_;
    std::mutex mutex_;
};

struct ClientOptions {
    std::optional<std::filesystem::path> cache_dir;
    RetryPolicy retry;
    double requests_per_second = 0.0;
    std::string api_key_env = "OPENAI_API_KEY";
    std::shared_ptr<HttpTransport> transport;  ///< defaults to make_default_transport()
    Sleeper sleeper;                           ///< defaults to std::this_thread::sleep_for
    std::uint64_t jitter_seed = 0x5eed;
};

/// Thread-safe model client.
class LlmClient {
public:
    explicit LlmClient(ClientOptions options = {});

    /// Throws EmptyCompletion for blank output, AuthenticationError, RetriesExhausted or LlmError.
    CompletionResult complete(const Prompt& prompt, const ModelParams& params);
    CompletionResult complete(std::string_view prompt_text, const ModelParams& params);

    std::size_t http_calls() const noexcept { return http_calls_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

private:
    CompletionResult call_http(std::string_view prompt_text, const ModelParams& params);
    void sleep(std::chrono::milliseconds d);

    ClientOptions options_;
    std::unique_ptr<ResponseCache> cache_;
    std::unique_ptr<RateLimiter> limiter_;
    std::atomic<std::size_t> http_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
};

}  // namespace asap
