#include "asap/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "asap/error.hpp"
#include "asap/hash.hpp"

namespace asap {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(ApiMode mode) noexcept { return mode == ApiMode::chat ? "chat" : "completion"; }
std::string_view to_string(Backend backend) noexcept { return backend == Backend::http ? "http" : "mock"; }
std::string_view to_string(FinishReason reason) noexcept {
    switch (reason) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::other: return "other";
    }
    return "other";
}

ApiMode parse_api_mode(std::string_view s) {
    if (s == "completion") return ApiMode::completion;
    if (s == "chat") return ApiMode::chat;
    throw ConfigError("unknown api mode '" + std::string(s) + "'");
}

Backend parse_backend(std::string_view s) {
    if (s == "mock") return Backend::mock;
    if (s == "http") return Backend::http;
    throw ConfigError("unknown backend '" + std::string(s) + "'");
}

namespace {

FinishReason parse_finish_reason(std::string_view s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::other;
}

}  // namespace

ModelParams ModelParams::for_summarization() { return ModelParams{}; }

ModelParams ModelParams::for_completion() {
    ModelParams p;
    p.max_output_tokens = 64;
    p.stop_sequences = {"\n"};
    return p;
}

json to_json(const ModelParams& p) {
    return json{{"model_name", p.model_name},
                {"temperature", p.temperature},
                {"max_output_tokens", p.max_output_tokens},
                {"stop_sequences", p.stop_sequences},
                {"endpoint", p.endpoint},
                {"api_mode", to_string(p.api_mode)},
                {"backend", to_string(p.backend)}};
}

ModelParams model_params_from_json(const json& j) {
    ModelParams p;
    if (!j.is_object()) throw ConfigError("model parameters must be a JSON object");
    static const std::set<std::string> kKeys = {"model_name", "temperature", "max_output_tokens", "stop_sequences",
                                                "endpoint",   "api_mode",    "backend"};
    for (const auto& [key, value] : j.items()) {
        if (!kKeys.count(key)) throw ConfigError("unknown model parameter '" + key + "'");
    }
    try {
        if (j.contains("model_name")) p.model_name = j.at("model_name").get<std::string>();
        if (j.contains("temperature")) p.temperature = j.at("temperature").get<double>();
        if (j.contains("max_output_tokens")) p.max_output_tokens = j.at("max_output_tokens").get<std::size_t>();
        if (j.contains("stop_sequences")) p.stop_sequences = j.at("stop_sequences").get<std::vector<std::string>>();
        if (j.contains("endpoint")) p.endpoint = j.at("endpoint").get<std::string>();
        if (j.contains("api_mode")) p.api_mode = parse_api_mode(j.at("api_mode").get<std::string>());
        if (j.contains("backend")) p.backend = parse_backend(j.at("backend").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad model parameters: ") + e.what());
    }
    return p;
}

json canonical_request(std::string_view prompt_text, const ModelParams& params) {
    // json objects keep keys sorted, so dump() is canonical
    return json{{"prompt", std::string(prompt_text)}, {"params", to_json(params)}};
}

std::string request_hash(std::string_view prompt_text, const ModelParams& params) {
    return sha256_hex(canonical_request(prompt_text, params).dump());
}

// ---- mock backend ------------------------------------------------------------

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::string_view trim_view(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string first_chars(std::string_view s, std::size_t n) { return std::string(s.substr(0, std::min(n, s.size()))); }

std::string swap_case(std::string s) {
    for (char& c : s) {
        auto u = static_cast<unsigned char>(c);
        if (std::islower(u)) {
            c = static_cast<char>(std::toupper(u));
        } else if (std::isupper(u)) {
            c = static_cast<char>(std::tolower(u));
        }
    }
    return s;
}

constexpr std::string_view kEmptyMarker = "asap-mock: empty-below=";

}  // namespace

std::string mock_complete(std::string_view prompt_text) {
    auto lines = split_lines(prompt_text);
    std::string_view cue = kSummaryCue;
    bool summarization = trim_view(prompt_text).ends_with(cue);
    if (!summarization) {
        return swap_case(first_chars(lines.back(), 40));
    }
    // exemplar summaries are "Summary: <text>" lines; the target ends with a bare cue
    std::size_t exemplars = 0;
    std::size_t last_summary_line = 0;
    std::string_view nearest;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = lines[i];
        if (line.starts_with(cue) && line.size() > cue.size() && !trim_view(line.substr(cue.size())).empty()) {
            ++exemplars;
            last_summary_line = i + 1;
            nearest = trim_view(line.substr(cue.size()));
        }
    }
    std::size_t target_start = exemplars == 0 ? 0 : last_summary_line;
    for (std::size_t i = target_start; i < lines.size(); ++i) {
        auto pos = lines[i].find(kEmptyMarker);
        if (pos == std::string_view::npos) continue;
        auto digits = lines[i].substr(pos + kEmptyMarker.size());
        std::size_t k = 0;
        for (char c : digits) {
            if (!std::isdigit(static_cast<unsigned char>(c))) break;
            k = k * 10 + static_cast<std::size_t>(c - '0');
        }
        if (exemplars < k) return "";
    }
    if (exemplars > 0) return std::string(nearest);
    for (std::size_t i = target_start; i < lines.size(); ++i) {
        auto t = trim_view(lines[i]);
        if (!t.empty()) return first_chars(t, 40);
    }
    return "";
}

// ---- cache -------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ResponseCache::entry_path(const std::string& hash) const { return dir_ / (hash + ".json"); }

std::optional<CompletionResult> ResponseCache::lookup(const std::string& hash) {
    fs::path p = entry_path(hash);
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    try {
        std::ifstream in(p, std::ios::binary);
        json doc = json::parse(in);
        const json& r = doc.at("response");
        CompletionResult out;
        out.text = r.at("text").get<std::string>();
        out.finish_reason = parse_finish_reason(r.at("finish_reason").get<std::string>());
        out.latency = std::chrono::milliseconds(r.value("latency_ms", std::int64_t{0}));
        out.request_hash = hash;
        out.cached = true;
        if (doc.at("request_hash").get<std::string>() != hash) throw std::runtime_error("hash mismatch");
        return out;
    } catch (const std::exception&) {
        std::lock_guard lock(write_mutex_);
        fs::path q = dir_ / "quarantine";
        fs::create_directories(q, ec);
        fs::rename(p, q / p.filename(), ec);
        if (ec) fs::remove(p, ec);
        return std::nullopt;
    }
}

void ResponseCache::store(const std::string& hash, const json& request, const CompletionResult& result) {
    std::lock_guard lock(write_mutex_);
    fs::path p = entry_path(hash);
    if (fs::exists(p)) return;  // write-once
    json doc{{"request_hash", hash},
             {"request", request},
             {"response",
              {{"text", result.text},
               {"finish_reason", to_string(result.finish_reason)},
               {"latency_ms", result.latency.count()}}}};
    fs::path tmp = p;
    tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw LlmError("cannot write cache entry " + tmp.string());
        out << doc.dump(2) << '\n';
    }
    fs::rename(tmp, p);
}

// ---- retry and rate limiting -------------------------------------------------------

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, std::size_t retry) {
    double ms = static_cast<double>(policy.initial_delay.count()) *
                std::pow(policy.multiplier, static_cast<double>(retry == 0 ? 0 : retry - 1));
    ms = std::min(ms, static_cast<double>(policy.max_delay.count()));
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

namespace {

void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

}  // namespace

RateLimiter::RateLimiter(double requests_per_second, double burst, Sleeper sleeper)
    : rate_(requests_per_second),
      burst_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(default_sleep)) {}

void RateLimiter::acquire() {
    if (rate_ <= 0) return;
    std::unique_lock lock(mutex_);
    while (true) {
        auto now = std::chrono::steady_clock::now();
        double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        auto wait = std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil((1.0 - tokens_) / rate_ * 1000.0)));
        // an injected sleeper does not advance the clock, so credit the waited time
        sleeper_(wait);
        tokens_ += std::chrono::duration<double>(wait).count() * rate_;
        last_ = std::chrono::steady_clock::now();
    }
}

// ---- client ------------------------------------------------------------------------

LlmClient::LlmClient(ClientOptions options) : options_(std::move(options)), rng_(options_.jitter_seed) {
    if (options_.cache_dir) cache_ = std::make_unique<ResponseCache>(*options_.cache_dir);
    if (options_.requests_per_second > 0) {
        limiter_ = std::make_unique<RateLimiter>(options_.requests_per_second, 1.0, options_.sleeper);
    }
}

void LlmClient::sleep(std::chrono::milliseconds d) {
    if (options_.sleeper) {
        options_.sleeper(d);
    } else {
        default_sleep(d);
    }
}

CompletionResult LlmClient::complete(const Prompt& prompt, const ModelParams& params) {
    return complete(prompt.text, params);
}

CompletionResult LlmClient::complete(std::string_view prompt_text, const ModelParams& params) {
    json request = canonical_request(prompt_text, params);
    std::string hash = sha256_hex(request.dump());
    CompletionResult result;
    std::optional<CompletionResult> hit;
    if (cache_) hit = cache_->lookup(hash);
    if (hit) {
        ++cache_hits_;
        result = std::move(*hit);
    } else {
        auto start = std::chrono::steady_clock::now();
        if (params.backend == Backend::mock) {
            result.text = mock_complete(prompt_text);
            result.finish_reason = FinishReason::stop;
        } else {
            result = call_http(prompt_text, params);
        }
        result.latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        result.request_hash = hash;
        result.cached = false;
        if (cache_) cache_->store(hash, request, result);
    }
    if (trim_view(result.text).empty()) {
        throw EmptyCompletion("model returned an empty completion (request " + hash.substr(0, 12) + ")");
    }
    return result;
}

namespace {

std::string endpoint_url(const ModelParams& params) {
    std::string base = params.endpoint;
    while (!base.empty() && base.back() == '/') base.pop_back();
    return base + (params.api_mode == ApiMode::chat ? "/chat/completions" : "/completions");
}

json http_body(std::string_view prompt_text, const ModelParams& params) {
    json body{{"model", params.model_name},
              {"temperature", params.temperature},
              {"max_tokens", params.max_output_tokens},
              {"stop", params.stop_sequences}};
    if (params.api_mode == ApiMode::chat) {
        body["messages"] = json::array({json{{"role", "user"}, {"content", std::string(prompt_text)}}});
    } else {
        body["prompt"] = std::string(prompt_text);
    }
    return body;
}

std::optional<std::chrono::milliseconds> retry_after(const HttpResponse& r) {
    auto it = r.headers.find("retry-after");
    if (it == r.headers.end()) return std::nullopt;
    char* end = nullptr;
    double seconds = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || seconds < 0) return std::nullopt;
    return std::chrono::milliseconds(static_cast<std::int64_t>(seconds * 1000.0));
}

}  // namespace

CompletionResult LlmClient::call_http(std::string_view prompt_text, const ModelParams& params) {
    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw AuthenticationError("environment variable " + options_.api_key_env + " is not set");
    }
    if (!options_.transport) options_.transport = make_default_transport();
    std::string url = endpoint_url(params);
    std::string body = http_body(prompt_text, params).dump();
    std::vector<std::pair<std::string, std::string>> headers{{"Authorization", std::string("Bearer ") + key},
                                                             {"Content-Type", "application/json"}};
    std::string last_problem;
    std::size_t attempts = std::max<std::size_t>(1, options_.retry.max_attempts);
    for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
        if (limiter_) limiter_->acquire();
        ++http_calls_;
        HttpResponse r = options_.transport->post(url, body, headers);
        if (r.status == 401 || r.status == 403) {
            throw AuthenticationError(fmt::format("endpoint rejected credentials (HTTP {})", r.status));
        }
        if (r.status >= 200 && r.status < 300) {
            try {
                json doc = json::parse(r.body);
                const json& choice = doc.at("choices").at(0);
                CompletionResult out;
                if (params.api_mode == ApiMode::chat) {
                    out.text = choice.at("message").at("content").get<std::string>();
                } else {
                    out.text = choice.at("text").get<std::string>();
                }
                out.finish_reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                                        ? parse_finish_reason(choice["finish_reason"].get<std::string>())
                                        : FinishReason::other;
                return out;
            } catch (const json::exception& e) {
                throw LlmError(std::string("malformed response body: ") + e.what());
            }
        }
        bool retryable = r.status == 0 || r.status == 429 || r.status >= 500;
        last_problem = r.status == 0 ? "connection failed: " + r.error : fmt::format("HTTP {}", r.status);
        if (!retryable) throw LlmError(fmt::format("request failed with {}: {}", last_problem, r.body.substr(0, 200)));
        if (attempt == attempts) break;
        auto delay = backoff_delay(options_.retry, attempt);
        double extra = 0.0;
        {
            std::lock_guard lock(rng_mutex_);
            extra = std::uniform_real_distribution<double>(0.0, options_.retry.jitter)(rng_);
        }
        delay += std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(delay.count()) * extra));
        if (auto ra = retry_after(r); ra && *ra > delay) delay = *ra;
        sleep(delay);
    }
    throw RetriesExhausted(fmt::format("giving up after {} attempts, last error {}", attempts, last_problem));
}

}  // namespace asap
