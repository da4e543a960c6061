#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "asap/corpus.hpp"
#include "asap/llm.hpp"

namespace asap::testing {

/// Compares `actual` with tests/fixtures/golden/<name>. With ASAP_UPDATE_GOLDEN=1 the file is
/// (re)written instead. Returns an empty string on match, otherwise a description.
std::string check_golden(const std::string& name, const std::string& actual);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::string read_text(const std::filesystem::path& p);

/// 50 test samples over a 65-sample java pool. One test sample (kOversizeId) retrieves three
/// exemplars too large to fit together; one (kEmptyId) makes the mock backend return an
/// empty completion while fewer than 4 exemplars precede it.
struct E2eFixture {
    SamplePool pool;
    SamplePool tests;
};
inline constexpr const char* kOversizeId = "fixture-oversize";
inline constexpr const char* kEmptyId = "fixture-empty";
E2eFixture e2e_fixture();

/// Scripted HTTP transport; repeats the last response when the script runs out.
class FakeTransport : public HttpTransport {
public:
    explicit FakeTransport(std::vector<HttpResponse> script) : script_(std::move(script)) {}

    HttpResponse post(const std::string& url, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& headers) override;

    struct Request {
        std::string url;
        std::string body;
        std::vector<std::pair<std::string, std::string>> headers;
    };
    std::vector<Request> requests() const;

private:
    mutable std::mutex mutex_;
    std::vector<HttpResponse> script_;
    std::size_t next_ = 0;
    std::vector<Request> requests_;
};

HttpResponse ok_completion(const std::string& text);

}  // namespace asap::testing
