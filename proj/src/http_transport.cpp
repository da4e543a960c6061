#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <algorithm>
#include <cctype>

#include "asap/error.hpp"
#include "asap/llm.hpp"

namespace asap {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint '" + url + "' has no scheme");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

    HttpResponse post(const std::string& url, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& headers) override {
        SplitUrl parts = split_url(url);
        httplib::Client client(parts.origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers h;
        std::string content_type = "application/json";
        for (const auto& [k, v] : headers) {
            if (k == "Content-Type") {
                content_type = v;
            } else {
                h.emplace(k, v);
            }
        }
        HttpResponse out;
        auto res = client.Post(parts.path, h, body, content_type);
        if (!res) {
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        for (const auto& [k, v] : res->headers) {
            std::string key = k;
            std::transform(key.begin(), key.end(), key.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            out.headers[key] = v;
        }
        return out;
    }

private:
    std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_default_transport(std::chrono::seconds timeout) {
    return std::make_unique<HttplibTransport>(timeout);
}

}  // namespace asap
