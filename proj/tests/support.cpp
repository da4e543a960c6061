#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "synth.hpp"

namespace asap::testing {

namespace fs = std::filesystem;

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string check_golden(const std::string& name, const std::string& actual) {
    fs::path path = fs::path(ASAP_FIXTURE_DIR) / "golden" / name;
    const char* update = std::getenv("ASAP_UPDATE_GOLDEN");
    if (update != nullptr && std::string(update) == "1") {
        fs::create_directories(path.parent_path());
        std::ofstream(path, std::ios::binary) << actual;
        return {};
    }
    if (!fs::exists(path)) return "golden file " + path.string() + " is missing";
    std::string expected = read_text(path);
    if (expected == actual) return {};
    std::size_t i = 0;
    while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) ++i;
    return fmt::format("{} differs at byte {} (expected {} bytes, got {})", name, i, expected.size(), actual.size());
}

fs::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    fs::path p = fs::temp_directory_path() / fmt::format("asap-{}-{:x}", tag, rng());
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

namespace {

Sample java_sample(std::string id, std::string name, std::string code, std::string summary) {
    Sample s;
    s.id = std::move(id);
    s.language = Language::java;
    s.repo = "fixture/huge";
    s.path = "src/main/java/fixture/Huge.java";
    s.func_name = "Huge." + name;
    s.code = std::move(code);
    s.summary = std::move(summary);
    return s;
}

// Roughly `lines` statements over identifiers nobody else uses.
std::string huge_body(const std::string& name, std::size_t variant, std::size_t lines) {
    std::string code = fmt::format("public int {}(int zorbQuux, int flimFlam) {{\n", name);
    for (std::size_t i = 0; i < lines; ++i) {
        code += fmt::format("    int wibbleGronk{0} = zorbQuux * {1} + flimFlam - blorptVex({0});\n", i, variant + i);
    }
    code += "    return zorbQuux + flimFlam;\n}";
    return code;
}

}  // namespace

E2eFixture e2e_fixture() {
    SamplePool base = synth::make_pool(Language::java, 60, 11, {6, false});
    std::vector<Sample> pool(base.begin(), base.end());
    std::vector<Sample> tests(base.begin(), base.begin() + 48);
    for (std::size_t v = 0; v < 3; ++v) {
        std::string name = fmt::format("grindZorb{}", v);
        pool.push_back(java_sample(fmt::format("fixture-huge-{}", v), name, huge_body(name, v, 80),
                                   "Grinds the zorb quux values."));
    }
    Sample oversize = java_sample(kOversizeId, "zorbFlim",
                                  "public int zorbFlim(int zorbQuux, int flimFlam) {\n"
                                  "    int wibbleGronk0 = zorbQuux * 2 + flimFlam - blorptVex(0);\n"
                                  "    return wibbleGronk0;\n}",
                                  "Combines zorb quux and flim flam.");
    Sample empty = base[0];
    empty.id = kEmptyId;
    empty.func_name += "Empty";
    empty.code = "// asap-mock: empty-below=4\n" + empty.code;
    empty.summary = "Needs a fourth exemplar.";
    pool.push_back(oversize);
    pool.push_back(empty);
    tests.push_back(oversize);
    tests.push_back(empty);
    return {SamplePool(Language::java, std::move(pool)), SamplePool(Language::java, std::move(tests))};
}

HttpResponse FakeTransport::post(const std::string& url, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers) {
    std::lock_guard lock(mutex_);
    requests_.push_back({url, body, headers});
    if (script_.empty()) return HttpResponse{};
    HttpResponse r = script_[std::min(next_, script_.size() - 1)];
    ++next_;
    return r;
}

std::vector<FakeTransport::Request> FakeTransport::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

HttpResponse ok_completion(const std::string& text) {
    HttpResponse r;
    r.status = 200;
    r.body = nlohmann::json{{"choices", nlohmann::json::array({{{"text", text}, {"finish_reason", "stop"}}})}}.dump();
    return r;
}

}  // namespace asap::testing
