#include "asap/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "asap/error.hpp"
#include "asap/hash.hpp"

namespace asap {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

int read_int(std::string_view text, std::size_t& pos, std::size_t digits) {
    if (pos + digits > text.size()) throw CorpusError("truncated timestamp '" + std::string(text) + "'");
    int value = 0;
    for (std::size_t i = 0; i < digits; ++i) {
        char c = text[pos + i];
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw CorpusError("malformed timestamp '" + std::string(text) + "'");
        }
        value = value * 10 + (c - '0');
    }
    pos += digits;
    return value;
}

void expect(std::string_view text, std::size_t& pos, char c) {
    if (pos >= text.size() || text[pos] != c) {
        throw CorpusError("malformed timestamp '" + std::string(text) + "'");
    }
    ++pos;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string string_field(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return {};
    return it->get<std::string>();
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    text = trim(text);
    std::size_t pos = 0;
    int y = read_int(text, pos, 4);
    expect(text, pos, '-');
    int mo = read_int(text, pos, 2);
    expect(text, pos, '-');
    int d = read_int(text, pos, 2);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw CorpusError("invalid date in timestamp '" + std::string(text) + "'");
    long seconds = 0;
    if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
        ++pos;
        int h = read_int(text, pos, 2);
        expect(text, pos, ':');
        int mi = read_int(text, pos, 2);
        int s = 0;
        if (pos < text.size() && text[pos] == ':') {
            ++pos;
            s = read_int(text, pos, 2);
        }
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        }
        if (h > 23 || mi > 59 || s > 60) throw CorpusError("invalid time in timestamp '" + std::string(text) + "'");
        seconds = h * 3600L + mi * 60L + s;
        if (pos < text.size()) {
            char z = text[pos];
            if (z == 'Z') {
                ++pos;
            } else if (z == '+' || z == '-') {
                ++pos;
                int oh = read_int(text, pos, 2);
                if (pos < text.size() && text[pos] == ':') ++pos;
                int om = read_int(text, pos, 2);
                long offset = oh * 3600L + om * 60L;
                seconds -= (z == '+') ? offset : -offset;
            }
        }
    }
    if (pos != text.size()) throw CorpusError("trailing characters in timestamp '" + std::string(text) + "'");
    return std::chrono::sys_days{ymd} + std::chrono::seconds{seconds};
}

std::string format_timestamp(Timestamp ts) {
    auto days = std::chrono::floor<std::chrono::days>(ts);
    std::chrono::year_month_day ymd{days};
    std::chrono::hh_mm_ss hms{ts - days};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                       hms.minutes().count(), hms.seconds().count());
}

SamplePool::SamplePool(Language language, std::vector<Sample> samples, PoolProvenance provenance)
    : language_(language), samples_(std::move(samples)), provenance_(std::move(provenance)) {
    std::unordered_set<std::string_view> ids;
    for (const auto& s : samples_) {
        if (s.language != language_) {
            throw CorpusError(fmt::format("sample '{}' is {} but the pool is {}", s.id, to_string(s.language),
                                          to_string(language_)));
        }
        if (!ids.insert(s.id).second) throw CorpusError("duplicate sample id '" + s.id + "'");
    }
}

const Sample* SamplePool::find(std::string_view id) const {
    for (const auto& s : samples_) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

std::string derive_sample_id(const Sample& sample) {
    std::string key;
    key.reserve(sample.repo.size() + sample.path.size() + sample.func_name.size() + sample.code.size() + 4);
    for (const auto* part : {&sample.repo, &sample.path, &sample.func_name, &sample.code}) {
        key += *part;
        key.push_back('\x1f');
    }
    return sha256_hex(key).substr(0, 16);
}

std::string first_paragraph(std::string_view docstring) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= docstring.size()) {
        auto nl = docstring.find('\n', start);
        if (nl == std::string_view::npos) nl = docstring.size();
        lines.push_back(docstring.substr(start, nl - start));
        start = nl + 1;
    }
    std::string out;
    bool started = false;
    for (auto raw : lines) {
        auto line = trim(raw);
        if (line.starts_with("/**")) line = trim(line.substr(3));
        if (line.ends_with("*/")) line = trim(line.substr(0, line.size() - 2));
        if (line.starts_with("*")) line = trim(line.substr(1));
        if (line.empty()) {
            if (started) break;
            continue;
        }
        if (line.front() == '@' || line.starts_with(":param") || line.starts_with(":return") ||
            line.starts_with(":rtype") || line.starts_with(":raises") || line.starts_with(":type")) {
            break;
        }
        started = true;
        for (char c : line) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!out.empty() && out.back() != ' ') out.push_back(' ');
            } else {
                out.push_back(c);
            }
        }
        if (!out.empty() && out.back() != ' ') out.push_back(' ');
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

namespace {

// Index one past the closing quote of the string literal starting at `pos` (after any prefix).
std::size_t skip_python_string(std::string_view code, std::size_t pos) {
    char q = code[pos];
    bool triple = code.substr(pos, 3) == std::string(3, q);
    std::size_t i = pos + (triple ? 3 : 1);
    while (i < code.size()) {
        if (code[i] == '\\') {
            i += 2;
            continue;
        }
        if (triple) {
            if (code.substr(i, 3) == std::string(3, q)) return i + 3;
        } else if (code[i] == q) {
            return i + 1;
        } else if (code[i] == '\n') {
            return i;
        }
        ++i;
    }
    return code.size();
}

std::size_t find_def_header_end(std::string_view code) {
    std::size_t i = 0;
    // locate the "def" keyword at the start of a line
    while (true) {
        auto p = code.find("def", i);
        if (p == std::string_view::npos) return std::string_view::npos;
        bool line_start = true;
        for (std::size_t j = p; j > 0; --j) {
            char c = code[j - 1];
            if (c == '\n') break;
            if (c != ' ' && c != '\t') {
                // allow "async def"
                line_start = code.substr(0, p).ends_with("async ");
                break;
            }
        }
        bool word_end = p + 3 < code.size() && (code[p + 3] == ' ' || code[p + 3] == '\t');
        if (line_start && word_end) {
            i = p + 3;
            break;
        }
        i = p + 3;
    }
    int depth = 0;
    while (i < code.size()) {
        char c = code[i];
        if (c == '\'' || c == '"') {
            i = skip_python_string(code, i);
            continue;
        }
        if (c == '#') {
            while (i < code.size() && code[i] != '\n') ++i;
            continue;
        }
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
        if (c == ':' && depth == 0) return i + 1;
        ++i;
    }
    return std::string_view::npos;
}

}  // namespace

std::string strip_python_docstring(std::string_view code) {
    std::size_t header_end = find_def_header_end(code);
    if (header_end == std::string_view::npos) return std::string(code);
    std::size_t i = header_end;
    while (i < code.size()) {
        char c = code[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++i;
        } else if (c == '#') {
            while (i < code.size() && code[i] != '\n') ++i;
        } else {
            break;
        }
    }
    std::size_t lit = i;
    while (lit < code.size() && lit < i + 2 && std::string_view("rRuUbB").find(code[lit]) != std::string_view::npos) ++lit;
    if (lit >= code.size() || (code[lit] != '"' && code[lit] != '\'')) return std::string(code);
    std::size_t end = skip_python_string(code, lit);
    // the docstring must be a statement on its own
    std::size_t after = end;
    while (after < code.size() && (code[after] == ' ' || code[after] == '\t' || code[after] == '\r')) ++after;
    if (after < code.size() && code[after] != '\n' && code[after] != '#' && code[after] != ';') {
        return std::string(code);
    }
    while (after < code.size() && code[after] != '\n') ++after;
    std::size_t line_start = i;
    while (line_start > header_end && code[line_start - 1] != '\n') --line_start;
    bool own_line = line_start > header_end || (line_start == header_end && code[header_end - 1] == '\n');
    std::string rest(code.substr(std::min(after + 1, code.size())));
    bool body_left = std::any_of(rest.begin(), rest.end(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
    std::string out(code.substr(0, own_line ? line_start : i));
    if (!body_left) {
        std::string indent(code.substr(line_start, i - line_start));
        out += own_line ? indent + "pass\n" : "pass\n";
        return out;
    }
    if (!own_line) out += "\n";
    out += rest;
    return out;
}

SamplePool parse_pool(std::string_view jsonl, Language language, const LoadOptions& options, std::string source) {
    PoolProvenance prov;
    prov.source = std::move(source);
    prov.options = options;
    std::vector<Sample> samples;
    std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < jsonl.size()) {
        auto nl = jsonl.find('\n', start);
        if (nl == std::string_view::npos) nl = jsonl.size();
        auto line = trim(jsonl.substr(start, nl - start));
        start = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            ++prov.skipped_malformed;
            continue;
        }
        if (auto lang = string_field(rec, "language"); !lang.empty() && lang != to_string(language)) {
            throw CorpusError(fmt::format("{}:{}: record language '{}' does not match requested '{}'", prov.source,
                                          line_no, lang, to_string(language)));
        }
        Sample s;
        s.language = language;
        s.repo = string_field(rec, "repo");
        s.path = string_field(rec, "path");
        s.func_name = string_field(rec, "func_name");
        // Records carrying "summary" were written by save_pool and are already normalized.
        bool normalized = rec.contains("summary");
        s.code = string_field(rec, "original_string");
        if (s.code.empty()) s.code = string_field(rec, "code");
        if (normalized) {
            s.summary = string_field(rec, "summary");
        } else {
            s.summary = first_paragraph(string_field(rec, "docstring"));
            if (language == Language::python && options.strip_python_docstring) {
                s.code = strip_python_docstring(s.code);
            }
        }
        if (trim(s.code).empty() || (options.require_summary && s.summary.empty())) {
            ++prov.skipped_missing;
            continue;
        }
        if (auto created = string_field(rec, "created_at"); !created.empty()) {
            try {
                s.created_at = parse_timestamp(created);
            } catch (const CorpusError& e) {
                throw CorpusError(fmt::format("{}:{}: {}", prov.source, line_no, e.what()));
            }
        }
        if (!seen.emplace(s.repo, s.path, s.func_name, s.code).second) {
            ++prov.skipped_duplicate;
            continue;
        }
        s.id = string_field(rec, "id");
        if (s.id.empty()) s.id = derive_sample_id(s);
        if (!ids.insert(s.id).second) {
            throw CorpusError(fmt::format("{}:{}: duplicate id '{}'", prov.source, line_no, s.id));
        }
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw CorpusError("zero valid records in '" + prov.source + "'");
    return SamplePool(language, std::move(samples), std::move(prov));
}

SamplePool load_pool(const std::filesystem::path& path, Language language, const LoadOptions& options) {
    return parse_pool(read_text(path), language, options, path.string());
}

std::string serialize_pool(const SamplePool& pool) {
    std::string out;
    for (const auto& s : pool) {
        json rec{{"id", s.id},
                 {"repo", s.repo},
                 {"path", s.path},
                 {"func_name", s.func_name},
                 {"code", s.code},
                 {"summary", s.summary},
                 {"language", std::string(to_string(s.language))}};
        if (s.created_at) rec["created_at"] = format_timestamp(*s.created_at);
        out += rec.dump();
        out.push_back('\n');
    }
    return out;
}

void save_pool(const SamplePool& pool, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError("cannot write '" + path.string() + "'");
    out << serialize_pool(pool);
}

SamplePool attach_created_at(const SamplePool& pool, const std::filesystem::path& metadata) {
    std::string text = read_text(metadata);
    std::unordered_map<std::string, Timestamp> dates;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) throw CorpusError("malformed metadata line in '" + metadata.string() + "'");
        auto id = string_field(rec, "id");
        auto created = string_field(rec, "created_at");
        if (id.empty() || created.empty()) continue;
        dates[id] = parse_timestamp(created);
    }
    std::vector<Sample> samples = pool.samples();
    for (auto& s : samples) {
        if (auto it = dates.find(s.id); it != dates.end()) s.created_at = it->second;
    }
    return SamplePool(pool.language(), std::move(samples), pool.provenance());
}

SamplePool sample_uniform(const SamplePool& pool, std::size_t n, std::uint64_t seed) {
    if (n > pool.size()) {
        throw CorpusError(fmt::format("cannot sample {} of {} samples", n, pool.size()));
    }
    // Selection sampling (Knuth, Algorithm S) on raw engine output, so the choice is
    // identical across standard library implementations.
    std::mt19937_64 rng(seed);
    std::vector<Sample> chosen;
    chosen.reserve(n);
    std::size_t remaining = pool.size();
    for (const auto& s : pool) {
        if (chosen.size() == n) break;
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (static_cast<double>(remaining) * u < static_cast<double>(n - chosen.size())) chosen.push_back(s);
        --remaining;
    }
    PoolProvenance prov = pool.provenance();
    prov.source += fmt::format(" | uniform n={} seed={}", n, seed);
    return SamplePool(pool.language(), std::move(chosen), std::move(prov));
}

void save_id_list(const SamplePool& pool, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError("cannot write '" + path.string() + "'");
    for (const auto& s : pool) out << json(s.id).dump() << '\n';
}

std::vector<std::string> load_id_list(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json v = json::parse(line, nullptr, false);
        if (v.is_string()) {
            ids.push_back(v.get<std::string>());
        } else if (v.is_object() && v.contains("id") && v["id"].is_string()) {
            ids.push_back(v["id"].get<std::string>());
        } else {
            throw CorpusError("malformed id list line in '" + path.string() + "'");
        }
    }
    return ids;
}

SamplePool select_ids(const SamplePool& pool, const std::vector<std::string>& ids) {
    std::vector<Sample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const Sample* s = pool.find(id);
        if (s == nullptr) throw CorpusError("id '" + id + "' not found in pool");
        out.push_back(*s);
    }
    return SamplePool(pool.language(), std::move(out), pool.provenance());
}

ProjectSplit split_same_project(const SamplePool& pool, std::string_view project, SplitPoint point) {
    std::vector<Sample> project_samples;
    for (const auto& s : pool) {
        if (s.repo != project) continue;
        if (!s.created_at) throw CorpusError("sample '" + s.id + "' of project '" + std::string(project) + "' has no created_at");
        project_samples.push_back(s);
    }
    if (project_samples.empty()) throw CorpusError("project '" + std::string(project) + "' is absent from the pool");
    std::stable_sort(project_samples.begin(), project_samples.end(), [](const Sample& a, const Sample& b) {
        return std::tie(*a.created_at, a.id) < std::tie(*b.created_at, b.id);
    });
    const std::size_t n = project_samples.size();
    std::size_t cut = std::visit(
        [n](const auto& p) -> std::size_t {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, SplitCount>) {
                if (p.train > n) throw CorpusError(fmt::format("split count {} exceeds project size {}", p.train, n));
                return p.train;
            } else {
                if (!(p.train >= 0.0 && p.train <= 1.0)) throw CorpusError("split fraction must lie in [0, 1]");
                return static_cast<std::size_t>(std::floor(p.train * static_cast<double>(n)));
            }
        },
        point);
    while (cut > 0 && cut < n && project_samples[cut].created_at == project_samples[cut - 1].created_at) ++cut;
    std::vector<Sample> train(project_samples.begin(), project_samples.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<Sample> test(project_samples.begin() + static_cast<std::ptrdiff_t>(cut), project_samples.end());
    PoolProvenance prov = pool.provenance();
    prov.source += " | project " + std::string(project);
    return {SamplePool(pool.language(), std::move(train), prov), SamplePool(pool.language(), std::move(test), prov)};
}

}  // namespace asap
