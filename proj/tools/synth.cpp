#include "synth.hpp"

#include <chrono>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "asap/error.hpp"

namespace asap::synth {

namespace {

const std::vector<std::string> kNouns = {"user",  "order",  "cache", "file",   "buffer", "token",  "score",
                                         "config", "record", "item",  "path",   "node",   "price",  "count",
                                         "index",  "message", "tensor", "matrix", "event", "session", "weight",
                                         "limit",  "offset", "label"};
const std::vector<std::string> kVerbs = {"load", "compute", "find",  "update",    "parse", "merge",
                                         "check", "render",  "sum",   "filter",    "scale", "count"};
const std::vector<std::string> kVerbPhrase = {"Loads", "Computes", "Finds",  "Updates", "Parses", "Merges",
                                              "Checks", "Renders",  "Sums",   "Filters", "Scales", "Counts"};
const std::vector<std::string> kOwners = {"apache", "square", "google", "eclipse", "pallets", "psf", "netflix", "jetbrains"};
const std::vector<std::string> kRepos = {"commons-lang", "okhttp", "guava", "jetty-util",
                                         "flask", "requests", "conductor", "kotlin"};
const std::vector<std::string> kHelpers = {"normalize", "lookup", "convert", "resolve", "adjust", "clamp"};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }
    bool coin() { return below(2) == 0; }

private:
    std::mt19937_64 gen_;
};

std::string cap(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

struct Shape {
    std::string verb, verb_phrase, noun, other, p1, p2, local, acc, helper, item;
    std::size_t constant;
    std::vector<int> blocks;  // statement kinds in order
};

Shape make_shape(Rng& rng, std::size_t i) {
    Shape s;
    std::size_t v = rng.below(kVerbs.size());
    s.verb = kVerbs[v];
    s.verb_phrase = kVerbPhrase[v];
    s.noun = rng.pick(kNouns);
    do {
        s.other = rng.pick(kNouns);
    } while (s.other == s.noun);
    s.p1 = s.noun + "s";
    s.p2 = s.other;
    s.local = "total";
    s.acc = "result";
    s.helper = rng.pick(kHelpers);
    s.item = s.noun;
    s.constant = 2 + i % 97;
    std::size_t n = 2 + rng.below(4);
    for (std::size_t k = 0; k < n; ++k) s.blocks.push_back(static_cast<int>(rng.below(5)));
    return s;
}

std::string java_code(const Shape& s, const std::string& name) {
    std::string out = fmt::format("public int {}(List<Integer> {}, int {}) {{\n", name, s.p1, s.p2);
    out += fmt::format("    int {} = {} * {};\n", s.local, s.p2, s.constant);
    out += fmt::format("    int {} = 0;\n", s.acc);
    for (int b : s.blocks) {
        switch (b) {
            case 0:
                out += fmt::format("    for (int {} : {}) {{\n        {} += {}({});\n    }}\n", s.item, s.p1, s.acc,
                                   s.helper, s.item);
                break;
            case 1:
                out += fmt::format("    if ({} > {}) {{\n        {} = {} - {};\n    }} else {{\n        {} = {} + 1;\n    }}\n",
                                   s.local, s.p2, s.acc, s.local, s.p2, s.acc, s.acc);
                break;
            case 2:
                out += fmt::format("    {} = {}.size() + {};\n", s.local, s.p1, s.acc);
                break;
            case 3:
                out += fmt::format("    while ({} < {}) {{\n        {} = {} * 2;\n    }}\n", s.acc, s.local, s.acc, s.acc);
                break;
            default:
                out += fmt::format("    try {{\n        {} = Integer.parseInt(String.valueOf({}));\n    }} catch "
                                   "(NumberFormatException e) {{\n        {} = -1;\n    }}\n",
                                   s.acc, s.local, s.acc);
                break;
        }
    }
    out += fmt::format("    return {} + {};\n}}", s.acc, s.local);
    return out;
}

std::string python_code(const Shape& s, const std::string& name) {
    std::string out = fmt::format("def {}({}, {}):\n", name, s.p1, s.p2);
    out += fmt::format("    {} = {} * {}\n", s.local, s.p2, s.constant);
    out += fmt::format("    {} = 0\n", s.acc);
    for (int b : s.blocks) {
        switch (b) {
            case 0:
                out += fmt::format("    for {} in {}:\n        {} += {}({})\n", s.item, s.p1, s.acc, s.helper, s.item);
                break;
            case 1:
                out += fmt::format("    if {} > {}:\n        {} = {} - {}\n    else:\n        {} = {} + 1\n", s.local,
                                   s.p2, s.acc, s.local, s.p2, s.acc, s.acc);
                break;
            case 2:
                out += fmt::format("    {} = len({}) + {}\n", s.local, s.p1, s.acc);
                break;
            case 3:
                out += fmt::format("    while {} < {}:\n        {} = {} * 2\n", s.acc, s.local, s.acc, s.acc);
                break;
            default:
                out += fmt::format("    try:\n        {} = int(str({}))\n    except ValueError as e:\n        {} = -1\n",
                                   s.acc, s.local, s.acc);
                break;
        }
    }
    out += fmt::format("    return {} + {}", s.acc, s.local);
    return out;
}

}  // namespace

SamplePool make_pool(Language language, std::size_t n, std::uint64_t seed, const SynthOptions& options) {
    if (language != Language::java && language != Language::python) {
        throw Error("synthetic corpora are available for java and python only");
    }
    Rng rng(seed);
    std::vector<Sample> samples;
    const auto base = std::chrono::sys_days{std::chrono::year{2019} / 1 / 1};
    for (std::size_t i = 0; i < n; ++i) {
        Shape s = make_shape(rng, i);
        std::size_t project = i % std::max<std::size_t>(1, options.projects);
        Sample sample;
        sample.language = language;
        sample.id = fmt::format("{}-{:04}", to_string(language), i);
        sample.repo = fmt::format("{}/{}", kOwners[project % kOwners.size()], kRepos[project % kRepos.size()]);
        if (language == Language::java) {
            std::string name = s.verb + cap(s.noun) + cap(s.other) + std::to_string(i);
            sample.path = fmt::format("src/main/java/com/{}/{}Util.java", kOwners[project % kOwners.size()], cap(s.noun));
            sample.func_name = fmt::format("{}Util.{}", cap(s.noun), name);
            sample.code = java_code(s, name);
        } else {
            std::string name = fmt::format("{}_{}_{}{}", s.verb, s.noun, s.other, i);
            sample.path = fmt::format("{}/{}_utils.py", kRepos[project % kRepos.size()], s.noun);
            sample.func_name = fmt::format("{}_utils.{}", s.noun, name);
            sample.code = python_code(s, name);
        }
        sample.summary = fmt::format("{} the {} {} of the given {}.", s.verb_phrase, s.other,
                                     s.blocks.front() == 0 ? "total" : "value", s.p1);
        if (options.created_at) {
            sample.created_at = std::chrono::sys_seconds(base + std::chrono::days(i / options.projects));
        }
        samples.push_back(std::move(sample));
    }
    return SamplePool(language, std::move(samples));
}

}  // namespace asap::synth
