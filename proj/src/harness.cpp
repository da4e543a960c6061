#include "asap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "asap/error.hpp"
#include "asap/hash.hpp"

namespace asap {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Task t) noexcept { return t == Task::complete ? "complete" : "summarize"; }

Task parse_task(std::string_view s) {
    if (s == "summarize") return Task::summarize;
    if (s == "complete") return Task::complete;
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

std::string_view to_string(RecordStatus s) noexcept {
    switch (s) {
        case RecordStatus::ok: return "ok";
        case RecordStatus::failed_empty: return "failed_empty";
        case RecordStatus::oversize: return "oversize";
        case RecordStatus::skipped: return "skipped";
    }
    return "?";
}

namespace {

RecordStatus parse_status(std::string_view s) {
    for (auto st : {RecordStatus::ok, RecordStatus::failed_empty, RecordStatus::oversize, RecordStatus::skipped}) {
        if (to_string(st) == s) return st;
    }
    throw ConfigError("unknown record status '" + std::string(s) + "'");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// Runs f(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    if (workers == 1) {
        body();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

std::string trim_copy(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> split_lines(std::string_view code) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= code.size()) {
        std::size_t nl = code.find('\n', pos);
        if (nl == std::string_view::npos) nl = code.size();
        std::string line(code.substr(pos, nl - pos));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        pos = nl + 1;
    }
    return lines;
}

}  // namespace

// ---- config ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults_for(Task task) {
    ExperimentConfig c;
    c.task = task;
    if (task == Task::complete) {
        c.model = ModelParams::for_completion();
        c.metrics = completion_metrics();
    } else {
        c.model = ModelParams::for_summarization();
        c.metrics = summary_metrics();
    }
    return c;
}

namespace {

json optional_path(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

json retry_json(const RetryPolicy& r) {
    return json{{"max_attempts", r.max_attempts},
                {"initial_delay_ms", r.initial_delay.count()},
                {"multiplier", r.multiplier},
                {"max_delay_ms", r.max_delay.count()},
                {"jitter", r.jitter}};
}

json metrics_json(const std::vector<Metric>& metrics) {
    json out = json::array();
    for (Metric m : metrics) out.push_back(to_string(m));
    return out;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
    return json{
        {"name", c.name},
        {"task", to_string(c.task)},
        {"language", to_string(c.language)},
        {"data",
         {{"pool", c.pool_path.string()},
          {"test", c.test_path.string()},
          {"index", optional_path(c.index_path)},
          {"metadata", optional_path(c.metadata_path)},
          {"test_ids", optional_path(c.test_ids_path)},
          {"test_n", c.test_n},
          {"seed", c.seed},
          {"project", c.project ? json(*c.project) : json(nullptr)},
          {"split_fraction", c.split_fraction}}},
        {"prompt",
         {{"components", to_string(c.components)},
          {"tokenized_path", c.tokenized_path},
          {"tag_free_identifiers", c.tag_free_identifiers},
          {"minimal_tags", c.minimal_tags},
          {"best_last", c.best_last},
          {"shots", c.shots},
          {"max_extra_shots", c.max_extra_shots},
          {"budget", c.budget},
          {"reserve", c.reserve},
          {"max_dfg_lines", c.max_dfg_lines}}},
        {"retrieval", {{"k1", c.bm25.k1}, {"b", c.bm25.b}, {"split_subtokens", c.tokenizer.split_subtokens}}},
        {"model", to_json(c.model)},
        {"client",
         {{"cache_dir", optional_path(c.cache_dir)},
          {"requests_per_second", c.requests_per_second},
          {"workers", c.workers},
          {"retry", retry_json(c.retry)}}},
        {"metrics", metrics_json(c.metrics)},
        {"output", {{"dir", c.output_dir.string()}, {"baseline", optional_path(c.baseline_dir)}}},
    };
}

namespace {

using Setter = std::function<void(const json&)>;

void apply_section(const json& obj, const std::string& where, const std::map<std::string, Setter>& setters) {
    if (!obj.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown config key '" + where + key + "'");
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw ConfigError("bad value for '" + where + key + "': " + e.what());
        }
    }
}

std::optional<fs::path> path_or_null(const json& v) {
    if (v.is_null()) return std::nullopt;
    return fs::path(v.get<std::string>());
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    Task task = j.contains("task") ? parse_task(j.at("task").get<std::string>()) : Task::summarize;
    ExperimentConfig c = ExperimentConfig::defaults_for(task);
    std::map<std::string, Setter> top{
        {"name", [&](const json& v) { c.name = v.get<std::string>(); }},
        {"task", [](const json&) {}},
        {"language", [&](const json& v) { c.language = parse_language(v.get<std::string>()); }},
        {"data",
         [&](const json& v) {
             apply_section(v, "data.",
                           {{"pool", [&](const json& x) { c.pool_path = x.get<std::string>(); }},
                            {"test", [&](const json& x) { c.test_path = x.is_null() ? "" : x.get<std::string>(); }},
                            {"index", [&](const json& x) { c.index_path = path_or_null(x); }},
                            {"metadata", [&](const json& x) { c.metadata_path = path_or_null(x); }},
                            {"test_ids", [&](const json& x) { c.test_ids_path = path_or_null(x); }},
                            {"test_n", [&](const json& x) { c.test_n = x.get<std::size_t>(); }},
                            {"seed", [&](const json& x) { c.seed = x.get<std::uint64_t>(); }},
                            {"project",
                             [&](const json& x) {
                                 c.project = x.is_null() ? std::nullopt : std::optional(x.get<std::string>());
                             }},
                            {"split_fraction", [&](const json& x) { c.split_fraction = x.get<double>(); }}});
         }},
        {"prompt",
         [&](const json& v) {
             apply_section(v, "prompt.",
                           {{"components", [&](const json& x) { c.components = parse_components(x.get<std::string>()); }},
                            {"tokenized_path", [&](const json& x) { c.tokenized_path = x.get<bool>(); }},
                            {"tag_free_identifiers", [&](const json& x) { c.tag_free_identifiers = x.get<bool>(); }},
                            {"minimal_tags", [&](const json& x) { c.minimal_tags = x.get<bool>(); }},
                            {"best_last", [&](const json& x) { c.best_last = x.get<bool>(); }},
                            {"shots", [&](const json& x) { c.shots = x.get<std::size_t>(); }},
                            {"max_extra_shots", [&](const json& x) { c.max_extra_shots = x.get<std::size_t>(); }},
                            {"budget", [&](const json& x) { c.budget = x.get<std::size_t>(); }},
                            {"reserve", [&](const json& x) { c.reserve = x.get<std::size_t>(); }},
                            {"max_dfg_lines", [&](const json& x) { c.max_dfg_lines = x.get<std::size_t>(); }}});
         }},
        {"retrieval",
         [&](const json& v) {
             apply_section(v, "retrieval.",
                           {{"k1", [&](const json& x) { c.bm25.k1 = x.get<double>(); }},
                            {"b", [&](const json& x) { c.bm25.b = x.get<double>(); }},
                            {"split_subtokens", [&](const json& x) { c.tokenizer.split_subtokens = x.get<bool>(); }}});
         }},
        {"model",
         [&](const json& v) {
             // partial model sections keep the task defaults for the missing fields
             json merged = to_json(c.model);
             if (!v.is_object()) throw ConfigError("config section 'model.' must be an object");
             for (const auto& [key, value] : v.items()) {
                 if (!merged.contains(key)) throw ConfigError("unknown config key 'model." + key + "'");
                 merged[key] = value;
             }
             c.model = model_params_from_json(merged);
         }},
        {"client",
         [&](const json& v) {
             apply_section(
                 v, "client.",
                 {{"cache_dir", [&](const json& x) { c.cache_dir = path_or_null(x); }},
                  {"requests_per_second", [&](const json& x) { c.requests_per_second = x.get<double>(); }},
                  {"workers", [&](const json& x) { c.workers = x.get<std::size_t>(); }},
                  {"retry", [&](const json& x) {
                       apply_section(
                           x, "client.retry.",
                           {{"max_attempts", [&](const json& y) { c.retry.max_attempts = y.get<std::size_t>(); }},
                            {"initial_delay_ms",
                             [&](const json& y) { c.retry.initial_delay = std::chrono::milliseconds(y.get<std::int64_t>()); }},
                            {"multiplier", [&](const json& y) { c.retry.multiplier = y.get<double>(); }},
                            {"max_delay_ms",
                             [&](const json& y) { c.retry.max_delay = std::chrono::milliseconds(y.get<std::int64_t>()); }},
                            {"jitter", [&](const json& y) { c.retry.jitter = y.get<double>(); }}});
                   }}});
         }},
        {"metrics",
         [&](const json& v) {
             if (v.is_string()) {
                 c.metrics = parse_metric_list(v.get<std::string>());
             } else {
                 c.metrics.clear();
                 for (const auto& m : v) c.metrics.push_back(parse_metric(m.get<std::string>()));
             }
         }},
        {"output",
         [&](const json& v) {
             apply_section(v, "output.",
                           {{"dir", [&](const json& x) { c.output_dir = x.get<std::string>(); }},
                            {"baseline", [&](const json& x) { c.baseline_dir = path_or_null(x); }}});
         }},
    };
    apply_section(j, "", top);
    if (c.workers == 0) throw ConfigError("client.workers must be at least 1");
    if (c.split_fraction <= 0.0 || c.split_fraction >= 1.0) throw ConfigError("data.split_fraction must be in (0, 1)");
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    ExperimentConfig c = config_from_json(j);
    // relative paths in a config file are relative to the file
    fs::path base = path.parent_path();
    auto rebase = [&](fs::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    auto rebase_opt = [&](std::optional<fs::path>& p) {
        if (p) rebase(*p);
    };
    rebase(c.pool_path);
    rebase(c.test_path);
    rebase(c.output_dir);
    rebase_opt(c.index_path);
    rebase_opt(c.metadata_path);
    rebase_opt(c.test_ids_path);
    rebase_opt(c.cache_dir);
    rebase_opt(c.baseline_dir);
    return c;
}

ExperimentConfig apply_overrides(const ExperimentConfig& c, const std::vector<std::string>& overrides) {
    json j = to_json(c);
    for (const auto& o : overrides) {
        auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        std::string key = o.substr(0, eq);
        std::string raw = o.substr(eq + 1);
        json* node = &j;
        std::size_t pos = 0;
        while (true) {
            std::size_t dot = key.find('.', pos);
            std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
            if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
            node = &(*node)[part];
            if (dot == std::string::npos) break;
            pos = dot + 1;
        }
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::parse_error&) {
            value = raw;
        }
        if (node->is_string() && !value.is_string()) value = raw;
        *node = value;
    }
    if (j.contains("task") && j["task"].get<std::string>() != to_string(c.task)) {
        // a task switch re-derives model and metric defaults unless they were overridden too
        bool model_set = false, metrics_set = false;
        for (const auto& o : overrides) {
            model_set |= o.rfind("model.", 0) == 0;
            metrics_set |= o.rfind("metrics=", 0) == 0;
        }
        ExperimentConfig fresh = ExperimentConfig::defaults_for(parse_task(j["task"].get<std::string>()));
        if (!model_set) j["model"] = to_json(fresh.model);
        if (!metrics_set) j["metrics"] = metrics_json(fresh.metrics);
    }
    return config_from_json(j);
}

// ---- records and reports ---------------------------------------------------------------

json to_json(const RunRecord& r) {
    json scores = json::object();
    for (const auto& [m, v] : r.scores) scores[std::string(to_string(m))] = v;
    json out{{"id", r.sample_id},
             {"status", to_string(r.status)},
             {"prompt_hash", r.prompt_hash},
             {"request_hash", r.request_hash},
             {"shots_used", r.shots_used},
             {"output", r.output},
             {"reference", r.reference},
             {"scores", scores},
             {"warnings", r.warnings}};
    if (r.target_line) out["target_line"] = *r.target_line;
    return out;
}

RunRecord record_from_json(const json& j) {
    RunRecord r;
    try {
        r.sample_id = j.at("id").get<std::string>();
        r.status = parse_status(j.value("status", std::string("ok")));
        r.prompt_hash = j.value("prompt_hash", std::string());
        r.request_hash = j.value("request_hash", std::string());
        r.shots_used = j.value("shots_used", std::size_t{0});
        r.output = j.value("output", std::string());
        r.reference = j.value("reference", std::string());
        if (j.contains("target_line")) r.target_line = j.at("target_line").get<std::size_t>();
        if (j.contains("scores")) {
            for (const auto& [k, v] : j.at("scores").items()) r.scores[parse_metric(k)] = v.get<double>();
        }
        if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run record: ") + e.what());
    }
    return r;
}

json to_json(const Comparison& c) {
    json out{{"baseline", c.baseline},
             {"treatment", c.treatment},
             {"metric", to_string(c.metric)},
             {"n_pairs", c.n_pairs}};
    if (!c.error.empty()) {
        out["error"] = c.error;
        return out;
    }
    out["test"] = to_string(c.test.test);
    out["method"] = c.test.method;
    out["statistic"] = c.test.statistic;
    out["n_effective"] = c.test.n_effective;
    out["p_value"] = c.test.p_value;
    out["adjusted_p"] = c.adjusted_p ? json(*c.adjusted_p) : json(nullptr);
    return out;
}

namespace {

json aggregates_json(const std::map<Metric, double>& agg) {
    json out = json::object();
    for (const auto& [m, v] : agg) out[std::string(to_string(m))] = v;
    return out;
}

// Conventions that affect absolute numbers; stored with every report.
json conventions() {
    return json{{"summary_tokenizer", "lowercased [A-Za-z0-9_]+ words, other non-space characters standalone"},
                {"bleu_cn", "BLEU-4, add-one smoothing for n>=2, brevity penalty min(0, 1-(r+1)/(c+1))"},
                {"bleu_dc", "BLEU-4, Chen-Cherry smoothing method 4, k=5"},
                {"rouge_l", "LCS F-measure, beta=1.2"},
                {"meteor", "exact + Porter stem stages, no synonyms, alpha=0.9 beta=3 gamma=0.5"},
                {"es", "character-level Levenshtein on whitespace-normalized strings"},
                {"identifier_tags",
                 json::array({"function_name", "parameter", "local_variable", "call", "type", "attribute", "identifier"})},
                {"dfg_edge_kinds", json::array({"comes_from", "computed_from"})},
                {"wilcoxon_exact_max_n", kWilcoxonExactMaxN},
                {"mcnemar_exact_max_n", kMcNemarExactMaxN}};
}

}  // namespace

json to_json(const Report& r) {
    json comparisons = json::array();
    for (const auto& c : r.comparisons) comparisons.push_back(to_json(c));
    return json{{"name", r.name},
                {"format_version", kReportFormatVersion},
                {"prompt_format_version", kPromptFormatVersion},
                {"config", r.config},
                {"conventions", conventions()},
                {"n_samples", r.records.size()},
                {"n_ok", r.n_ok},
                {"n_failed", r.n_failed},
                {"aggregates", aggregates_json(r.aggregates)},
                {"warnings", r.warnings},
                {"comparisons", comparisons}};
}

json to_json(const AblationReport& r) {
    json runs = json::array();
    for (const auto& run : r.runs) {
        runs.push_back(json{{"name", run.name},
                            {"n_ok", run.n_ok},
                            {"n_failed", run.n_failed},
                            {"aggregates", aggregates_json(run.aggregates)}});
    }
    json comparisons = json::array();
    for (const auto& c : r.comparisons) comparisons.push_back(to_json(c));
    return json{{"format_version", kReportFormatVersion}, {"runs", runs}, {"comparisons", comparisons}};
}

namespace {

void finalize_report(Report& report, const std::vector<Metric>& metrics) {
    std::sort(report.records.begin(), report.records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.sample_id < b.sample_id; });
    std::vector<MetricScore> scores;
    std::size_t empties = 0;
    for (const auto& rec : report.records) {
        if (rec.status == RecordStatus::ok) {
            ++report.n_ok;
            for (const auto& [m, v] : rec.scores) scores.push_back({m, v, rec.sample_id});
        } else {
            ++report.n_failed;
            empties += rec.status == RecordStatus::failed_empty;
        }
    }
    report.aggregates = aggregate(scores);
    for (Metric m : metrics) report.aggregates.try_emplace(m, 0.0);
    if (!report.records.empty() && empties * 50 > report.records.size()) {
        report.warnings.push_back(fmt::format("{} of {} samples ended with an unresolved empty completion (above 2%)",
                                              empties, report.records.size()));
    }
    std::size_t oversize = 0, skipped = 0;
    for (const auto& rec : report.records) {
        oversize += rec.status == RecordStatus::oversize;
        skipped += rec.status == RecordStatus::skipped;
    }
    if (oversize > 0) report.warnings.push_back(fmt::format("{} samples did not fit the prompt budget", oversize));
    if (skipped > 0) report.warnings.push_back(fmt::format("{} samples were skipped", skipped));
}

void score_record(RunRecord& rec, const std::vector<Metric>& metrics) {
    for (Metric m : metrics) {
        try {
            rec.scores[m] = compute_metric(m, rec.output, rec.reference);
        } catch (const MetricError& e) {
            rec.warnings.push_back(fmt::format("{}: {}", to_string(m), e.what()));
        }
    }
}

}  // namespace

// ---- inputs ------------------------------------------------------------------------------

RunInputs make_inputs(SamplePool pool, SamplePool tests, const ExperimentConfig& config) {
    Bm25Index index = Bm25Index::build(pool, config.bm25, config.tokenizer);
    return RunInputs{std::move(pool), std::move(tests), std::move(index)};
}

RunInputs load_inputs(const ExperimentConfig& config) {
    LoadOptions opts;
    opts.require_summary = config.task == Task::summarize;
    opts.strip_python_docstring = config.task == Task::summarize;
    if (config.pool_path.empty()) throw ConfigError("data.pool is not set");
    SamplePool pool = load_pool(config.pool_path, config.language, opts);
    if (config.metadata_path) pool = attach_created_at(pool, *config.metadata_path);
    std::optional<SamplePool> tests;
    if (config.project) {
        ProjectSplit split = split_same_project(pool, *config.project, SplitFraction{config.split_fraction});
        pool = std::move(split.train);
        tests = std::move(split.test);
    } else if (!config.test_path.empty()) {
        tests = load_pool(config.test_path, config.language, opts);
    } else {
        tests = pool;
    }
    if (config.test_ids_path) {
        tests = select_ids(*tests, load_id_list(*config.test_ids_path));
    } else if (config.test_n > 0 && config.test_n < tests->size()) {
        tests = sample_uniform(*tests, config.test_n, config.seed);
    }
    if (config.index_path) {
        Bm25Index index = Bm25Index::load(*config.index_path);
        if (index.doc_ids().size() != pool.size()) {
            throw IndexError(fmt::format("index {} covers {} documents but the pool has {}", config.index_path->string(),
                                         index.size(), pool.size()));
        }
        for (const auto& id : index.doc_ids()) {
            if (!pool.find(id)) throw IndexError("index document '" + id + "' is not in the pool");
        }
        return RunInputs{std::move(pool), std::move(*tests), std::move(index)};
    }
    return make_inputs(std::move(pool), std::move(*tests), config);
}

ClientOptions client_options(const ExperimentConfig& config) {
    ClientOptions o;
    o.cache_dir = config.cache_dir;
    o.retry = config.retry;
    o.requests_per_second = config.requests_per_second;
    o.jitter_seed = config.seed;
    return o;
}

RetrievalTable retrieve_all(const ExperimentConfig& config, const RunInputs& inputs) {
    const std::size_t depth = config.shots + config.max_extra_shots;
    std::vector<std::vector<ScoredDoc>> hits(inputs.tests.size());
    if (depth > 0) {
        parallel_for(inputs.tests.size(), config.workers, [&](std::size_t i) {
            const Sample& t = inputs.tests[i];
            hits[i] = inputs.index.retrieve(t.code, depth, t.id);
        });
    }
    RetrievalTable table;
    for (std::size_t i = 0; i < hits.size(); ++i) table[inputs.tests[i].id] = std::move(hits[i]);
    return table;
}

ProductMap analyze_all(const ExperimentConfig& config, const RunInputs& inputs, const RetrievalTable& retrieval) {
    ProductMap products;
    if (!config.components.any()) return products;
    std::vector<const Sample*> todo;
    std::set<std::string> seen;
    for (const auto& t : inputs.tests) {
        if (seen.insert(t.id).second) todo.push_back(&t);
    }
    for (const auto& t : inputs.tests) {
        auto it = retrieval.find(t.id);
        if (it == retrieval.end()) continue;
        for (const auto& hit : it->second) {
            if (!seen.insert(hit.id).second) continue;
            if (const Sample* s = inputs.pool.find(hit.id)) todo.push_back(s);
        }
    }
    std::vector<AnalysisProduct> out(todo.size());
    parallel_for(todo.size(), config.workers, [&](std::size_t i) {
        try {
            out[i] = analyze(*todo[i], config.components);
        } catch (const AnalysisError& e) {
            out[i].warnings.push_back(e.what());
        }
        if (out[i].repo_fact) out[i].repo_fact->tokenized = config.tokenized_path;
    });
    for (std::size_t i = 0; i < todo.size(); ++i) products.emplace(todo[i]->id, std::move(out[i]));
    return products;
}

namespace {

PromptOptions prompt_options(const ExperimentConfig& config) {
    PromptOptions o;
    o.budget = config.budget;
    o.reserve = config.reserve;
    o.max_dfg_lines = config.max_dfg_lines;
    o.tag_free = config.tag_free_identifiers;
    o.minimal_tags = config.minimal_tags;
    o.best_last = config.best_last;
    return o;
}

AnalysisProduct masked(const AnalysisProduct& p, const Components& c, bool tokenized) {
    AnalysisProduct out;
    if (c.repo && p.repo_fact) {
        out.repo_fact = p.repo_fact;
        out.repo_fact->tokenized = tokenized;
    }
    if (c.identifiers) out.identifiers = p.identifiers;
    if (c.dfg) out.dfg = p.dfg;
    return out;
}

RunRecord summarize_one(const ExperimentConfig& config, const RunInputs& inputs, LlmClient& client,
                        const Sample& target, const std::vector<ScoredDoc>& hits, const ProductMap& products) {
    RunRecord rec;
    rec.sample_id = target.id;
    rec.reference = target.summary;
    std::vector<Sample> exemplars;
    ProductMap view;
    auto add_product = [&](const Sample& s) {
        auto it = products.find(s.id);
        if (it == products.end()) return;
        view[s.id] = masked(it->second, config.components, config.tokenized_path);
        for (const auto& w : it->second.warnings) {
            if (&s == &target) rec.warnings.push_back("analysis: " + w);
        }
    };
    add_product(target);
    for (const auto& hit : hits) {
        const Sample* s = inputs.pool.find(hit.id);
        if (!s) continue;
        exemplars.push_back(*s);
        add_product(*s);
    }
    if (exemplars.size() < config.shots) {
        rec.warnings.push_back(fmt::format("only {} exemplars retrieved for {} shots", exemplars.size(), config.shots));
    }
    const PromptOptions opts = prompt_options(config);
    const std::size_t cap = config.shots + config.max_extra_shots;
    std::size_t shots = config.shots;
    std::optional<std::size_t> previous_used;
    while (true) {
        Prompt prompt;
        try {
            prompt = assemble_summarization_prompt(exemplars, target, view, shots, opts);
        } catch (const OversizePrompt& e) {
            rec.status = previous_used ? RecordStatus::failed_empty : RecordStatus::oversize;
            rec.warnings.push_back(e.what());
            return rec;
        }
        if (previous_used && prompt.shots_used <= *previous_used) {
            rec.status = RecordStatus::failed_empty;
            rec.warnings.push_back(fmt::format("empty completion not resolved: no further exemplar fits after {} shots",
                                               *previous_used));
            return rec;
        }
        for (const auto& w : prompt.warnings) {
            if (std::find(rec.warnings.begin(), rec.warnings.end(), w) == rec.warnings.end()) rec.warnings.push_back(w);
        }
        rec.shots_used = prompt.shots_used;
        rec.prompt_hash = sha256_hex(prompt.text);
        rec.request_hash = request_hash(prompt.text, config.model);
        try {
            CompletionResult r = client.complete(prompt, config.model);
            rec.output = trim_copy(r.text);
            rec.status = RecordStatus::ok;
            break;
        } catch (const EmptyCompletion&) {
            if (shots >= cap) {
                rec.status = RecordStatus::failed_empty;
                rec.warnings.push_back(
                    fmt::format("empty completion with {} shots; recovery cap of {} shots reached", prompt.shots_used, cap));
                return rec;
            }
            rec.warnings.push_back(
                fmt::format("empty completion with {} shots; retrying with {}", prompt.shots_used, shots + 1));
            previous_used = prompt.shots_used;
            ++shots;
        }
    }
    score_record(rec, config.metrics);
    return rec;
}

void pair_with_baseline(const ExperimentConfig& config, Report& report) {
    if (!config.baseline_dir) return;
    auto baseline = read_records(*config.baseline_dir / kRecordsFile);
    report.comparisons =
        compare_records(baseline, report.records, config.metrics, config.baseline_dir->filename().string(), config.name);
}

}  // namespace

Report run_summarization(const ExperimentConfig& config, const RunInputs& inputs, LlmClient& client,
                         const RetrievalTable& retrieval, const ProductMap& products) {
    Report report;
    report.name = config.name;
    report.config = to_json(config);
    std::vector<RunRecord> records(inputs.tests.size());
    static const std::vector<ScoredDoc> kNoHits;
    parallel_for(inputs.tests.size(), config.workers, [&](std::size_t i) {
        const Sample& t = inputs.tests[i];
        auto it = retrieval.find(t.id);
        records[i] = summarize_one(config, inputs, client, t, it == retrieval.end() ? kNoHits : it->second, products);
    });
    report.records = std::move(records);
    finalize_report(report, config.metrics);
    pair_with_baseline(config, report);
    return report;
}

Report run_summarization(const ExperimentConfig& config, const RunInputs& inputs, LlmClient& client) {
    if (config.task != Task::summarize) throw ConfigError("run_summarization needs task 'summarize'");
    RetrievalTable retrieval = retrieve_all(config, inputs);
    ProductMap products = analyze_all(config, inputs, retrieval);
    return run_summarization(config, inputs, client, retrieval, products);
}

// ---- completion ---------------------------------------------------------------------------

std::vector<std::size_t> eligible_target_lines(std::string_view code, Language language) {
    auto lines = split_lines(code);
    std::vector<std::string_view> prefixes;
    switch (language) {
        case Language::python:
        case Language::ruby: prefixes = {"#"}; break;
        case Language::php: prefixes = {"#", "//", "/*", "*"}; break;
        default: prefixes = {"//", "/*", "*"}; break;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::string t = trim_copy(lines[i]);
        if (t.empty()) continue;
        bool comment = std::any_of(prefixes.begin(), prefixes.end(),
                                   [&](std::string_view p) { return std::string_view(t).starts_with(p); });
        if (!comment) out.push_back(i);
    }
    return out;
}

std::optional<std::size_t> choose_target_line(const Sample& sample, std::uint64_t seed) {
    auto eligible = eligible_target_lines(sample.code, sample.language);
    if (eligible.empty()) return std::nullopt;
    std::uint64_t h = std::stoull(sha256_hex(sample.id).substr(0, 16), nullptr, 16);
    // splitmix64 finalizer over (seed, id hash)
    std::uint64_t z = h ^ (seed + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return eligible[z % eligible.size()];
}

namespace {

RunRecord complete_one(const ExperimentConfig& config, LlmClient& client, const Sample& target) {
    RunRecord rec;
    rec.sample_id = target.id;
    auto line = choose_target_line(target, config.seed);
    if (!line) {
        rec.status = RecordStatus::skipped;
        rec.warnings.push_back("no eligible target line");
        return rec;
    }
    rec.target_line = *line;
    auto lines = split_lines(target.code);
    rec.reference = lines[*line];
    std::vector<std::string> prefix(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(*line));
    AnalysisProduct product;
    if (config.components.any()) {
        std::optional<RepoFact> repo;
        if (config.components.repo) {
            if (std::count(target.repo.begin(), target.repo.end(), '/') == 1) {
                repo = make_repo_fact(target, config.tokenized_path);
            } else {
                rec.warnings.push_back("analysis: repo '" + target.repo + "' is not owner/name");
            }
        }
        std::string prefix_text;
        for (std::size_t i = 0; i < prefix.size(); ++i) {
            if (i > 0) prefix_text += '\n';
            prefix_text += prefix[i];
        }
        try {
            product = analyze_prefix(prefix_text, target.language, repo, config.components);
        } catch (const std::exception& e) {
            rec.warnings.push_back(std::string("analysis: ") + e.what());
            product = AnalysisProduct{};
            if (config.components.repo) product.repo_fact = repo;
        }
    }
    Prompt prompt;
    try {
        prompt = assemble_completion_prompt(prefix, product, prompt_options(config), target.id);
    } catch (const OversizePrompt& e) {
        rec.status = RecordStatus::oversize;
        rec.warnings.push_back(e.what());
        return rec;
    }
    for (const auto& w : prompt.warnings) rec.warnings.push_back(w);
    rec.prompt_hash = sha256_hex(prompt.text);
    rec.request_hash = request_hash(prompt.text, config.model);
    try {
        CompletionResult r = client.complete(prompt, config.model);
        std::string_view text = r.text;
        // the model may run past the target line when the stop sequence is not honored
        while (!text.empty() && text.front() == '\n') text.remove_prefix(1);
        rec.output = std::string(text.substr(0, text.find('\n')));
        rec.status = RecordStatus::ok;
    } catch (const EmptyCompletion&) {
        rec.status = RecordStatus::failed_empty;
        rec.warnings.push_back("empty completion");
        return rec;
    }
    score_record(rec, config.metrics);
    return rec;
}

}  // namespace

Report run_completion(const ExperimentConfig& config, const RunInputs& inputs, LlmClient& client) {
    if (config.task != Task::complete) throw ConfigError("run_completion needs task 'complete'");
    Report report;
    report.name = config.name;
    report.config = to_json(config);
    std::vector<RunRecord> records(inputs.tests.size());
    parallel_for(inputs.tests.size(), config.workers,
                 [&](std::size_t i) { records[i] = complete_one(config, client, inputs.tests[i]); });
    report.records = std::move(records);
    finalize_report(report, config.metrics);
    pair_with_baseline(config, report);
    return report;
}

// ---- comparisons and ablation ---------------------------------------------------------------

namespace {

std::vector<Comparison> raw_comparisons(const std::vector<RunRecord>& baseline, const std::vector<RunRecord>& treatment,
                                        const std::vector<Metric>& metrics, const std::string& baseline_name,
                                        const std::string& treatment_name) {
    std::map<std::string, const RunRecord*> base;
    for (const auto& r : baseline) {
        if (r.status == RecordStatus::ok) base[r.sample_id] = &r;
    }
    std::vector<Comparison> out;
    for (Metric m : metrics) {
        Comparison c;
        c.baseline = baseline_name;
        c.treatment = treatment_name;
        c.metric = m;
        std::vector<double> a, b;
        std::size_t only_base = 0, only_treat = 0;
        for (const auto& r : treatment) {
            if (r.status != RecordStatus::ok) continue;
            auto it = base.find(r.sample_id);
            if (it == base.end()) continue;
            auto ts = r.scores.find(m);
            auto bs = it->second->scores.find(m);
            if (ts == r.scores.end() || bs == it->second->scores.end()) continue;
            a.push_back(ts->second);
            b.push_back(bs->second);
            bool t_hit = ts->second >= 100.0, b_hit = bs->second >= 100.0;
            only_base += b_hit && !t_hit;
            only_treat += t_hit && !b_hit;
        }
        c.n_pairs = a.size();
        try {
            c.test = m == Metric::em ? mcnemar(only_base, only_treat) : wilcoxon_one_sided(a, b);
        } catch (const StatsError& e) {
            c.error = e.what();
        }
        out.push_back(std::move(c));
    }
    return out;
}

void adjust_family(std::vector<Comparison*> family) {
    std::vector<double> p;
    std::vector<Comparison*> valid;
    for (Comparison* c : family) {
        if (!c->error.empty()) continue;
        p.push_back(c->test.p_value);
        valid.push_back(c);
    }
    auto adjusted = benjamini_hochberg(p);
    for (std::size_t i = 0; i < valid.size(); ++i) valid[i]->adjusted_p = adjusted[i];
}

}  // namespace

std::vector<Comparison> compare_records(const std::vector<RunRecord>& baseline, const std::vector<RunRecord>& treatment,
                                        const std::vector<Metric>& metrics, std::string baseline_name,
                                        std::string treatment_name) {
    auto out = raw_comparisons(baseline, treatment, metrics, baseline_name, treatment_name);
    std::vector<Comparison*> family;
    for (auto& c : out) family.push_back(&c);
    adjust_family(family);
    return out;
}

std::vector<Variant> default_variants() {
    return {{"ALL", parse_components("repo,id,dfg")},
            {"-repo", parse_components("id,dfg")},
            {"-id", parse_components("repo,dfg")},
            {"-dfg", parse_components("repo,id")}};
}

Variant parse_variant(std::string_view spec) {
    std::string name;
    std::string_view comps = spec;
    if (auto eq = spec.find('='); eq != std::string_view::npos) {
        name = std::string(spec.substr(0, eq));
        comps = spec.substr(eq + 1);
    }
    Components c;
    if (comps == "ALL") {
        c = Components::all();
    } else if (comps.starts_with("-")) {
        c = Components::all();
        Components drop = parse_components(comps.substr(1));
        c.repo = c.repo && !drop.repo;
        c.identifiers = c.identifiers && !drop.identifiers;
        c.dfg = c.dfg && !drop.dfg;
    } else {
        c = parse_components(comps);
    }
    if (name.empty()) name = std::string(comps);
    return {name, c};
}

AblationReport run_ablation(const ExperimentConfig& config, const std::vector<Variant>& variants,
                            const RunInputs& inputs, LlmClient& client) {
    if (variants.empty()) throw ConfigError("ablation needs at least one variant");
    if (config.task != Task::summarize) throw ConfigError("ablation runs summarization variants");
    RetrievalTable retrieval = retrieve_all(config, inputs);
    ExperimentConfig full = config;
    full.components = Components::none();
    for (const auto& v : variants) {
        full.components.repo |= v.components.repo;
        full.components.identifiers |= v.components.identifiers;
        full.components.dfg |= v.components.dfg;
    }
    ProductMap products = analyze_all(full, inputs, retrieval);
    AblationReport out;
    for (const auto& v : variants) {
        ExperimentConfig cfg = config;
        cfg.name = v.name;
        cfg.components = v.components;
        cfg.baseline_dir.reset();
        out.runs.push_back(run_summarization(cfg, inputs, client, retrieval, products));
    }
    // H1: the first variant beats each of the others
    for (std::size_t j = 1; j < out.runs.size(); ++j) {
        auto cs = raw_comparisons(out.runs[j].records, out.runs[0].records, config.metrics, out.runs[j].name,
                                  out.runs[0].name);
        for (auto& c : cs) out.comparisons.push_back(std::move(c));
    }
    for (Metric m : config.metrics) {
        std::vector<Comparison*> family;
        for (auto& c : out.comparisons) {
            if (c.metric == m) family.push_back(&c);
        }
        adjust_family(family);
    }
    return out;
}

// ---- output files ---------------------------------------------------------------------------------

namespace {

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_number(double v) { return fmt::format("{:.6f}", v); }

std::string comparisons_text(const std::vector<Comparison>& comparisons) {
    json arr = json::array();
    for (const auto& c : comparisons) arr.push_back(to_json(c));
    return arr.dump(2) + "\n";
}

}  // namespace

void write_report(const Report& report, const fs::path& dir) {
    fs::create_directories(dir);
    std::string records;
    for (const auto& r : report.records) records += to_json(r).dump() + "\n";
    write_file(dir / kRecordsFile, records);

    std::vector<Metric> metrics;
    for (const auto& [m, v] : report.aggregates) metrics.push_back(m);
    std::string agg = "metric,mean,n\n";
    for (const auto& [m, v] : report.aggregates) {
        agg += fmt::format("{},{},{}\n", to_string(m), format_number(v), report.n_ok);
    }
    write_file(dir / kAggregatesFile, agg);

    std::string scores = "id,status";
    for (Metric m : metrics) scores += fmt::format(",{}", to_string(m));
    scores += "\n";
    for (const auto& r : report.records) {
        scores += csv_field(r.sample_id) + "," + std::string(to_string(r.status));
        for (Metric m : metrics) {
            auto it = r.scores.find(m);
            scores += "," + (it == r.scores.end() ? std::string() : format_number(it->second));
        }
        scores += "\n";
    }
    write_file(dir / "scores.csv", scores);
    write_file(dir / kReportFile, to_json(report).dump(2) + "\n");
    write_file(dir / kComparisonFile, comparisons_text(report.comparisons));
}

void write_ablation(const AblationReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& run : report.runs) {
        std::string sub = run.name;
        for (char& ch : sub) {
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
        }
        if (sub.starts_with("-")) sub = "no" + sub;
        write_report(run, dir / sub);
    }
    std::string agg = "variant,metric,mean,n\n";
    for (const auto& run : report.runs) {
        for (const auto& [m, v] : run.aggregates) {
            agg += fmt::format("{},{},{},{}\n", csv_field(run.name), to_string(m), format_number(v), run.n_ok);
        }
    }
    write_file(dir / kAggregatesFile, agg);
    write_file(dir / kComparisonFile, comparisons_text(report.comparisons));
    write_file(dir / kReportFile, to_json(report).dump(2) + "\n");
}

std::vector<RunRecord> read_records(const fs::path& records_jsonl) {
    std::ifstream in(records_jsonl);
    if (!in) throw ConfigError("cannot read " + records_jsonl.string());
    std::vector<RunRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_copy(line).empty()) continue;
        try {
            out.push_back(record_from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw ConfigError(fmt::format("{}:{}: {}", records_jsonl.string(), lineno, e.what()));
        }
    }
    return out;
}

Report score_predictions(const fs::path& predictions, const fs::path& references, const std::vector<Metric>& metrics) {
    auto read_jsonl = [](const fs::path& p) {
        std::ifstream in(p);
        if (!in) throw ConfigError("cannot read " + p.string());
        std::vector<json> rows;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim_copy(line).empty()) continue;
            try {
                rows.push_back(json::parse(line));
            } catch (const json::parse_error& e) {
                throw ConfigError(fmt::format("{}:{}: {}", p.string(), lineno, e.what()));
            }
        }
        return rows;
    };
    std::map<std::string, std::string> refs;
    for (const auto& row : read_jsonl(references)) {
        if (!row.is_object() || !row.contains("id")) throw ConfigError("reference line without an id");
        std::string text;
        for (const char* key : {"reference", "summary", "docstring"}) {
            if (row.contains(key) && row[key].is_string()) {
                text = row[key].get<std::string>();
                break;
            }
        }
        refs[row["id"].get<std::string>()] = text;
    }
    Report report;
    report.name = "score";
    report.config = json{{"predictions", predictions.string()},
                         {"references", references.string()},
                         {"metrics", metrics_json(metrics)}};
    for (const auto& row : read_jsonl(predictions)) {
        if (!row.is_object() || !row.contains("id")) throw ConfigError("prediction line without an id");
        RunRecord rec;
        rec.sample_id = row["id"].get<std::string>();
        rec.output = row.value("prediction", std::string());
        auto it = refs.find(rec.sample_id);
        if (it == refs.end()) {
            rec.status = RecordStatus::skipped;
            rec.warnings.push_back("no reference for this id");
        } else {
            rec.reference = it->second;
            score_record(rec, metrics);
        }
        report.records.push_back(std::move(rec));
    }
    finalize_report(report, metrics);
    return report;
}

}  // namespace asap
