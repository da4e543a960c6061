#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "asap/error.hpp"
#include "asap/harness.hpp"
#include "asap/hash.hpp"
#include "support.hpp"
#include "synth.hpp"

using namespace asap;
using nlohmann::json;
namespace fs = std::filesystem;
namespace t = asap::testing;

namespace {

ExperimentConfig fixture_config(Task task, const fs::path& out) {
    ExperimentConfig c = ExperimentConfig::defaults_for(task);
    c.name = task == Task::summarize ? "fixture-summarize" : "fixture-complete";
    c.output_dir = out;
    c.workers = 4;
    return c;
}

std::string dir_bytes(const fs::path& dir) {
    std::string out;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out += f.lexically_relative(dir).string() + "\n" + t::read_text(f);
    return out;
}

const RunRecord& record_of(const Report& r, const std::string& id) {
    for (const auto& rec : r.records)
        if (rec.sample_id == id) return rec;
    throw std::runtime_error("no record " + id);
}

std::vector<std::string> split_lines(const std::string& code) {
    std::vector<std::string> out;
    std::istringstream in(code);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::string swap_case(std::string s) {
    for (char& ch : s) {
        if (std::islower(static_cast<unsigned char>(ch))) {
            ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        } else if (std::isupper(static_cast<unsigned char>(ch))) {
            ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        }
    }
    return s;
}

// Answers like the mock, then drops trailing words unless facts are present, so that
// component variants score differently.
class FactSensitiveTransport : public HttpTransport {
public:
    HttpResponse post(const std::string&, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>&) override {
        std::string prompt = json::parse(body).at("prompt").get<std::string>();
        {
            std::lock_guard lock(mutex_);
            prompts.push_back(prompt);
        }
        std::string text = mock_complete(prompt);
        std::size_t facts = 0;
        // only the target block, after the last exemplar
        std::string target = prompt.substr(prompt.rfind("\n\n") == std::string::npos ? 0 : prompt.rfind("\n\n"));
        for (const char* h : {"# Repository:", "# Identifiers:", "# Dataflow:"}) facts += target.find(h) != std::string::npos;
        std::size_t drop = (3 - facts) + sha256_hex(prompt)[0] % 3;
        std::istringstream in(text);
        std::vector<std::string> words;
        for (std::string w; in >> w;) words.push_back(w);
        std::string out;
        for (std::size_t i = 0; i + drop < words.size() || i == 0; ++i) {
            if (i >= words.size()) break;
            out += (i ? " " : "") + words[i];
        }
        return t::ok_completion(out);
    }
    std::vector<std::string> prompts;

private:
    std::mutex mutex_;
};

ClientOptions http_client(std::shared_ptr<HttpTransport> transport) {
    ::setenv("ASAP_HARNESS_TEST_KEY", "k", 1);
    ClientOptions o;
    o.api_key_env = "ASAP_HARNESS_TEST_KEY";
    o.transport = std::move(transport);
    o.sleeper = [](std::chrono::milliseconds) {};
    return o;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
    ExperimentConfig c = ExperimentConfig::defaults_for(Task::complete);
    c.pool_path = "/data/pool.jsonl";
    c.shots = 5;
    c.components = Components{true, false, true};
    c.cache_dir = "/tmp/cache";
    c.metrics = {Metric::es};
    json j = to_json(c);
    EXPECT_EQ(to_json(config_from_json(j)), j);
}

TEST(Config, DefaultsPerTask) {
    auto s = ExperimentConfig::defaults_for(Task::summarize);
    auto c = ExperimentConfig::defaults_for(Task::complete);
    EXPECT_EQ(s.metrics, summary_metrics());
    EXPECT_EQ(c.metrics, completion_metrics());
    EXPECT_EQ(c.model.max_output_tokens, 64u);
    EXPECT_EQ(s.model.max_output_tokens, 128u);
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(config_from_json(json{{"bogus", 1}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"prompt", {{"shotz", 3}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"model", {{"temprature", 0}}}}), ConfigError);
}

TEST(Config, PartialModelSectionKeepsTaskDefaults) {
    auto c = config_from_json(json{{"task", "complete"}, {"model", {{"model_name", "m"}}}});
    EXPECT_EQ(c.model.model_name, "m");
    EXPECT_EQ(c.model.max_output_tokens, 64u);
}

TEST(Config, Overrides) {
    auto base = ExperimentConfig::defaults_for(Task::summarize);
    auto c = apply_overrides(base, {"prompt.shots=5", "prompt.components=repo,id", "model.backend=http",
                                    "data.pool=pool.jsonl", "client.retry.max_attempts=2"});
    EXPECT_EQ(c.shots, 5u);
    EXPECT_EQ(c.components, (Components{true, true, false}));
    EXPECT_EQ(c.model.backend, Backend::http);
    EXPECT_EQ(c.pool_path, fs::path("pool.jsonl"));
    EXPECT_EQ(c.retry.max_attempts, 2u);
    EXPECT_THROW(apply_overrides(base, {"prompt.nope=1"}), ConfigError);
    EXPECT_THROW(apply_overrides(base, {"no-equals-sign"}), ConfigError);
    auto switched = apply_overrides(base, {"task=complete"});
    EXPECT_EQ(switched.metrics, completion_metrics());
}

TEST(Config, LoadResolvesRelativePaths) {
    auto dir = t::temp_dir("config");
    std::ofstream(dir / "exp.json") << R"({"name": "x", "data": {"pool": "data/pool.jsonl"}, "output": {"dir": "out"}})";
    auto c = load_config(dir / "exp.json");
    EXPECT_EQ(c.pool_path, dir / "data/pool.jsonl");
    EXPECT_EQ(c.output_dir, dir / "out");
    std::ofstream(dir / "bad.json") << "{ nope";
    EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
}

TEST(Summarization, FixtureFallbacks) {
    auto fx = t::e2e_fixture();
    auto config = fixture_config(Task::summarize, t::temp_dir("fallbacks"));
    auto inputs = make_inputs(fx.pool, fx.tests, config);
    LlmClient client;
    auto report = run_summarization(config, inputs, client);
    ASSERT_EQ(report.records.size(), 50u);
    EXPECT_EQ(report.n_ok, 50u);

    const auto& oversize = record_of(report, t::kOversizeId);
    EXPECT_EQ(oversize.status, RecordStatus::ok);
    EXPECT_LT(oversize.shots_used, 3u);
    EXPECT_FALSE(oversize.warnings.empty());

    const auto& empty = record_of(report, t::kEmptyId);
    EXPECT_EQ(empty.status, RecordStatus::ok);
    EXPECT_EQ(empty.shots_used, 4u);
    EXPECT_FALSE(empty.warnings.empty());

    for (const auto& r : report.records) {
        EXPECT_LE(r.shots_used, config.shots + 2);
        if (r.shots_used != config.shots) {
            EXPECT_FALSE(r.warnings.empty()) << r.sample_id;
        }
    }
    for (std::size_t i = 1; i < report.records.size(); ++i) {
        EXPECT_LT(report.records[i - 1].sample_id, report.records[i].sample_id);
    }
}

TEST(Summarization, DeterministicAcrossRunsAndWorkers) {
    auto fx = t::e2e_fixture();
    auto out = t::temp_dir("determinism");
    std::string first;
    for (std::size_t workers : {1u, 8u, 3u}) {
        auto config = fixture_config(Task::summarize, out);
        config.workers = workers;
        auto inputs = make_inputs(fx.pool, fx.tests, config);
        LlmClient client;
        auto report = run_summarization(config, inputs, client);
        // workers is part of the embedded config
        report.config.erase("client");
        fs::remove_all(out);
        write_report(report, out);
        if (first.empty()) {
            first = dir_bytes(out);
        } else {
            EXPECT_EQ(dir_bytes(out), first);
        }
    }
}

TEST(Summarization, UnresolvedEmptiesWarn) {
    auto pool = synth::make_pool(Language::java, 30, 4, {4, false});
    std::vector<Sample> tests;
    for (std::size_t i = 0; i < 10; ++i) {
        Sample s = pool[i];
        s.code = "// asap-mock: empty-below=9\n" + s.code;
        s.id += "-empty";
        tests.push_back(s);
    }
    auto config = fixture_config(Task::summarize, t::temp_dir("empties"));
    auto inputs = make_inputs(pool, SamplePool(Language::java, tests), config);
    LlmClient client;
    auto report = run_summarization(config, inputs, client);
    EXPECT_EQ(report.n_failed, 10u);
    for (const auto& r : report.records) {
        EXPECT_EQ(r.status, RecordStatus::failed_empty);
        EXPECT_EQ(r.shots_used, 5u);
        EXPECT_TRUE(r.scores.empty());
    }
    EXPECT_FALSE(report.warnings.empty());
}

TEST(Summarization, ComponentsOnlyChangeFactLines) {
    auto fx = t::e2e_fixture();
    std::set<std::string> stripped[2];
    for (int variant = 0; variant < 2; ++variant) {
        auto transport = std::make_shared<FactSensitiveTransport>();
        auto config = fixture_config(Task::summarize, t::temp_dir("isolation"));
        config.model.backend = Backend::http;
        config.components = variant == 0 ? Components::none() : Components::all();
        auto inputs = make_inputs(fx.pool, fx.tests, config);
        LlmClient client(http_client(transport));
        run_summarization(config, inputs, client);
        for (const auto& p : transport->prompts) {
            // the fixture's java code has no "# " lines of its own
            std::string text;
            for (const auto& line : split_lines(p))
                if (!line.starts_with("# ")) text += line + "\n";
            stripped[variant].insert(text);
        }
    }
    std::size_t matched = 0;
    for (const auto& p : stripped[1]) matched += stripped[0].count(p);
    // the oversize target may keep a different number of shots without facts
    EXPECT_GE(matched, 49u);
    EXPECT_GE(stripped[1].size(), 50u);
}

TEST(Compare, PairsOnlySharedOkIds) {
    std::vector<RunRecord> base, treat;
    for (int i = 0; i < 20; ++i) {
        RunRecord b, tr;
        b.sample_id = tr.sample_id = "s" + std::to_string(100 + i);
        b.scores[Metric::bleu_cn] = i;
        tr.scores[Metric::bleu_cn] = i + 1 + i % 3;
        b.scores[Metric::em] = i % 4 == 0 ? 100 : 0;
        tr.scores[Metric::em] = i % 2 == 0 ? 100 : 0;
        if (i == 3) b.status = RecordStatus::failed_empty;
        if (i == 7) tr.status = RecordStatus::oversize;
        base.push_back(b);
        treat.push_back(tr);
    }
    RunRecord extra;
    extra.sample_id = "only-in-treatment";
    extra.scores[Metric::bleu_cn] = 99;
    treat.push_back(extra);
    auto comps = compare_records(base, treat, {Metric::bleu_cn, Metric::em});
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_EQ(comps[0].n_pairs, 18u);
    EXPECT_EQ(comps[0].test.test, PairedTest::wilcoxon_one_sided);
    EXPECT_EQ(comps[0].test.n_effective, 18u);
    EXPECT_LT(comps[0].test.p_value, 0.001);
    EXPECT_EQ(comps[1].test.test, PairedTest::mcnemar);
    EXPECT_EQ(comps[1].n_pairs, 18u);
    auto adj = benjamini_hochberg({comps[0].test.p_value, comps[1].test.p_value});
    EXPECT_DOUBLE_EQ(*comps[0].adjusted_p, adj[0]);
    EXPECT_DOUBLE_EQ(*comps[1].adjusted_p, adj[1]);
}

TEST(Compare, UntestableMetricRecordsError) {
    std::vector<RunRecord> base(6), treat(6);
    for (int i = 0; i < 6; ++i) {
        base[i].sample_id = treat[i].sample_id = "s" + std::to_string(i);
        base[i].scores[Metric::rouge_l] = treat[i].scores[Metric::rouge_l] = 50;
    }
    auto comps = compare_records(base, treat, {Metric::rouge_l});
    ASSERT_EQ(comps.size(), 1u);
    EXPECT_FALSE(comps[0].error.empty());
    EXPECT_FALSE(comps[0].adjusted_p);
}

TEST(Completion, StableTargetLine) {
    auto pool = synth::make_pool(Language::python, 20, 2);
    for (const auto& s : pool) {
        auto a = choose_target_line(s, 3);
        ASSERT_TRUE(a);
        EXPECT_EQ(a, choose_target_line(s, 3));
        auto eligible = eligible_target_lines(s.code, s.language);
        EXPECT_NE(std::find(eligible.begin(), eligible.end(), *a), eligible.end());
        EXPECT_GE(*a, 1u);
    }
    std::size_t differs = 0;
    for (const auto& s : pool) differs += choose_target_line(s, 3) != choose_target_line(s, 4);
    EXPECT_GT(differs, 0u);
}

TEST(Completion, EligibleLines) {
    std::string py = "def f(a):\n    # note\n\n    x = a\n    return x\n";
    EXPECT_EQ(eligible_target_lines(py, Language::python), (std::vector<std::size_t>{3, 4}));
    std::string java = "int f() {\n  // c\n  /* d */\n   * e\n  int x = 1;\n  return x;\n}";
    EXPECT_EQ(eligible_target_lines(java, Language::java), (std::vector<std::size_t>{4, 5, 6}));
    Sample one;
    one.id = "one";
    one.code = "int f() { return 1; }";
    one.language = Language::java;
    EXPECT_FALSE(choose_target_line(one, 1));
}

TEST(Completion, ZeroShotPromptIsRawPrefix) {
    auto transport = std::make_shared<FactSensitiveTransport>();
    auto pool = synth::make_pool(Language::python, 15, 6);
    auto config = fixture_config(Task::complete, t::temp_dir("zeroshot"));
    config.components = Components::none();
    config.model.backend = Backend::http;
    config.workers = 1;
    config.language = Language::python;
    auto inputs = make_inputs(pool, pool, config);
    LlmClient client(http_client(transport));
    auto report = run_completion(config, inputs, client);
    std::set<std::string> prompts(transport->prompts.begin(), transport->prompts.end());
    for (const auto& r : report.records) {
        const Sample* s = pool.find(r.sample_id);
        ASSERT_TRUE(s && r.target_line);
        auto lines = split_lines(s->code);
        std::string prefix;
        for (std::size_t i = 0; i < *r.target_line; ++i) prefix += (i ? "\n" : "") + lines[i];
        EXPECT_TRUE(prompts.count(prefix)) << r.sample_id;
        EXPECT_EQ(r.reference, lines[*r.target_line]);
    }
}

TEST(Completion, MockScoresMatchHandOracle) {
    auto fx = t::e2e_fixture();
    auto config = fixture_config(Task::complete, t::temp_dir("completion"));
    config.seed = 3;
    auto inputs = make_inputs(fx.pool, fx.tests, config);
    LlmClient client;
    auto report = run_completion(config, inputs, client);
    ASSERT_EQ(report.records.size(), 50u);
    double em_sum = 0, es_sum = 0;
    std::size_t n = 0;
    std::string csv = "id,target_line,em,es\n";
    for (const auto& r : report.records) {
        ASSERT_EQ(r.status, RecordStatus::ok) << r.sample_id;
        const Sample* s = fx.tests.find(r.sample_id);
        auto lines = split_lines(s->code);
        EXPECT_EQ(r.target_line, choose_target_line(*s, 3));
        // the mock echoes the last prefix line, 40 chars, case swapped
        std::string expected_output = swap_case(lines[*r.target_line - 1].substr(0, 40));
        EXPECT_EQ(r.output, expected_output);
        std::string norm_out = normalize_whitespace(expected_output), norm_ref = normalize_whitespace(r.reference);
        double em = norm_out == norm_ref ? 100.0 : 0.0;
        double es = 100.0 * (1.0 - static_cast<double>(levenshtein(norm_out, norm_ref)) /
                                       static_cast<double>(std::max(norm_out.size(), norm_ref.size())));
        EXPECT_DOUBLE_EQ(r.scores.at(Metric::em), em);
        EXPECT_NEAR(r.scores.at(Metric::es), es, 1e-9);
        em_sum += em;
        es_sum += es;
        ++n;
        csv += fmt::format("{},{},{:.0f},{:.6f}\n", r.sample_id, *r.target_line, em, es);
    }
    EXPECT_NEAR(report.aggregates.at(Metric::em), em_sum / n, 1e-9);
    EXPECT_NEAR(report.aggregates.at(Metric::es), es_sum / n, 1e-9);
    csv += fmt::format("mean,,{:.6f},{:.6f}\n", em_sum / n, es_sum / n);
    EXPECT_EQ(t::check_golden("completion_fixture_seed3.csv", csv), "");
}

TEST(Ablation, SharedRetrievalAndFamilyCorrection) {
    auto fx = t::e2e_fixture();
    auto transport = std::make_shared<FactSensitiveTransport>();
    auto config = fixture_config(Task::summarize, t::temp_dir("ablation"));
    config.model.backend = Backend::http;
    config.metrics = {Metric::bleu_cn, Metric::rouge_l};
    auto inputs = make_inputs(fx.pool, fx.tests, config);
    LlmClient client(http_client(transport));
    auto report = run_ablation(config, default_variants(), inputs, client);
    ASSERT_EQ(report.runs.size(), 4u);
    EXPECT_EQ(report.runs[0].name, "ALL");
    for (const auto& run : report.runs) EXPECT_EQ(run.records.size(), 50u);
    ASSERT_EQ(report.comparisons.size(), 6u);
    for (Metric m : config.metrics) {
        std::vector<double> raw;
        std::vector<const Comparison*> family;
        for (const auto& c : report.comparisons) {
            if (c.metric != m) continue;
            EXPECT_EQ(c.treatment, "ALL");
            ASSERT_TRUE(c.error.empty()) << c.error;
            raw.push_back(c.test.p_value);
            family.push_back(&c);
        }
        ASSERT_EQ(raw.size(), 3u);
        auto adj = benjamini_hochberg(raw);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(*family[i]->adjusted_p, adj[i]);
    }
    auto out = t::temp_dir("ablation-out");
    write_ablation(report, out);
    EXPECT_TRUE(fs::exists(out / "ALL" / kRecordsFile));
    EXPECT_TRUE(fs::exists(out / "no-repo" / kAggregatesFile));
    EXPECT_TRUE(fs::exists(out / kComparisonFile));
}

TEST(Ablation, SingleVariantMatchesPlainRun) {
    auto fx = t::e2e_fixture();
    auto config = fixture_config(Task::summarize, t::temp_dir("single"));
    auto inputs = make_inputs(fx.pool, fx.tests, config);
    LlmClient client;
    auto ablation = run_ablation(config, {parse_variant("ALL")}, inputs, client);
    auto plain = run_summarization(config, inputs, client);
    ASSERT_EQ(ablation.runs.size(), 1u);
    EXPECT_TRUE(ablation.comparisons.empty());
    EXPECT_EQ(ablation.runs[0].aggregates, plain.aggregates);
    for (std::size_t i = 0; i < plain.records.size(); ++i) {
        EXPECT_EQ(to_json(ablation.runs[0].records[i]), to_json(plain.records[i]));
    }
}

TEST(Ablation, VariantParsing) {
    EXPECT_EQ(parse_variant("-repo").components, (Components{false, true, true}));
    EXPECT_EQ(parse_variant("ids=id").name, "ids");
    EXPECT_EQ(parse_variant("ids=id").components, (Components{false, true, false}));
    EXPECT_THROW(parse_variant("-bogus"), ConfigError);
}

TEST(Reports, RecordsRoundTripAndFiles) {
    auto fx = t::e2e_fixture();
    auto out = t::temp_dir("report-files");
    auto config = fixture_config(Task::summarize, out);
    auto inputs = make_inputs(fx.pool, fx.tests, config);
    LlmClient client;
    auto report = run_summarization(config, inputs, client);
    write_report(report, out);
    for (auto f : {kRecordsFile, kAggregatesFile, kReportFile}) EXPECT_TRUE(fs::exists(out / f)) << f;
    auto back = read_records(out / kRecordsFile);
    ASSERT_EQ(back.size(), report.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(to_json(back[i]), to_json(report.records[i]));
    json rep = json::parse(t::read_text(out / kReportFile));
    EXPECT_EQ(rep["format_version"], kReportFormatVersion);
    EXPECT_TRUE(rep.contains("config"));
    EXPECT_EQ(t::read_text(out / kAggregatesFile).substr(0, 12), "metric,mean,");
}

TEST(Reports, BaselinePairing) {
    auto fx = t::e2e_fixture();
    auto base_dir = t::temp_dir("baseline");
    auto config = fixture_config(Task::summarize, base_dir);
    config.components = Components::none();
    auto inputs = make_inputs(fx.pool, fx.tests, config);
    LlmClient client;
    write_report(run_summarization(config, inputs, client), base_dir);
    config.components = Components::all();
    config.baseline_dir = base_dir;
    auto report = run_summarization(config, inputs, client);
    EXPECT_EQ(report.comparisons.size(), summary_metrics().size());
    for (const auto& c : report.comparisons) EXPECT_EQ(c.n_pairs, 50u);
}

TEST(Score, PredictionsAgainstReferences) {
    auto dir = t::temp_dir("score");
    std::ofstream(dir / "pred.jsonl") << R"({"id": "a", "prediction": "returns the sum"})" "\n"
                                      << R"({"id": "b", "prediction": "opens a file"})" "\n";
    std::ofstream(dir / "ref.jsonl") << R"({"id": "b", "reference": "opens a file"})" "\n"
                                     << R"({"id": "a", "summary": "returns the sum of values"})" "\n";
    auto report = score_predictions(dir / "pred.jsonl", dir / "ref.jsonl", {Metric::rouge_l, Metric::em});
    ASSERT_EQ(report.records.size(), 2u);
    EXPECT_EQ(report.records[1].scores.at(Metric::em), 100.0);
    EXPECT_EQ(report.records[0].scores.at(Metric::em), 0.0);
    EXPECT_NEAR(report.aggregates.at(Metric::em), 50.0, 1e-12);
    EXPECT_NEAR(report.records[0].scores.at(Metric::rouge_l), rouge_l("returns the sum", "returns the sum of values"),
                1e-12);
    std::ofstream(dir / "bad.jsonl") << R"({"id": "zzz", "prediction": "x"})" "\n";
    auto orphan = score_predictions(dir / "bad.jsonl", dir / "ref.jsonl", {Metric::em});
    ASSERT_EQ(orphan.records.size(), 1u);
    EXPECT_EQ(orphan.records[0].status, RecordStatus::skipped);
    EXPECT_FALSE(orphan.records[0].warnings.empty());
    std::ofstream(dir / "garbage.jsonl") << "{ nope\n";
    EXPECT_THROW(score_predictions(dir / "garbage.jsonl", dir / "ref.jsonl", {Metric::em}), ConfigError);
}
