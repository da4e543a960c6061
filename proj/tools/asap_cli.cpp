#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "asap/error.hpp"
#include "asap/harness.hpp"

namespace fs = std::filesystem;
using namespace asap;

namespace {

// Flags shared by the run subcommands; each one becomes a config override.
struct RunFlags {
    std::string config;
    std::vector<std::string> overrides;
    std::string pool, test, language, out, backend, components, cache, model, endpoint, baseline, index;
    std::optional<std::size_t> shots, n, workers, budget;
    std::optional<std::uint64_t> seed;
    bool tokenized_path = false;
    bool tag_free = false;
    bool chat = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("-c,--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", f.overrides, "override a config key, e.g. prompt.shots=5")->take_all();
    cmd->add_option("--pool", f.pool, "exemplar pool JSONL");
    cmd->add_option("--test", f.test, "test samples JSONL (default: the pool, self-matches excluded)");
    cmd->add_option("--index", f.index, "prebuilt BM25 index snapshot");
    cmd->add_option("-l,--language", f.language, "java, python, ruby, javascript, go or php");
    cmd->add_option("-o,--out", f.out, "output directory");
    cmd->add_option("--backend", f.backend, "mock or http")->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--components", f.components, "analysis facts: repo,id,dfg | all | none");
    cmd->add_option("--shots", f.shots, "exemplars per prompt");
    cmd->add_option("-n,--n", f.n, "random test subset size");
    cmd->add_option("--seed", f.seed, "seed for subsets and target lines");
    cmd->add_option("--workers", f.workers, "concurrent samples");
    cmd->add_option("--budget", f.budget, "prompt budget in estimated tokens");
    cmd->add_option("--cache", f.cache, "response cache directory");
    cmd->add_option("--model", f.model, "model name");
    cmd->add_option("--endpoint", f.endpoint, "OpenAI-compatible base URL");
    cmd->add_option("--baseline", f.baseline, "earlier run directory to pair against");
    cmd->add_flag("--tokenized-path", f.tokenized_path, "render repository and path as token lists");
    cmd->add_flag("--tag-free", f.tag_free, "render identifiers without tags");
    cmd->add_flag("--chat", f.chat, "use the chat completions API");
}

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

ExperimentConfig resolve_config(const RunFlags& f, Task task) {
    ExperimentConfig c = f.config.empty() ? ExperimentConfig::defaults_for(task) : load_config(f.config);
    std::vector<std::string> o;
    if (c.task != task) o.push_back(fmt::format("task={}", to_string(task)));
    if (!f.pool.empty()) o.push_back("data.pool=" + quoted(f.pool));
    if (!f.test.empty()) o.push_back("data.test=" + quoted(f.test));
    if (!f.index.empty()) o.push_back("data.index=" + quoted(f.index));
    if (!f.language.empty()) o.push_back("language=" + f.language);
    if (!f.out.empty()) o.push_back("output.dir=" + quoted(f.out));
    if (!f.backend.empty()) o.push_back("model.backend=" + f.backend);
    if (!f.components.empty()) o.push_back("prompt.components=" + f.components);
    if (f.shots) o.push_back(fmt::format("prompt.shots={}", *f.shots));
    if (f.n) o.push_back(fmt::format("data.test_n={}", *f.n));
    if (f.seed) o.push_back(fmt::format("data.seed={}", *f.seed));
    if (f.workers) o.push_back(fmt::format("client.workers={}", *f.workers));
    if (f.budget) o.push_back(fmt::format("prompt.budget={}", *f.budget));
    if (!f.cache.empty()) o.push_back("client.cache_dir=" + quoted(f.cache));
    if (!f.model.empty()) o.push_back("model.model_name=" + quoted(f.model));
    if (!f.endpoint.empty()) o.push_back("model.endpoint=" + quoted(f.endpoint));
    if (!f.baseline.empty()) o.push_back("output.baseline=" + quoted(f.baseline));
    if (f.tokenized_path) o.push_back("prompt.tokenized_path=true");
    if (f.tag_free) o.push_back("prompt.tag_free_identifiers=true");
    if (f.chat) o.push_back("model.api_mode=chat");
    o.insert(o.end(), f.overrides.begin(), f.overrides.end());
    return apply_overrides(c, o);
}

void print_summary(const Report& r, const fs::path& dir) {
    std::cout << fmt::format("{}: {} samples, {} ok, {} failed\n", r.name, r.records.size(), r.n_ok, r.n_failed);
    for (const auto& [m, v] : r.aggregates) std::cout << fmt::format("  {:8} {:.2f}\n", to_string(m), v);
    for (const auto& c : r.comparisons) {
        if (!c.error.empty()) {
            std::cout << fmt::format("  vs {} {}: {}\n", c.baseline, to_string(c.metric), c.error);
        } else {
            std::cout << fmt::format("  vs {} {}: p={:.4g} (adjusted {:.4g}, n={})\n", c.baseline, to_string(c.metric),
                                     c.test.p_value, c.adjusted_p.value_or(c.test.p_value), c.n_pairs);
        }
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantically augmented few-shot prompting for code summarization and completion"};
    app.require_subcommand(1);

    std::string idx_pool, idx_lang = "java", idx_out;
    double k1 = 1.2, b = 0.75;
    bool no_subtokens = false;
    auto* index_cmd = app.add_subcommand("index", "build a BM25 index snapshot over a pool");
    index_cmd->add_option("--pool", idx_pool, "pool JSONL")->required()->check(CLI::ExistingFile);
    index_cmd->add_option("-l,--language", idx_lang, "pool language");
    index_cmd->add_option("-o,--out", idx_out, "snapshot path")->required();
    index_cmd->add_option("--k1", k1, "term saturation");
    index_cmd->add_option("--b", b, "length normalization");
    index_cmd->add_flag("--no-subtokens", no_subtokens, "do not split camelCase / snake_case");

    RunFlags sum_flags, comp_flags, abl_flags;
    auto* sum_cmd = app.add_subcommand("summarize", "run a summarization experiment");
    add_run_flags(sum_cmd, sum_flags);
    auto* comp_cmd = app.add_subcommand("complete", "run a line completion experiment");
    add_run_flags(comp_cmd, comp_flags);
    auto* abl_cmd = app.add_subcommand("ablate", "run summarization once per component variant");
    add_run_flags(abl_cmd, abl_flags);
    std::vector<std::string> variant_specs;
    abl_cmd->add_option("--variant", variant_specs, "name=components, ALL or -component (default ALL -repo -id -dfg)");

    std::string predictions, references, score_metrics = "summary", score_out;
    auto* score_cmd = app.add_subcommand("score", "score predictions against references");
    score_cmd->add_option("--predictions", predictions, "JSONL of {id, prediction}")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--references", references, "JSONL of {id, reference}")->required()->check(CLI::ExistingFile);
    score_cmd->add_option("--metrics", score_metrics, "metric list, 'summary' or 'completion'");
    score_cmd->add_option("-o,--out", score_out, "output directory")->required();

    std::string cmp_base, cmp_treat, cmp_metrics, cmp_out;
    auto* cmp_cmd = app.add_subcommand("compare", "paired significance tests between two runs");
    cmp_cmd->add_option("--baseline", cmp_base, "baseline run directory")->required()->check(CLI::ExistingDirectory);
    cmp_cmd->add_option("--treatment", cmp_treat, "treatment run directory")->required()->check(CLI::ExistingDirectory);
    cmp_cmd->add_option("--metrics", cmp_metrics, "metrics to test (default: those scored in both runs)");
    cmp_cmd->add_option("-o,--out", cmp_out, "write the comparison JSON here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*index_cmd) {
            SamplePool pool = load_pool(idx_pool, parse_language(idx_lang));
            Bm25Index index = Bm25Index::build(pool, Bm25Params{k1, b}, CodeTokenizerOptions{!no_subtokens});
            index.save(idx_out);
            std::cout << fmt::format("indexed {} documents into {}\n", index.size(), idx_out);
        } else if (*sum_cmd || *comp_cmd) {
            bool summarize = static_cast<bool>(*sum_cmd);
            ExperimentConfig config = resolve_config(summarize ? sum_flags : comp_flags,
                                                     summarize ? Task::summarize : Task::complete);
            RunInputs inputs = load_inputs(config);
            LlmClient client(client_options(config));
            Report report = summarize ? run_summarization(config, inputs, client) : run_completion(config, inputs, client);
            write_report(report, config.output_dir);
            print_summary(report, config.output_dir);
        } else if (*abl_cmd) {
            ExperimentConfig config = resolve_config(abl_flags, Task::summarize);
            std::vector<Variant> variants;
            for (const auto& s : variant_specs) variants.push_back(parse_variant(s));
            if (variants.empty()) variants = default_variants();
            RunInputs inputs = load_inputs(config);
            LlmClient client(client_options(config));
            AblationReport report = run_ablation(config, variants, inputs, client);
            write_ablation(report, config.output_dir);
            for (const auto& run : report.runs) {
                std::cout << run.name << ":";
                for (const auto& [m, v] : run.aggregates) std::cout << fmt::format(" {}={:.2f}", to_string(m), v);
                std::cout << "\n";
            }
            for (const auto& c : report.comparisons) {
                if (c.error.empty()) {
                    std::cout << fmt::format("{} > {} on {}: p={:.4g} adjusted {:.4g}\n", c.treatment, c.baseline,
                                             to_string(c.metric), c.test.p_value, c.adjusted_p.value_or(1.0));
                }
            }
            std::cout << "wrote " << config.output_dir.string() << "\n";
        } else if (*score_cmd) {
            Report report = score_predictions(predictions, references, parse_metric_list(score_metrics));
            write_report(report, score_out);
            print_summary(report, score_out);
        } else if (*cmp_cmd) {
            auto base = read_records(fs::path(cmp_base) / kRecordsFile);
            auto treat = read_records(fs::path(cmp_treat) / kRecordsFile);
            std::vector<Metric> metrics;
            if (!cmp_metrics.empty()) {
                metrics = parse_metric_list(cmp_metrics);
            } else {
                for (Metric m : {Metric::bleu_cn, Metric::bleu_dc, Metric::rouge_l, Metric::meteor, Metric::em, Metric::es}) {
                    auto scored = [m](const std::vector<RunRecord>& rs) {
                        return std::any_of(rs.begin(), rs.end(), [m](const RunRecord& r) { return r.scores.count(m) > 0; });
                    };
                    if (scored(base) && scored(treat)) metrics.push_back(m);
                }
            }
            auto comps = compare_records(base, treat, metrics, fs::path(cmp_base).filename().string(),
                                         fs::path(cmp_treat).filename().string());
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& c : comps) arr.push_back(to_json(c));
            if (cmp_out.empty()) {
                std::cout << arr.dump(2) << "\n";
            } else {
                std::ofstream(cmp_out) << arr.dump(2) << "\n";
                std::cout << "wrote " << cmp_out << "\n";
            }
        }
    } catch (const asap::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
