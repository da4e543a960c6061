#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "asap/analysis.hpp"
#include "asap/corpus.hpp"
#include "asap/llm.hpp"
#include "asap/metrics.hpp"
#include "asap/prompt.hpp"
#include "asap/retrieval.hpp"
#include "asap/stats.hpp"

namespace asap {

inline constexpr int kReportFormatVersion = 1;

enum class Task { summarize, complete };

std::string_view to_string(Task t) noexcept;
Task parse_task(std::string_view s);

struct ExperimentConfig {
    std::string name = "run";
    Task task = Task::summarize;
    Language language = Language::java;

    std::filesystem::path pool_path;  ///< exemplar pool
    /// Test samples; when empty the pool doubles as the test set (self-matches are excluded).
    std::filesystem::path test_path;
    std::optional<std::filesystem::path> index_path;     ///< prebuilt BM25 snapshot
    std::optional<std::filesystem::path> metadata_path;  ///< created_at records for project splits
    std::optional<std::filesystem::path> test_ids_path;  ///< fixed test id list
    std::size_t test_n = 0;                              ///< 0 keeps every test sample
    std::uint64_t seed = 7;
    std::optional<std::string> project;  ///< same-project temporal split of the pool
    double split_fraction = 0.5;

    Components components;
    bool tokenized_path = false;
    bool tag_free_identifiers = false;
    bool minimal_tags = false;
    bool best_last = true;
    std::size_t shots = 3;
    std::size_t max_extra_shots = 2;  ///< empty-completion recovery cap
    std::size_t budget = kDefaultBudget;
    std::size_t reserve = kDefaultReserve;
    std::size_t max_dfg_lines = kDefaultMaxDfgLines;

    Bm25Params bm25;
    CodeTokenizerOptions tokenizer;

    ModelParams model;
    std::vector<Metric> metrics = summary_metrics();
    std::optional<std::filesystem::path> cache_dir;
    RetryPolicy retry;
    double requests_per_second = 0.0;
    std::size_t workers = 4;

    std::filesystem::path output_dir = "out";
    std::optional<std::filesystem::path> baseline_dir;  ///< earlier run to pair against

    /// Defaults appropriate for a task (model limits, metric list).
    static ExperimentConfig defaults_for(Task task);
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults for the config's task; unknown keys throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies "dotted.key=value" overrides; values parse as JSON, falling back to a string.
ExperimentConfig apply_overrides(const ExperimentConfig& c, const std::vector<std::string>& overrides);

enum class RecordStatus { ok, failed_empty, oversize, skipped };

std::string_view to_string(RecordStatus s) noexcept;

struct RunRecord {
    std::string sample_id;
    RecordStatus status = RecordStatus::ok;
    std::string prompt_hash;
    std::string request_hash;
    std::size_t shots_used = 0;
    std::optional<std::size_t> target_line;  ///< completion runs, 0-based
    std::string output;
    std::string reference;
    std::map<Metric, double> scores;
    std::vector<std::string> warnings;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

struct Comparison {
    std::string baseline;
    std::string treatment;
    Metric metric = Metric::bleu_cn;
    std::size_t n_pairs = 0;
    PairedTestResult test;
    std::optional<double> adjusted_p;  ///< Benjamini-Hochberg over the comparison family
    std::string error;                 ///< set when the test could not run
};

nlohmann::json to_json(const Comparison& c);

struct Report {
    std::string name;
    nlohmann::json config;
    std::vector<RunRecord> records;  ///< sorted by sample id
    std::map<Metric, double> aggregates;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::vector<std::string> warnings;
    std::vector<Comparison> comparisons;
};

nlohmann::json to_json(const Report& r);

/// Loaded pools plus the BM25 index over the exemplar pool.
struct RunInputs {
    SamplePool pool;
    SamplePool tests;
    Bm25Index index;
};

RunInputs load_inputs(const ExperimentConfig& config);
/// Builds the index; `tests` may be the pool itself.
RunInputs make_inputs(SamplePool pool, SamplePool tests, const ExperimentConfig& config);

ClientOptions client_options(const ExperimentConfig& config);

/// Top candidates per test id, shots + max_extra_shots deep.
using RetrievalTable = std::unordered_map<std::string, std::vector<ScoredDoc>>;
RetrievalTable retrieve_all(const ExperimentConfig& config, const RunInputs& inputs);

/// Full products for every test sample and retrieved exemplar (extractors per config.components).
ProductMap analyze_all(const ExperimentConfig& config, const RunInputs& inputs, const RetrievalTable& retrieval);

Report run_summarization(const ExperimentConfig& config, const RunInputs& inputs, LlmClient& client);
/// Same, reusing retrieval and products computed elsewhere (products are masked by config.components).
Report run_summarization(const ExperimentConfig& config, const RunInputs& inputs, LlmClient& client,
                         const RetrievalTable& retrieval, const ProductMap& products);

/// Non-blank, non-comment lines after the first; completion targets are drawn from these.
std::vector<std::size_t> eligible_target_lines(std::string_view code, Language language);
/// Seeded choice, a function of (seed, sample id) only.
std::optional<std::size_t> choose_target_line(const Sample& sample, std::uint64_t seed);

Report run_completion(const ExperimentConfig& config, const RunInputs& inputs, LlmClient& client);

struct Variant {
    std::string name;
    Components components;
};

/// ALL, -repo, -id, -dfg.
std::vector<Variant> default_variants();
Variant parse_variant(std::string_view spec);  ///< "name=repo,id" or a component list

struct AblationReport {
    std::vector<Report> runs;
    std::vector<Comparison> comparisons;  ///< each variant against the first, per metric
};

nlohmann::json to_json(const AblationReport& r);

AblationReport run_ablation(const ExperimentConfig& config, const std::vector<Variant>& variants,
                            const RunInputs& inputs, LlmClient& client);

/// Paired tests of treatment against baseline over the ids that succeeded in both.
/// Wilcoxon (treatment > baseline) for graded metrics, McNemar for em; B-H across the family.
std::vector<Comparison> compare_records(const std::vector<RunRecord>& baseline, const std::vector<RunRecord>& treatment,
                                        const std::vector<Metric>& metrics, std::string baseline_name = "baseline",
                                        std::string treatment_name = "treatment");

void write_report(const Report& report, const std::filesystem::path& dir);
void write_ablation(const AblationReport& report, const std::filesystem::path& dir);
std::vector<RunRecord> read_records(const std::filesystem::path& records_jsonl);

/// Scores {"id", "prediction"} lines against {"id", "reference"} (or "summary"/"docstring") lines.
Report score_predictions(const std::filesystem::path& predictions, const std::filesystem::path& references,
                         const std::vector<Metric>& metrics);

/// Output files of a run directory.
inline constexpr std::string_view kRecordsFile = "records.jsonl";
inline constexpr std::string_view kAggregatesFile = "aggregates.csv";
inline constexpr std::string_view kReportFile = "report.json";
inline constexpr std::string_view kComparisonFile = "comparison.json";

}  // namespace asap
