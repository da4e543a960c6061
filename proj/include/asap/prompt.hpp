#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asap/analysis.hpp"
#include "asap/corpus.hpp"

namespace asap {

inline constexpr int kPromptFormatVersion = 1;
inline constexpr std::size_t kDefaultBudget = 4000;
inline constexpr std::size_t kDefaultReserve = 256;
inline constexpr std::size_t kDefaultMaxDfgLines = 30;
inline constexpr std::string_view kBlockSeparator = "\n\n";
inline constexpr std::string_view kSummaryCue = "Summary:";

/// ceil(bytes / 4).
std::size_t estimate_tokens(std::string_view text) noexcept;

using TokenEstimator = std::function<std::size_t(std::string_view)>;

struct PromptOptions {
    std::size_t budget = kDefaultBudget;
    std::size_t reserve = kDefaultReserve;  ///< kept free for the model's output
    std::size_t max_dfg_lines = kDefaultMaxDfgLines;
    bool tag_free = false;      ///< identifiers rendered without their tags
    bool minimal_tags = false;  ///< collapse to function_name / parameter / identifier
    bool best_last = true;      ///< highest-ranked exemplar next to the target
    TokenEstimator estimator;   ///< defaults to estimate_tokens
};

struct ExemplarBlock {
    std::string code;
    std::string facts_text;
    std::optional<std::string> output;  ///< absent for the target block
    std::string rendered;
};

struct Prompt {
    std::vector<ExemplarBlock> blocks;
    std::string text;
    std::size_t estimated_tokens = 0;
    std::size_t shots_used = 0;
    std::size_t budget = 0;
    std::vector<std::string> warnings;
};

/// The "# ..." fact lines for a product, each terminated by '\n'. Empty for an empty product.
std::string render_facts(const AnalysisProduct& product, const PromptOptions& options = {});

/// code, facts, then the summary cue (with the gold summary when include_output).
ExemplarBlock render_exemplar(const Sample& sample, const AnalysisProduct& product, bool include_output,
                              std::size_t max_dfg_lines = kDefaultMaxDfgLines, const PromptOptions& options = {});

using ProductMap = std::unordered_map<std::string, AnalysisProduct>;

/// Exemplars are given best-first. Uses up to `shots` of them and drops the
/// lowest-ranked one while the prompt exceeds budget - reserve. Throws OversizePrompt
/// when a single exemplar (or the bare target) still does not fit.
Prompt assemble_summarization_prompt(const std::vector<Sample>& exemplars, const Sample& target,
                                     const ProductMap& products, std::size_t shots,
                                     const PromptOptions& options = {});

/// Facts first, then the prefix lines joined by '\n' without a trailing newline. On
/// overflow drops the dataflow, then the identifiers, then the repository fact.
Prompt assemble_completion_prompt(const std::vector<std::string>& prefix_lines, const AnalysisProduct& product,
                                  const PromptOptions& options = {}, std::string_view sample_id = {});

}  // namespace asap
