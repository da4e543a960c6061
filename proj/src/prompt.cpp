#include "asap/prompt.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "asap/error.hpp"

namespace asap {

std::size_t estimate_tokens(std::string_view text) noexcept { return (text.size() + 3) / 4; }

namespace {

std::size_t estimate(const PromptOptions& options, std::string_view text) {
    return options.estimator ? options.estimator(text) : estimate_tokens(text);
}

std::size_t limit_of(const PromptOptions& options) {
    return options.budget > options.reserve ? options.budget - options.reserve : 0;
}

std::string token_list(std::string_view value) {
    std::string out = "[";
    std::size_t pos = 0;
    bool first = true;
    while (pos <= value.size()) {
        std::size_t slash = value.find('/', pos);
        if (slash == std::string_view::npos) slash = value.size();
        auto part = value.substr(pos, slash - pos);
        if (!part.empty()) {
            if (!first) out += ", ";
            out += fmt::format("\"{}\"", part);
            first = false;
        }
        pos = slash + 1;
    }
    return out + "]";
}

std::string strip_trailing_newlines(std::string_view s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

}  // namespace

std::string render_facts(const AnalysisProduct& product, const PromptOptions& options) {
    std::string out;
    if (product.repo_fact) {
        const RepoFact& r = *product.repo_fact;
        if (r.tokenized) {
            out += fmt::format("# Repository: {}\n# Path: {}\n", token_list(r.repo), token_list(r.path));
        } else {
            out += fmt::format("# Repository: {}\n# Path: {}\n", r.repo, r.path);
        }
        out += fmt::format("# Function: {}\n", r.func_name);
    }
    if (product.identifiers) {
        out += "# Identifiers:\n";
        auto ids = options.minimal_tags ? collapse_tags(*product.identifiers) : *product.identifiers;
        // one line per distinct (tag, name), in order of first occurrence
        std::set<std::pair<IdentifierTag, std::string>> seen;
        std::set<std::string> seen_names;
        for (const auto& id : ids) {
            if (options.tag_free) {
                if (seen_names.insert(id.name).second) out += fmt::format("#   {}\n", id.name);
            } else if (seen.emplace(id.tag, id.name).second) {
                out += fmt::format("#   {}: {}\n", to_string(id.tag), id.name);
            }
        }
    }
    if (product.dfg) {
        out += "# Dataflow:\n";
        const auto& edges = *product.dfg;
        std::size_t shown = std::min(edges.size(), options.max_dfg_lines);
        for (std::size_t i = 0; i < shown; ++i) {
            const DfgEdge& e = edges[i];
            std::string sources;
            for (std::size_t j = 0; j < e.source_indices.size(); ++j) {
                if (j > 0) sources += ", ";
                std::string_view name = j < e.source_names.size() ? std::string_view(e.source_names[j]) : "_";
                sources += fmt::format("{}({})", name, e.source_indices[j]);
            }
            out += fmt::format("#   {}({}) {} {}\n", e.target_name, e.target_index, to_string(e.kind), sources);
        }
        if (edges.size() > shown) out += fmt::format("#   ... ({} more)\n", edges.size() - shown);
    }
    return out;
}

ExemplarBlock render_exemplar(const Sample& sample, const AnalysisProduct& product, bool include_output,
                              std::size_t max_dfg_lines, const PromptOptions& options) {
    PromptOptions opts = options;
    opts.max_dfg_lines = max_dfg_lines;
    ExemplarBlock block;
    block.code = strip_trailing_newlines(sample.code);
    block.facts_text = render_facts(product, opts);
    block.rendered = block.code + "\n" + block.facts_text;
    if (include_output) {
        block.output = sample.summary;
        block.rendered += fmt::format("{} {}", kSummaryCue, sample.summary);
    } else {
        block.rendered += kSummaryCue;
    }
    return block;
}

namespace {

std::string join_blocks(const std::vector<ExemplarBlock>& blocks) {
    std::string text;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i > 0) text += kBlockSeparator;
        text += blocks[i].rendered;
    }
    return text;
}

const AnalysisProduct& product_for(const ProductMap& products, const Sample& s) {
    static const AnalysisProduct kEmpty;
    auto it = products.find(s.id);
    return it == products.end() ? kEmpty : it->second;
}

}  // namespace

Prompt assemble_summarization_prompt(const std::vector<Sample>& exemplars, const Sample& target,
                                     const ProductMap& products, std::size_t shots, const PromptOptions& options) {
    const std::size_t limit = limit_of(options);
    Prompt prompt;
    prompt.budget = options.budget;
    if (shots > exemplars.size() && !exemplars.empty()) {
        prompt.warnings.push_back(
            fmt::format("requested {} shots but only {} exemplars are available", shots, exemplars.size()));
    }
    ExemplarBlock target_block =
        render_exemplar(target, product_for(products, target), false, options.max_dfg_lines, options);
    std::vector<ExemplarBlock> rendered;
    std::size_t wanted = std::min(shots, exemplars.size());
    for (std::size_t i = 0; i < wanted; ++i) {
        rendered.push_back(
            render_exemplar(exemplars[i], product_for(products, exemplars[i]), true, options.max_dfg_lines, options));
    }

    std::size_t k = wanted;
    std::size_t last_estimate = 0;
    while (true) {
        std::vector<ExemplarBlock> blocks;
        if (options.best_last) {
            for (std::size_t i = k; i-- > 0;) blocks.push_back(rendered[i]);
        } else {
            for (std::size_t i = 0; i < k; ++i) blocks.push_back(rendered[i]);
        }
        blocks.push_back(target_block);
        std::string text = join_blocks(blocks);
        last_estimate = estimate(options, text);
        if (last_estimate <= limit) {
            prompt.blocks = std::move(blocks);
            prompt.text = std::move(text);
            prompt.estimated_tokens = last_estimate;
            prompt.shots_used = k;
            if (k < wanted) {
                prompt.warnings.push_back(fmt::format("shots reduced from {} to {} to fit the budget", wanted, k));
            }
            return prompt;
        }
        if (k <= 1) break;
        --k;
    }
    throw OversizePrompt(target.id, last_estimate, limit);
}

Prompt assemble_completion_prompt(const std::vector<std::string>& prefix_lines, const AnalysisProduct& product,
                                  const PromptOptions& options, std::string_view sample_id) {
    const std::size_t limit = limit_of(options);
    std::string prefix;
    for (std::size_t i = 0; i < prefix_lines.size(); ++i) {
        if (i > 0) prefix += '\n';
        prefix += prefix_lines[i];
    }
    AnalysisProduct facts = product;
    std::vector<std::string> dropped;
    std::size_t est = 0;
    while (true) {
        ExemplarBlock block;
        block.code = prefix;
        block.facts_text = render_facts(facts, options);
        block.rendered = block.facts_text + prefix;
        est = estimate(options, block.rendered);
        if (est <= limit) {
            Prompt prompt;
            prompt.text = block.rendered;
            prompt.blocks.push_back(std::move(block));
            prompt.estimated_tokens = est;
            prompt.budget = options.budget;
            for (const auto& d : dropped) prompt.warnings.push_back("dropped " + d + " to fit the budget");
            return prompt;
        }
        if (facts.dfg) {
            facts.dfg.reset();
            dropped.emplace_back("dataflow");
        } else if (facts.identifiers) {
            facts.identifiers.reset();
            dropped.emplace_back("identifiers");
        } else if (facts.repo_fact) {
            facts.repo_fact.reset();
            dropped.emplace_back("repository fact");
        } else {
            break;
        }
    }
    throw OversizePrompt(std::string(sample_id), est, limit);
}

}  // namespace asap
