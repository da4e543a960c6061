#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asap/corpus.hpp"
#include "asap/language.hpp"
#include "asap/syntax_tree.hpp"

namespace asap {

struct RepoFact {
    std::string repo;  ///< "owner/name"
    std::string path;
    std::string func_name;
    std::string signature;   ///< first line of the declaration
    bool tokenized = false;  ///< render repo and path as "/"-split token lists

    bool operator==(const RepoFact&) const = default;
};

enum class IdentifierTag { function_name, parameter, local_variable, call, type, attribute, identifier };

std::string_view to_string(IdentifierTag tag) noexcept;

struct TaggedIdentifier {
    std::string name;
    IdentifierTag tag = IdentifierTag::identifier;
    std::size_t occurrence = 0;  ///< ordinal among the identifier tokens of the code

    bool operator==(const TaggedIdentifier&) const = default;
};

enum class DfgEdgeKind { comes_from, computed_from };

std::string_view to_string(DfgEdgeKind kind) noexcept;

struct DfgEdge {
    std::string target_name;
    std::size_t target_index = 0;
    DfgEdgeKind kind = DfgEdgeKind::comes_from;
    std::vector<std::size_t> source_indices;  ///< ascending
    std::vector<std::string> source_names;    ///< parallel to source_indices

    bool operator==(const DfgEdge&) const = default;
};

/// Semantic facts for one function. Absent members were not requested or failed.
struct AnalysisProduct {
    std::optional<RepoFact> repo_fact;
    std::optional<std::vector<TaggedIdentifier>> identifiers;
    std::optional<std::vector<DfgEdge>> dfg;
    std::vector<std::string> warnings;

    bool empty() const noexcept { return !repo_fact && !identifiers && !dfg; }
};

/// Which extractors run.
struct Components {
    bool repo = true;
    bool identifiers = true;
    bool dfg = true;

    bool any() const noexcept { return repo || identifiers || dfg; }
    static Components all() { return {}; }
    static Components none() { return {false, false, false}; }

    bool operator==(const Components&) const = default;
};

/// "repo,id,dfg" style names; "all" and "none" are accepted. Throws ConfigError.
Components parse_components(std::string_view spec);
std::string to_string(const Components& c);

/// One entry per identifier token, in source order.
std::vector<TaggedIdentifier> tag_identifiers(const SyntaxTree& tree, Language language);
std::vector<TaggedIdentifier> tag_identifiers(std::string_view code, Language language);

/// Reaching-definition edges, ordered by target index (comes_from before computed_from).
std::vector<DfgEdge> build_dfg(const SyntaxTree& tree, Language language, const std::vector<TaggedIdentifier>& tags);
std::vector<DfgEdge> build_dfg(std::string_view code, Language language);

/// Maps the extended tags onto the minimal {function_name, parameter, identifier} set.
std::vector<TaggedIdentifier> collapse_tags(std::vector<TaggedIdentifier> ids);

RepoFact make_repo_fact(const Sample& sample, bool tokenized = false);

/// Runs the requested extractors; an extractor that fails leaves its member empty and
/// adds a warning. Throws AnalysisError when components is empty or every requested
/// extractor failed.
AnalysisProduct analyze(const Sample& sample, const Components& components);

/// Facts from the lines preceding a completion target only. An empty prefix yields no
/// identifier or dataflow facts; `repo_fact` is passed through.
AnalysisProduct analyze_prefix(std::string_view code_prefix, Language language,
                               std::optional<RepoFact> repo_fact = std::nullopt,
                               const Components& components = Components::all());

}  // namespace asap
