#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "asap/language.hpp"

namespace asap {

using Timestamp = std::chrono::sys_seconds;

/// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS][.frac][Z|+HH:MM|-HH:MM]".
/// Throws CorpusError on malformed input.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

/// One code/summary pair from a corpus.
struct Sample {
    std::string id;
    std::string repo;       ///< "owner/name"
    std::string path;
    std::string func_name;
    std::string code;
    std::string summary;
    Language language = Language::java;
    std::optional<Timestamp> created_at;

    bool operator==(const Sample&) const = default;
};

struct LoadOptions {
    /// Require a non-empty summary (false for completion-only pools).
    bool require_summary = true;
    /// Strip a leading docstring from python code so the gold text never leaks into prompts.
    bool strip_python_docstring = true;

    bool operator==(const LoadOptions&) const = default;
};

struct PoolProvenance {
    std::string source;
    LoadOptions options;
    std::size_t skipped_missing = 0;    ///< records without code or summary
    std::size_t skipped_duplicate = 0;  ///< repeated (repo, path, func_name, code)
    std::size_t skipped_malformed = 0;  ///< lines that are not JSON objects

    bool operator==(const PoolProvenance&) const = default;
};

/// An immutable, ordered collection of samples sharing one language.
class SamplePool {
public:
    SamplePool(Language language, std::vector<Sample> samples, PoolProvenance provenance = {});

    Language language() const noexcept { return language_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const PoolProvenance& provenance() const noexcept { return provenance_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }

    /// Returns nullptr when no sample carries `id`.
    const Sample* find(std::string_view id) const;

    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

private:
    Language language_;
    std::vector<Sample> samples_;
    PoolProvenance provenance_;
};

/// Stable id derived from (repo, path, func_name, code).
std::string derive_sample_id(const Sample& sample);

/// First paragraph of a doc comment, whitespace collapsed; javadoc/sphinx tag lines end it.
std::string first_paragraph(std::string_view docstring);

/// Removes the docstring statement that opens a python function body, if any.
std::string strip_python_docstring(std::string_view code);

/// Loads a CodeSearchNet-style JSONL file.
SamplePool load_pool(const std::filesystem::path& path, Language language, const LoadOptions& options = {});

/// Parses JSONL text already in memory; `source` only labels provenance and errors.
SamplePool parse_pool(std::string_view jsonl, Language language, const LoadOptions& options = {},
                      std::string source = "<memory>");

/// Writes a pool as JSONL that load_pool reads back into an identical pool.
void save_pool(const SamplePool& pool, const std::filesystem::path& path);
std::string serialize_pool(const SamplePool& pool);

/// Fills created_at from a metadata JSONL of {"id", "created_at"} records.
SamplePool attach_created_at(const SamplePool& pool, const std::filesystem::path& metadata);

/// Seeded uniform subset of size n; keeps the original relative order.
SamplePool sample_uniform(const SamplePool& pool, std::size_t n, std::uint64_t seed);

/// Id list of a pool, one JSON string per line.
void save_id_list(const SamplePool& pool, const std::filesystem::path& path);
std::vector<std::string> load_id_list(const std::filesystem::path& path);
SamplePool select_ids(const SamplePool& pool, const std::vector<std::string>& ids);

struct SplitCount {
    std::size_t train;
};
struct SplitFraction {
    double train;
};
using SplitPoint = std::variant<SplitCount, SplitFraction>;

struct ProjectSplit {
    SamplePool train;
    SamplePool test;
};

/// Orders one project's samples by created_at and cuts them so that every train sample
/// precedes every test sample. Samples tied with the last train timestamp join train.
ProjectSplit split_same_project(const SamplePool& pool, std::string_view project, SplitPoint point);

}  // namespace asap
