#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asap/corpus.hpp"

namespace asap {

struct CodeTokenizerOptions {
    /// Also emit camelCase / snake_case subtokens next to the compound token.
    bool split_subtokens = true;

    bool operator==(const CodeTokenizerOptions&) const = default;
};

/// Lowercased alphanumeric tokens of `text`; with subtoken splitting "fooBar_baz" yields
/// {"foobar_baz", "foo", "bar", "baz"}.
std::vector<std::string> tokenize_code(std::string_view text, const CodeTokenizerOptions& options = {});

/// camelCase / snake_case / digit-boundary parts of one identifier, original case kept.
std::vector<std::string> split_identifier(std::string_view word);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    bool operator==(const Bm25Params&) const = default;
};

struct ScoredDoc {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

/// Okapi BM25 over the code of a sample pool. Immutable once built; safe for concurrent queries.
class Bm25Index {
public:
    static constexpr int kSnapshotVersion = 1;

    static Bm25Index build(const SamplePool& pool, Bm25Params params = {}, CodeTokenizerOptions tokenizer = {});

    /// Builds from pre-tokenized documents; `doc_ids` and `docs` are parallel.
    static Bm25Index from_tokens(std::vector<std::string> doc_ids, const std::vector<std::vector<std::string>>& docs,
                                 Bm25Params params = {}, CodeTokenizerOptions tokenizer = {});

    std::size_t size() const noexcept { return doc_ids_.size(); }
    const Bm25Params& params() const noexcept { return params_; }
    const CodeTokenizerOptions& tokenizer() const noexcept { return tokenizer_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<std::size_t>& doc_lengths() const noexcept { return doc_lengths_; }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    const std::unordered_map<std::string, std::uint32_t>& doc_term_freqs(std::size_t doc) const {
        return doc_term_freqs_.at(doc);
    }
    /// Number of documents containing `term`.
    std::uint32_t doc_freq(std::string_view term) const;
    const std::unordered_map<std::string, std::uint32_t>& doc_freqs() const noexcept { return doc_freqs_; }

    /// max(0, ln((N - df + 0.5) / (df + 0.5) + 1)).
    double idf(std::string_view term) const;

    /// BM25 score of one document; repeated query tokens contribute repeatedly.
    double score(const std::vector<std::string>& query_tokens, std::size_t doc) const;

    /// Top-k documents by descending score, ties by ascending id. `exclude_id` drops the
    /// query sample itself.
    std::vector<ScoredDoc> retrieve_tokens(const std::vector<std::string>& query_tokens, std::size_t k,
                                           std::optional<std::string_view> exclude_id = std::nullopt) const;
    std::vector<ScoredDoc> retrieve(std::string_view code, std::size_t k,
                                    std::optional<std::string_view> exclude_id = std::nullopt) const;

    void save(const std::filesystem::path& path) const;
    static Bm25Index load(const std::filesystem::path& path);
    std::string to_json() const;
    static Bm25Index from_json(std::string_view text);

private:
    Bm25Index() = default;
    void finalize();

    Bm25Params params_;
    CodeTokenizerOptions tokenizer_;
    std::vector<std::string> doc_ids_;
    std::vector<std::unordered_map<std::string, std::uint32_t>> doc_term_freqs_;
    std::vector<std::size_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::unordered_map<std::string, std::uint32_t> doc_freqs_;
    // term -> (doc, tf) postings
    std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings_;
};

}  // namespace asap
