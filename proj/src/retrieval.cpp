#include "asap/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "asap/error.hpp"

namespace asap {

using nlohmann::json;

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

constexpr const char* kSnapshotFormat = "asap-bm25-index";

}  // namespace

std::vector<std::string> split_identifier(std::string_view word) {
    std::vector<std::string> parts;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) parts.push_back(std::move(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < word.size(); ++i) {
        char c = word[i];
        if (c == '_') {
            flush();
            continue;
        }
        if (!cur.empty()) {
            char prev = cur.back();
            bool boundary = (is_lower(prev) && is_upper(c)) || (is_digit(prev) != is_digit(c)) ||
                            // "HTTPServer": split before the last capital of an acronym run
                            (is_upper(prev) && is_upper(c) && i + 1 < word.size() && is_lower(word[i + 1]));
            if (boundary) flush();
        }
        cur.push_back(c);
    }
    flush();
    return parts;
}

std::vector<std::string> tokenize_code(std::string_view text, const CodeTokenizerOptions& options) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_word_char(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_word_char(text[j])) ++j;
        std::string_view word = text.substr(i, j - i);
        std::string compound = lower(word);
        if (options.split_subtokens) {
            auto parts = split_identifier(word);
            bool emit_parts = parts.size() > 1 || (parts.size() == 1 && lower(parts[0]) != compound);
            if (!parts.empty() || compound.find_first_not_of('_') != std::string::npos) tokens.push_back(compound);
            if (emit_parts) {
                for (auto& p : parts) tokens.push_back(lower(p));
            }
        } else {
            tokens.push_back(std::move(compound));
        }
        i = j;
    }
    return tokens;
}

Bm25Index Bm25Index::build(const SamplePool& pool, Bm25Params params, CodeTokenizerOptions tokenizer) {
    if (pool.empty()) throw IndexError("cannot build a BM25 index over an empty pool");
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> docs;
    ids.reserve(pool.size());
    docs.reserve(pool.size());
    for (const auto& s : pool) {
        ids.push_back(s.id);
        docs.push_back(tokenize_code(s.code, tokenizer));
    }
    return from_tokens(std::move(ids), docs, params, tokenizer);
}

Bm25Index Bm25Index::from_tokens(std::vector<std::string> doc_ids, const std::vector<std::vector<std::string>>& docs,
                                 Bm25Params params, CodeTokenizerOptions tokenizer) {
    if (docs.empty()) throw IndexError("cannot build a BM25 index over zero documents");
    if (doc_ids.size() != docs.size()) throw IndexError("doc id count does not match document count");
    Bm25Index index;
    index.params_ = params;
    index.tokenizer_ = tokenizer;
    index.doc_ids_ = std::move(doc_ids);
    index.doc_term_freqs_.resize(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (const auto& t : docs[d]) ++index.doc_term_freqs_[d][t];
    }
    index.finalize();
    return index;
}

void Bm25Index::finalize() {
    const std::size_t n = doc_term_freqs_.size();
    doc_lengths_.assign(n, 0);
    doc_freqs_.clear();
    postings_.clear();
    std::size_t total = 0;
    for (std::size_t d = 0; d < n; ++d) {
        std::size_t len = 0;
        for (const auto& [term, tf] : doc_term_freqs_[d]) {
            len += tf;
            ++doc_freqs_[term];
            postings_[term].emplace_back(static_cast<std::uint32_t>(d), tf);
        }
        doc_lengths_[d] = len;
        total += len;
    }
    avg_doc_length_ = static_cast<double>(total) / static_cast<double>(n);
    if (!(avg_doc_length_ > 0.0)) throw IndexError("BM25 index has zero average document length");
}

std::uint32_t Bm25Index::doc_freq(std::string_view term) const {
    auto it = doc_freqs_.find(std::string(term));
    return it == doc_freqs_.end() ? 0 : it->second;
}

double Bm25Index::idf(std::string_view term) const {
    const double n = static_cast<double>(size());
    const double df = doc_freq(term);
    return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5) + 1.0));
}

double Bm25Index::score(const std::vector<std::string>& query_tokens, std::size_t doc) const {
    const auto& tfs = doc_term_freqs_.at(doc);
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_lengths_[doc]) / avg_doc_length_);
    double total = 0.0;
    for (const auto& t : query_tokens) {
        auto it = tfs.find(t);
        if (it == tfs.end()) continue;
        const double tf = it->second;
        total += idf(t) * tf * (params_.k1 + 1.0) / (tf + norm);
    }
    return total;
}

std::vector<ScoredDoc> Bm25Index::retrieve_tokens(const std::vector<std::string>& query_tokens, std::size_t k,
                                                  std::optional<std::string_view> exclude_id) const {
    if (k == 0) throw IndexError("retrieve requires k >= 1");
    std::unordered_map<std::string, std::size_t> query_counts;
    for (const auto& t : query_tokens) ++query_counts[t];
    std::vector<double> scores(size(), 0.0);
    for (const auto& [term, qcount] : query_counts) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double w = idf(term) * static_cast<double>(qcount);
        for (const auto& [doc, tf_raw] : it->second) {
            const double tf = tf_raw;
            const double norm =
                params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_lengths_[doc]) / avg_doc_length_);
            scores[doc] += w * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }
    std::vector<std::size_t> order;
    order.reserve(size());
    for (std::size_t d = 0; d < size(); ++d) {
        if (exclude_id && doc_ids_[d] == *exclude_id) continue;
        order.push_back(d);
    }
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return doc_ids_[a] < doc_ids_[b];
    };
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
    std::vector<ScoredDoc> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({doc_ids_[order[i]], scores[order[i]]});
    return out;
}

std::vector<ScoredDoc> Bm25Index::retrieve(std::string_view code, std::size_t k,
                                           std::optional<std::string_view> exclude_id) const {
    return retrieve_tokens(tokenize_code(code, tokenizer_), k, exclude_id);
}

std::string Bm25Index::to_json() const {
    json docs = json::array();
    for (const auto& tfs : doc_term_freqs_) {
        // sorted keys keep snapshots byte-stable
        std::vector<std::pair<std::string, std::uint32_t>> sorted(tfs.begin(), tfs.end());
        std::sort(sorted.begin(), sorted.end());
        json d = json::object();
        for (const auto& [t, c] : sorted) d[t] = c;
        docs.push_back(std::move(d));
    }
    json snap{{"format", kSnapshotFormat},
              {"version", kSnapshotVersion},
              {"params", {{"k1", params_.k1}, {"b", params_.b}}},
              {"tokenizer", {{"split_subtokens", tokenizer_.split_subtokens}}},
              {"doc_ids", doc_ids_},
              {"docs", std::move(docs)}};
    return snap.dump();
}

Bm25Index Bm25Index::from_json(std::string_view text) {
    json snap = json::parse(text, nullptr, false);
    if (snap.is_discarded() || !snap.is_object()) throw IndexError("index snapshot is not valid JSON");
    if (snap.value("format", "") != kSnapshotFormat) throw IndexError("not a BM25 index snapshot");
    if (snap.value("version", 0) != kSnapshotVersion) {
        throw IndexError("unsupported index snapshot version " + snap.value("version", json(0)).dump());
    }
    try {
        Bm25Index index;
        index.params_.k1 = snap.at("params").at("k1").get<double>();
        index.params_.b = snap.at("params").at("b").get<double>();
        index.tokenizer_.split_subtokens = snap.at("tokenizer").at("split_subtokens").get<bool>();
        index.doc_ids_ = snap.at("doc_ids").get<std::vector<std::string>>();
        const auto& docs = snap.at("docs");
        if (docs.size() != index.doc_ids_.size() || docs.empty()) throw IndexError("index snapshot is inconsistent");
        for (const auto& d : docs) {
            std::unordered_map<std::string, std::uint32_t> tfs;
            for (const auto& [t, c] : d.items()) tfs[t] = c.get<std::uint32_t>();
            index.doc_term_freqs_.push_back(std::move(tfs));
        }
        index.finalize();
        return index;
    } catch (const json::exception& e) {
        throw IndexError(std::string("malformed index snapshot: ") + e.what());
    }
}

void Bm25Index::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IndexError("cannot write '" + path.string() + "'");
    out << to_json();
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace asap
