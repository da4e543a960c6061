#include "asap/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "asap/error.hpp"

namespace asap {

std::string_view to_string(Metric m) noexcept {
    switch (m) {
        case Metric::bleu_cn: return "bleu_cn";
        case Metric::bleu_dc: return "bleu_dc";
        case Metric::rouge_l: return "rouge_l";
        case Metric::meteor: return "meteor";
        case Metric::em: return "em";
        case Metric::es: return "es";
    }
    return "?";
}

Metric parse_metric(std::string_view name) {
    for (Metric m : {Metric::bleu_cn, Metric::bleu_dc, Metric::rouge_l, Metric::meteor, Metric::em, Metric::es}) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::vector<Metric> summary_metrics() { return {Metric::bleu_cn, Metric::bleu_dc, Metric::rouge_l, Metric::meteor}; }
std::vector<Metric> completion_metrics() { return {Metric::em, Metric::es}; }

std::vector<Metric> parse_metric_list(std::string_view spec) {
    if (spec == "summary") return summary_metrics();
    if (spec == "completion") return completion_metrics();
    std::vector<Metric> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        std::size_t comma = spec.find(',', pos);
        if (comma == std::string_view::npos) comma = spec.size();
        auto part = spec.substr(pos, comma - pos);
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
        if (!part.empty()) {
            Metric m = parse_metric(part);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        }
        pos = comma + 1;
    }
    if (out.empty()) throw ConfigError("empty metric list");
    return out;
}

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

}  // namespace

std::vector<std::string> tokenize_summary(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (word_char(c)) {
            std::string tok;
            while (i < text.size() && word_char(static_cast<unsigned char>(text[i]))) {
                tok += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
                ++i;
            }
            out.push_back(std::move(tok));
        } else {
            out.emplace_back(1, text[i]);
            ++i;
        }
    }
    return out;
}

namespace {

using Tokens = std::vector<std::string>;

std::vector<std::string> tokens_or_throw(std::string_view reference) {
    auto ref = tokenize_summary(reference);
    if (ref.empty()) throw MetricError("empty reference");
    return ref;
}

// matched (clipped) n-grams and number of candidate n-grams
std::pair<std::size_t, std::size_t> ngram_overlap(const Tokens& cand, const Tokens& ref, std::size_t n) {
    if (cand.size() < n) return {0, 0};
    auto counts = [n](const Tokens& t) {
        std::unordered_map<std::string, std::size_t> c;
        for (std::size_t i = 0; i + n <= t.size(); ++i) {
            std::string key;
            for (std::size_t j = i; j < i + n; ++j) {
                key += t[j];
                key += '\x1f';
            }
            ++c[key];
        }
        return c;
    };
    auto cc = counts(cand);
    auto rc = counts(ref);
    std::size_t matched = 0;
    for (const auto& [gram, count] : cc) {
        auto it = rc.find(gram);
        if (it != rc.end()) matched += std::min(count, it->second);
    }
    return {matched, cand.size() - n + 1};
}

double clamp100(double v) { return std::clamp(v, 0.0, 100.0); }

}  // namespace

double bleu_cn(std::string_view candidate, std::string_view reference) {
    Tokens ref = tokens_or_throw(reference);
    Tokens cand = tokenize_summary(candidate);
    double log_bleu = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        auto [correct, guess] = ngram_overlap(cand, ref, n);
        double add = n > 1 ? 1.0 : 0.0;
        if (correct + add == 0.0) return 0.0;
        log_bleu += std::log((static_cast<double>(correct) + add) / (static_cast<double>(guess) + add));
    }
    log_bleu /= 4.0;
    double bp = std::min(0.0, 1.0 - static_cast<double>(ref.size() + 1) / static_cast<double>(cand.size() + 1));
    return clamp100(100.0 * std::exp(log_bleu + bp));
}

double bleu_dc(std::string_view candidate, std::string_view reference) {
    Tokens ref = tokens_or_throw(reference);
    Tokens cand = tokenize_summary(candidate);
    const double k = 5.0;
    std::size_t hyp_len = cand.size();
    std::array<double, 4> p{};
    std::array<std::size_t, 4> num{};
    std::array<std::size_t, 4> den{};
    for (std::size_t n = 1; n <= 4; ++n) {
        auto [matched, total] = ngram_overlap(cand, ref, n);
        num[n - 1] = matched;
        den[n - 1] = std::max<std::size_t>(1, total);
    }
    if (num[0] == 0) return 0.0;
    int incvnt = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        if (num[i] == 0 && hyp_len > 1) {
            double numerator = 1.0 / (std::pow(2.0, incvnt) * k / std::log(static_cast<double>(hyp_len)));
            p[i] = numerator / static_cast<double>(den[i]);
            ++incvnt;
        } else {
            p[i] = static_cast<double>(num[i]) / static_cast<double>(den[i]);
        }
    }
    double s = 0.0;
    for (double pi : p) {
        if (pi > 0) s += 0.25 * std::log(pi);
    }
    double r = static_cast<double>(ref.size());
    double c = static_cast<double>(hyp_len);
    double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return clamp100(100.0 * bp * std::exp(s));
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    Tokens ref = tokens_or_throw(reference);
    Tokens cand = tokenize_summary(candidate);
    if (cand.empty()) return 0.0;
    std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            cur[j] = cand[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    double lcs = static_cast<double>(prev[ref.size()]);
    if (lcs == 0) return 0.0;
    double p = lcs / static_cast<double>(cand.size());
    double r = lcs / static_cast<double>(ref.size());
    const double b2 = 1.2 * 1.2;
    return clamp100(100.0 * (1 + b2) * p * r / (r + b2 * p));
}

// ---- METEOR --------------------------------------------------------------------------

namespace {

constexpr std::size_t kAlignmentBudget = 200000;

struct MeteorSearch {
    const Tokens& cand;
    const Tokens& ref;
    std::vector<std::string> cstem, rstem;
    std::vector<int> stage_of;  // per candidate position: 0 skip, 1 exact, 2 stem
    std::unordered_map<std::string, std::size_t> exact_quota, stem_quota;
    std::vector<int> match;  // cand -> ref or -1
    std::vector<bool> used;
    std::size_t best_chunks = std::numeric_limits<std::size_t>::max();
    std::size_t visited = 0;
    std::size_t matches = 0;

    MeteorSearch(const Tokens& c, const Tokens& r) : cand(c), ref(r), match(c.size(), -1), used(r.size(), false) {
        for (const auto& t : c) cstem.push_back(porter_stem(t));
        for (const auto& t : r) rstem.push_back(porter_stem(t));
        std::unordered_map<std::string, std::size_t> cw, rw;
        for (const auto& t : c) ++cw[t];
        for (const auto& t : r) ++rw[t];
        for (const auto& [w, n] : cw) {
            auto it = rw.find(w);
            if (it != rw.end()) exact_quota[w] = std::min(n, it->second);
        }
        // stem stage works on what exact matching leaves over; per-word leftovers are fixed
        std::unordered_map<std::string, std::size_t> cs, rs;
        for (const auto& [w, n] : cw) cs[porter_stem(w)] += n - (exact_quota.count(w) ? exact_quota[w] : 0);
        for (const auto& [w, n] : rw) rs[porter_stem(w)] += n - (exact_quota.count(w) ? exact_quota[w] : 0);
        for (const auto& [s, n] : cs) {
            auto it = rs.find(s);
            if (it != rs.end() && std::min(n, it->second) > 0) stem_quota[s] = std::min(n, it->second);
        }
        for (const auto& [w, q] : exact_quota) matches += q;
        for (const auto& [s, q] : stem_quota) matches += q;
    }

    std::size_t chunks() const {
        std::size_t n = 0;
        int prev_c = -2, prev_r = -2;
        for (std::size_t i = 0; i < match.size(); ++i) {
            if (match[i] < 0) continue;
            if (!(static_cast<int>(i) == prev_c + 1 && match[i] == prev_r + 1)) ++n;
            prev_c = static_cast<int>(i);
            prev_r = match[i];
        }
        return n;
    }

    // Exact stage over all candidate positions, then the stem stage.
    void exact(std::size_t i) {
        if (visited > kAlignmentBudget) return;
        if (i == cand.size()) {
            stem(0);
            return;
        }
        auto it = exact_quota.find(cand[i]);
        std::size_t remaining_same = 0;
        for (std::size_t k = i + 1; k < cand.size(); ++k) remaining_same += cand[k] == cand[i];
        if (it != exact_quota.end() && it->second > 0) {
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (used[j] || ref[j] != cand[i]) continue;
                used[j] = true;
                match[i] = static_cast<int>(j);
                --it->second;
                exact(i + 1);
                ++it->second;
                match[i] = -1;
                used[j] = false;
            }
            // skipping is only allowed if later occurrences can still fill the quota
            if (remaining_same < it->second) return;
        }
        exact(i + 1);
    }

    void stem(std::size_t i) {
        if (visited > kAlignmentBudget) return;
        if (i == cand.size()) {
            ++visited;
            best_chunks = std::min(best_chunks, chunks());
            return;
        }
        if (match[i] >= 0) {
            stem(i + 1);
            return;
        }
        auto it = stem_quota.find(cstem[i]);
        if (it != stem_quota.end() && it->second > 0) {
            std::size_t later = 0;
            for (std::size_t k = i + 1; k < cand.size(); ++k) later += match[k] < 0 && cstem[k] == cstem[i];
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (used[j] || rstem[j] != cstem[i]) continue;
                used[j] = true;
                match[i] = static_cast<int>(j);
                --it->second;
                stem(i + 1);
                ++it->second;
                match[i] = -1;
                used[j] = false;
            }
            if (later < it->second) return;
        }
        stem(i + 1);
    }

    // Leftmost greedy alignment, used when the search space is too large.
    std::size_t greedy_chunks() {
        std::fill(match.begin(), match.end(), -1);
        std::fill(used.begin(), used.end(), false);
        for (std::size_t i = 0; i < cand.size(); ++i) {
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (!used[j] && ref[j] == cand[i]) {
                    used[j] = true;
                    match[i] = static_cast<int>(j);
                    break;
                }
            }
        }
        for (std::size_t i = 0; i < cand.size(); ++i) {
            if (match[i] >= 0) continue;
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (!used[j] && rstem[j] == cstem[i]) {
                    used[j] = true;
                    match[i] = static_cast<int>(j);
                    break;
                }
            }
        }
        return chunks();
    }
};

}  // namespace

double meteor(std::string_view candidate, std::string_view reference, const MeteorParams& params) {
    Tokens ref = tokens_or_throw(reference);
    Tokens cand = tokenize_summary(candidate);
    if (cand.empty()) return 0.0;
    MeteorSearch search(cand, ref);
    if (search.matches == 0) return 0.0;
    search.exact(0);
    std::size_t chunks = search.visited > kAlignmentBudget || search.best_chunks == std::numeric_limits<std::size_t>::max()
                             ? search.greedy_chunks()
                             : search.best_chunks;
    double m = static_cast<double>(search.matches);
    double p = m / static_cast<double>(cand.size());
    double r = m / static_cast<double>(ref.size());
    double fmean = p * r / (params.alpha * p + (1 - params.alpha) * r);
    double penalty = params.gamma * std::pow(static_cast<double>(chunks) / m, params.beta);
    return clamp100(100.0 * fmean * (1 - penalty));
}

// ---- completion metrics --------------------------------------------------------------

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += c;
        }
    }
    return out;
}

double exact_match(std::string_view candidate, std::string_view reference) {
    return normalize_whitespace(candidate) == normalize_whitespace(reference) ? 100.0 : 0.0;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

double edit_similarity(std::string_view candidate, std::string_view reference) {
    std::string c = normalize_whitespace(candidate);
    std::string r = normalize_whitespace(reference);
    std::size_t longest = std::max(c.size(), r.size());
    if (longest == 0) return 100.0;
    return clamp100(100.0 * (1.0 - static_cast<double>(levenshtein(c, r)) / static_cast<double>(longest)));
}

double compute_metric(Metric m, std::string_view candidate, std::string_view reference) {
    switch (m) {
        case Metric::bleu_cn: return bleu_cn(candidate, reference);
        case Metric::bleu_dc: return bleu_dc(candidate, reference);
        case Metric::rouge_l: return rouge_l(candidate, reference);
        case Metric::meteor: return meteor(candidate, reference);
        case Metric::em: return exact_match(candidate, reference);
        case Metric::es: return edit_similarity(candidate, reference);
    }
    throw MetricError("unknown metric");
}

std::map<Metric, double> aggregate(const std::vector<MetricScore>& scores) {
    std::map<Metric, std::pair<double, std::size_t>> acc;
    for (const auto& s : scores) {
        auto& [sum, n] = acc[s.metric];
        sum += s.value;
        ++n;
    }
    std::map<Metric, double> out;
    for (const auto& [m, v] : acc) out[m] = v.first / static_cast<double>(v.second);
    return out;
}

}  // namespace asap
