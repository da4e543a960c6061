#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include "asap/metrics.hpp"

namespace asap::oracle {

std::vector<std::string> tokenize(const std::string& text) {
    static const std::regex re(R"([A-Za-z0-9_]+|[^\sA-Za-z0-9_])");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        std::string t = it->str();
        for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.push_back(t);
    }
    return out;
}

namespace {

using Tokens = std::vector<std::string>;

Tokens gram(const Tokens& t, std::size_t i, std::size_t n) { return Tokens(t.begin() + i, t.begin() + i + n); }

// Clipped matches found by crossing off reference n-grams one at a time.
std::size_t clipped_matches(const Tokens& cand, const Tokens& ref, std::size_t n) {
    if (cand.size() < n || ref.size() < n) return 0;
    std::vector<bool> used(ref.size() - n + 1, false);
    std::size_t hits = 0;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
        for (std::size_t j = 0; j + n <= ref.size(); ++j) {
            if (!used[j] && gram(cand, i, n) == gram(ref, j, n)) {
                used[j] = true;
                ++hits;
                break;
            }
        }
    }
    return hits;
}

std::size_t ngram_total(const Tokens& t, std::size_t n) { return t.size() >= n ? t.size() - n + 1 : 0; }

}  // namespace

double bleu_cn(const std::string& cand_s, const std::string& ref_s) {
    Tokens c = tokenize(cand_s), r = tokenize(ref_s);
    double sum_log = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        double smooth = n == 1 ? 0 : 1;
        double num = static_cast<double>(clipped_matches(c, r, n)) + smooth;
        double den = static_cast<double>(ngram_total(c, n)) + smooth;
        if (num == 0) return 0;
        sum_log += std::log(num / den);
    }
    double bp = std::min(0.0, 1.0 - (static_cast<double>(r.size()) + 1) / (static_cast<double>(c.size()) + 1));
    return 100 * std::exp(sum_log / 4 + bp);
}

double bleu_dc(const std::string& cand_s, const std::string& ref_s) {
    Tokens c = tokenize(cand_s), r = tokenize(ref_s);
    std::vector<double> num(4), den(4);
    for (std::size_t n = 1; n <= 4; ++n) {
        num[n - 1] = static_cast<double>(clipped_matches(c, r, n));
        den[n - 1] = std::max(1.0, static_cast<double>(ngram_total(c, n)));
    }
    if (num[0] == 0) return 0;
    std::vector<double> p(4);
    double inc = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        if (num[i] == 0 && c.size() > 1) {
            p[i] = (1 / (std::pow(2, inc) * 5 / std::log(static_cast<double>(c.size())))) / den[i];
            inc += 1;
        } else {
            p[i] = num[i] / den[i];
        }
    }
    double s = 0;
    for (double x : p) {
        if (x > 0) s += std::log(x) / 4;
    }
    double hl = static_cast<double>(c.size()), rl = static_cast<double>(r.size());
    double bp = hl > rl ? 1 : std::exp(1 - rl / hl);
    return 100 * bp * std::exp(s);
}

double rouge_l(const std::string& cand_s, const std::string& ref_s) {
    Tokens c = tokenize(cand_s), r = tokenize(ref_s);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> lcs = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == c.size() || j == r.size()) return 0;
        auto key = std::make_pair(i, j);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        std::size_t v = c[i] == r[j] ? 1 + lcs(i + 1, j + 1) : std::max(lcs(i + 1, j), lcs(i, j + 1));
        memo[key] = v;
        return v;
    };
    double l = static_cast<double>(lcs(0, 0));
    if (l == 0) return 0;
    double p = l / static_cast<double>(c.size()), rec = l / static_cast<double>(r.size());
    double b2 = 1.44;
    return 100 * (1 + b2) * p * rec / (rec + b2 * p);
}

double meteor(const std::string& cand_s, const std::string& ref_s) {
    Tokens c = tokenize(cand_s), r = tokenize(ref_s);
    if (c.empty()) return 0;
    Tokens cs, rs;
    for (auto& t : c) cs.push_back(porter_stem(t));
    for (auto& t : r) rs.push_back(porter_stem(t));
    // best = (exact matches, total matches, -chunks), lexicographically largest
    std::tuple<int, int, int> best{-1, -1, 0};
    std::vector<int> match(c.size(), -1);
    std::vector<bool> used(r.size(), false);
    std::function<void(std::size_t)> walk = [&](std::size_t i) {
        if (i == c.size()) {
            int exact = 0, total = 0, chunks = 0;
            int pc = -5, pr = -5;
            for (std::size_t k = 0; k < c.size(); ++k) {
                if (match[k] < 0) continue;
                ++total;
                exact += c[k] == r[static_cast<std::size_t>(match[k])];
                if (!(static_cast<int>(k) == pc + 1 && match[k] == pr + 1)) ++chunks;
                pc = static_cast<int>(k);
                pr = match[k];
            }
            best = std::max(best, std::make_tuple(exact, total, -chunks));
            return;
        }
        walk(i + 1);
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (used[j] || (c[i] != r[j] && cs[i] != rs[j])) continue;
            used[j] = true;
            match[i] = static_cast<int>(j);
            walk(i + 1);
            match[i] = -1;
            used[j] = false;
        }
    };
    walk(0);
    double m = std::get<1>(best);
    if (m <= 0) return 0;
    double chunks = -std::get<2>(best);
    double p = m / static_cast<double>(c.size()), rec = m / static_cast<double>(r.size());
    double f = p * rec / (0.9 * p + 0.1 * rec);
    return 100 * f * (1 - 0.5 * std::pow(chunks / m, 3));
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
        }
    }
    return d[a.size()][b.size()];
}

double edit_similarity(const std::string& cand, const std::string& ref) {
    auto norm = [](const std::string& s) {
        std::istringstream in(s);
        std::string w, out;
        while (in >> w) out += (out.empty() ? "" : " ") + w;
        return out;
    };
    std::string a = norm(cand), b = norm(ref);
    if (a.empty() && b.empty()) return 100;
    return 100 * (1 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(std::max(a.size(), b.size())));
}

std::vector<Pair> random_pairs(std::size_t n, unsigned seed) {
    static const std::vector<std::string> vocab = {"the",  "a",     "cat",   "cats",    "run",   "running", "runs",
                                                   "sat",  "dog",   "value", "values",  "of",    "to",      "file",
                                                   "files", "read", "reads", "reading", ".",     ",",       "-"};
    std::mt19937 rng(seed);
    auto sentence = [&](std::size_t min_len) {
        std::size_t len = min_len + rng() % (9 - min_len);
        std::string s;
        for (std::size_t i = 0; i < len; ++i) {
            if (i > 0) s += ' ';
            std::string w = vocab[rng() % vocab.size()];
            if (rng() % 7 == 0 && std::isalpha(static_cast<unsigned char>(w[0]))) w[0] = static_cast<char>(std::toupper(w[0]));
            s += w;
        }
        return s;
    };
    std::vector<Pair> out;
    for (std::size_t i = 0; i < n; ++i) {
        Pair p{sentence(1), sentence(1)};
        if (i % 5 == 0) p.candidate = p.reference;  // identity cases
        out.push_back(p);
    }
    return out;
}

std::vector<Ranked> bm25_rank(const std::vector<std::string>& ids, const std::vector<std::vector<std::string>>& docs,
                              const std::vector<std::string>& query, double k1, double b) {
    const double n = static_cast<double>(docs.size());
    double total = 0;
    for (const auto& d : docs) total += static_cast<double>(d.size());
    const double avg = total / n;
    std::map<std::string, double> df_of;
    for (const auto& q : query) {
        if (df_of.count(q)) continue;
        double df = 0;
        for (const auto& d : docs) df += std::find(d.begin(), d.end(), q) != d.end() ? 1 : 0;
        df_of[q] = df;
    }
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double s = 0;
        for (const auto& q : query) {
            double df = df_of[q];
            double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), q));
            double idf = std::log((n - df + 0.5) / (df + 0.5) + 1);
            if (idf < 0) idf = 0;
            double len = static_cast<double>(docs[i].size());
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg));
        }
        out.push_back({ids[i], s});
    }
    std::sort(out.begin(), out.end(), [](const Ranked& x, const Ranked& y) {
        return x.score != y.score ? x.score > y.score : x.id < y.id;
    });
    return out;
}

std::vector<std::vector<std::string>> random_corpus(std::size_t n_docs, unsigned seed, bool markers) {
    std::mt19937 rng(seed);
    std::vector<std::vector<std::string>> docs;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::vector<std::string> d;
        std::size_t len = 3 + rng() % 30;
        for (std::size_t j = 0; j < len; ++j) {
            // squaring a uniform draw skews toward low word numbers
            double u = static_cast<double>(rng()) / static_cast<double>(std::mt19937::max());
            d.push_back("w" + std::to_string(static_cast<int>(u * u * 60)));
        }
        if (markers) d.push_back("marker" + std::to_string(i));
        docs.push_back(std::move(d));
    }
    return docs;
}

}  // namespace asap::oracle
