#include "asap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asap/error.hpp"

namespace asap {

std::string_view to_string(PairedTest t) noexcept {
    return t == PairedTest::mcnemar ? "mcnemar" : "wilcoxon_one_sided";
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

// Mid-ranks of |d|, ascending.
std::vector<double> mid_ranks(const std::vector<double>& abs_d) {
    std::vector<std::size_t> order(abs_d.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return abs_d[x] < abs_d[y]; });
    std::vector<double> ranks(abs_d.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
        double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

// P(W+ >= w) with every sign equally likely; works on doubled ranks so mid-ranks stay integral.
double exact_upper_tail(const std::vector<double>& ranks, double w) {
    std::vector<long> doubled;
    long total = 0;
    for (double r : ranks) {
        doubled.push_back(std::lround(2 * r));
        total += doubled.back();
    }
    std::vector<double> dist(static_cast<std::size_t>(total) + 1, 0.0);
    dist[0] = 1.0;
    long reach = 0;
    for (long r : doubled) {
        for (long s = reach; s >= 0; --s) {
            if (dist[static_cast<std::size_t>(s)] != 0.0) dist[static_cast<std::size_t>(s + r)] += dist[static_cast<std::size_t>(s)];
        }
        reach += r;
    }
    long threshold = std::lround(2 * w);
    double tail = 0.0;
    for (long s = threshold; s <= total; ++s) tail += dist[static_cast<std::size_t>(s)];
    return std::ldexp(tail, -static_cast<int>(ranks.size()));
}

}  // namespace

PairedTestResult wilcoxon_one_sided(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMethod method) {
    if (a.size() != b.size()) throw StatsError("paired samples differ in length");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        if (diff != 0.0) d.push_back(diff);
    }
    if (d.size() < 5) {
        throw StatsError("Wilcoxon test needs at least 5 nonzero differences, got " + std::to_string(d.size()));
    }
    std::vector<double> abs_d(d.size());
    std::transform(d.begin(), d.end(), abs_d.begin(), [](double x) { return std::fabs(x); });
    auto ranks = mid_ranks(abs_d);
    double w_plus = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0) w_plus += ranks[i];
    }
    const std::size_t n = d.size();
    PairedTestResult out;
    out.test = PairedTest::wilcoxon_one_sided;
    out.statistic = w_plus;
    out.n_effective = n;
    bool exact = method == WilcoxonMethod::exact || (method == WilcoxonMethod::automatic && n <= kWilcoxonExactMaxN);
    if (exact) {
        out.method = "exact";
        out.p_value = exact_upper_tail(ranks, w_plus);
    } else {
        out.method = "normal";
        double nn = static_cast<double>(n);
        double mean = nn * (nn + 1) / 4.0;
        double var = nn * (nn + 1) * (2 * nn + 1) / 24.0;
        // tie correction
        std::vector<double> sorted = abs_d;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            double t = static_cast<double>(j - i);
            var -= (t * t * t - t) / 48.0;
            i = j;
        }
        double z = var > 0 ? (w_plus - mean - 0.5) / std::sqrt(var) : 0.0;
        out.p_value = normal_sf(z);
    }
    out.p_value = std::clamp(out.p_value, 0.0, 1.0);
    return out;
}

PairedTestResult mcnemar(std::size_t b, std::size_t c) {
    std::size_t n = b + c;
    if (n == 0) throw StatsError("McNemar test needs at least one discordant pair");
    PairedTestResult out;
    out.test = PairedTest::mcnemar;
    out.n_effective = n;
    if (n <= kMcNemarExactMaxN) {
        out.method = "exact";
        std::size_t k = std::min(b, c);
        out.statistic = static_cast<double>(k);
        // sum of binomial pmf in log space to stay finite for n up to 200
        double tail = 0.0;
        for (std::size_t i = 0; i <= k; ++i) {
            double logp = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                          std::lgamma(static_cast<double>(n - i) + 1) - static_cast<double>(n) * std::log(2.0);
            tail += std::exp(logp);
        }
        out.p_value = std::min(1.0, 2.0 * tail);
    } else {
        out.method = "chi2";
        double diff = std::fabs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
        double chi2 = std::max(0.0, diff) * std::max(0.0, diff) / static_cast<double>(n);
        out.statistic = chi2;
        out.p_value = std::erfc(std::sqrt(chi2 / 2.0));
    }
    out.p_value = std::clamp(out.p_value, 0.0, 1.0);
    return out;
}

std::vector<double> benjamini_hochberg(const std::vector<double>& p_values) {
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return p_values[x] < p_values[y]; });
    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        std::size_t idx = order[r];
        // m / rank >= 1, but the product can round below p
        double v = std::max(p_values[idx], p_values[idx] * static_cast<double>(m) / static_cast<double>(r + 1));
        running = std::min(running, v);
        adjusted[idx] = std::min(1.0, running);
    }
    return adjusted;
}

}  // namespace asap
