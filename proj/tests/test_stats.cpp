#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "asap/error.hpp"
#include "asap/stats.hpp"

using namespace asap;

namespace {

// Brute force over all 2^n sign patterns, using doubled mid-ranks.
struct SignEnumeration {
    double p_ge = 0;  // P(W+ >= observed)
    double p_eq = 0;  // P(W+ == observed)
};

SignEnumeration enumerate_signs(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    }
    std::size_t n = d.size();
    std::vector<int> rank2(n);
    for (std::size_t i = 0; i < n; ++i) {
        int less = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(d[j]) < std::abs(d[i])) ++less;
            if (std::abs(d[j]) == std::abs(d[i])) ++equal;
        }
        rank2[i] = 2 * less + equal + 1;
    }
    int observed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0) observed += rank2[i];
    }
    SignEnumeration out;
    const double total = std::pow(2.0, static_cast<double>(n));
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
        int w = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1) w += rank2[i];
        }
        if (w >= observed) out.p_ge += 1 / total;
        if (w == observed) out.p_eq += 1 / total;
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> shifted(std::size_t n, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) {
        double x = nd(rng);
        b.push_back(x);
        a.push_back(x + shift + nd(rng));
    }
    return {a, b};
}

}  // namespace

TEST(Wilcoxon, AllPositiveFive) {
    auto r = wilcoxon_one_sided({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0});
    EXPECT_NEAR(r.p_value, 0.03125, 1e-12);
    EXPECT_EQ(r.n_effective, 5u);
    EXPECT_EQ(r.method, "exact");
    EXPECT_EQ(r.statistic, 15.0);
}

TEST(Wilcoxon, IdenticalInputsThrow) {
    std::vector<double> a{1, 2, 3, 4, 5, 6};
    EXPECT_THROW(wilcoxon_one_sided(a, a), StatsError);
}

TEST(Wilcoxon, TooFewNonzeroThrow) {
    EXPECT_THROW(wilcoxon_one_sided({1, 2, 3, 4, 5, 6}, {0, 0, 0, 0, 5, 6}), StatsError);
    EXPECT_THROW(wilcoxon_one_sided({1, 2}, {1}), StatsError);
}

TEST(Wilcoxon, ZeroDifferencesDropped) {
    auto r = wilcoxon_one_sided({1, 2, 3, 4, 5, 7, 7}, {0, 0, 0, 0, 0, 7, 7});
    EXPECT_EQ(r.n_effective, 5u);
    EXPECT_NEAR(r.p_value, 0.03125, 1e-12);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTies) {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> small(-3, 3);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> a, b;
        for (int i = 0; i < 12; ++i) {
            a.push_back(small(rng));
            b.push_back(small(rng));
        }
        std::size_t nonzero = 0;
        for (std::size_t i = 0; i < a.size(); ++i) nonzero += a[i] != b[i];
        if (nonzero < 5) continue;
        auto brute = enumerate_signs(a, b);
        EXPECT_NEAR(wilcoxon_one_sided(a, b, WilcoxonMethod::exact).p_value, brute.p_ge, 1e-12) << trial;
    }
}

TEST(Wilcoxon, SwapComplementsUpToObservedMass) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto [a, b] = shifted(14, 0.3, seed);
        double forward = wilcoxon_one_sided(a, b).p_value;
        double backward = wilcoxon_one_sided(b, a).p_value;
        double mass = enumerate_signs(a, b).p_eq;
        EXPECT_NEAR(backward, 1 - forward + mass, 1e-12);
    }
}

TEST(Wilcoxon, ExactAndNormalAgreeAtBoundary) {
    // strong shift: both paths are deep in the tail
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto [a, b] = shifted(1000, 1.0, seed);
        std::vector<double> a25(a.begin(), a.begin() + 25), b25(b.begin(), b.begin() + 25);
        double exact = wilcoxon_one_sided(a25, b25, WilcoxonMethod::exact).p_value;
        double normal = wilcoxon_one_sided(a25, b25, WilcoxonMethod::normal).p_value;
        EXPECT_NEAR(exact, normal, 1e-3) << seed;
    }
    // near the centre of the distribution the approximation is a few 1e-3 off
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto [a, b] = shifted(25, 0.0, seed);
        double exact = wilcoxon_one_sided(a, b, WilcoxonMethod::exact).p_value;
        double normal = wilcoxon_one_sided(a, b, WilcoxonMethod::normal).p_value;
        EXPECT_NEAR(exact, normal, 5e-3) << seed;
    }
}

TEST(Wilcoxon, AutomaticSwitchesAboveTwentyFive) {
    auto [a, b] = shifted(26, 0.5, 3);
    EXPECT_EQ(wilcoxon_one_sided(a, b).method, "normal");
    a.pop_back();
    b.pop_back();
    EXPECT_EQ(wilcoxon_one_sided(a, b).method, "exact");
}

TEST(BenjaminiHochberg, Examples) {
    EXPECT_EQ(benjamini_hochberg({0.04}), std::vector<double>{0.04});
    auto adj = benjamini_hochberg({0.01, 0.02, 0.03});
    for (double v : adj) EXPECT_NEAR(v, 0.03, 1e-12);
    for (double v : benjamini_hochberg({0.2, 0.2, 0.2, 0.2})) EXPECT_NEAR(v, 0.2, 1e-12);
    EXPECT_TRUE(benjamini_hochberg({}).empty());
}

TEST(BenjaminiHochberg, InputOrderPreserved) {
    auto adj = benjamini_hochberg({0.03, 0.001, 0.5});
    EXPECT_NEAR(adj[1], 0.003, 1e-12);
    EXPECT_NEAR(adj[0], 0.045, 1e-12);
    EXPECT_NEAR(adj[2], 0.5, 1e-12);
}

TEST(BenjaminiHochberg, MonotoneAndDominatesRaw) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(1 + trial % 17);
        for (double& x : p) x = u(rng) * u(rng);
        auto adj = benjamini_hochberg(p);
        std::vector<std::size_t> order(p.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto x, auto y) { return p[x] < p[y]; });
        for (std::size_t i = 0; i < p.size(); ++i) {
            EXPECT_GE(adj[i], p[i]);
            EXPECT_LE(adj[i], 1.0);
        }
        for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LE(adj[order[i - 1]], adj[order[i]]);
    }
}

TEST(McNemar, Examples) {
    EXPECT_NEAR(mcnemar(10, 2).p_value, 158.0 / 4096, 1e-12);
    EXPECT_EQ(mcnemar(10, 2).method, "exact");
    EXPECT_GE(mcnemar(7, 7).p_value, 0.5);
    EXPECT_LE(mcnemar(7, 7).p_value, 1.0);
    EXPECT_THROW(mcnemar(0, 0), StatsError);
}

TEST(McNemar, SwapInvariant) {
    for (std::size_t b = 0; b < 30; b += 3) {
        for (std::size_t c = 1; c < 30; c += 4) {
            EXPECT_DOUBLE_EQ(mcnemar(b, c).p_value, mcnemar(c, b).p_value);
        }
    }
    EXPECT_DOUBLE_EQ(mcnemar(150, 90).p_value, mcnemar(90, 150).p_value);
}

TEST(McNemar, LargeCountsUseChiSquare) {
    auto r = mcnemar(130, 90);
    EXPECT_EQ(r.method, "chi2");
    double chi2 = std::pow(40.0 - 1, 2) / 220;
    EXPECT_NEAR(r.statistic, chi2, 1e-12);
    EXPECT_NEAR(r.p_value, std::erfc(std::sqrt(chi2 / 2)), 1e-12);
}

TEST(NormalSf, KnownValues) {
    EXPECT_NEAR(normal_sf(0), 0.5, 1e-15);
    EXPECT_NEAR(normal_sf(1.959963984540054), 0.025, 1e-12);
}
