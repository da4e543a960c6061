#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace asap {

enum class PairedTest { wilcoxon_one_sided, mcnemar };

std::string_view to_string(PairedTest t) noexcept;

struct PairedTestResult {
    PairedTest test = PairedTest::wilcoxon_one_sided;
    double statistic = 0.0;  ///< W+ for Wilcoxon, min(b, c) or chi-square for McNemar
    double p_value = 1.0;
    std::size_t n_effective = 0;
    std::string method;  ///< "exact" or "normal" / "chi2"
};

enum class WilcoxonMethod { automatic, exact, normal };

inline constexpr std::size_t kWilcoxonExactMaxN = 25;
inline constexpr std::size_t kMcNemarExactMaxN = 200;

/// H1: a tends to exceed b. Zero differences are dropped and ties get mid-ranks.
/// Throws StatsError on length mismatch or fewer than 5 nonzero differences.
PairedTestResult wilcoxon_one_sided(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMethod method = WilcoxonMethod::automatic);

/// b = baseline-only successes, c = treatment-only successes. Two-sided.
PairedTestResult mcnemar(std::size_t b, std::size_t c);

/// Step-up adjusted p-values in input order.
std::vector<double> benjamini_hochberg(const std::vector<double>& p_values);

/// Standard normal upper tail.
double normal_sf(double z);

}  // namespace asap
