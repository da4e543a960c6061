#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace asap {

enum class Metric { bleu_cn, bleu_dc, rouge_l, meteor, em, es };

std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view name);
/// Comma-separated metric names, "summary" or "completion". Throws ConfigError.
std::vector<Metric> parse_metric_list(std::string_view spec);
std::vector<Metric> summary_metrics();
std::vector<Metric> completion_metrics();

struct MetricScore {
    Metric metric = Metric::bleu_cn;
    double value = 0.0;  ///< in [0, 100]
    std::string candidate_id;

    bool operator==(const MetricScore&) const = default;
};

/// Lowercased words and standalone punctuation characters.
std::vector<std::string> tokenize_summary(std::string_view text);

/// Sentence BLEU-4 with add-one smoothing for n >= 2 and the CodeNN brevity penalty.
double bleu_cn(std::string_view candidate, std::string_view reference);
/// Sentence BLEU-4 with Chen-Cherry smoothing method 4 (k = 5), NLTK semantics.
double bleu_dc(std::string_view candidate, std::string_view reference);
/// LCS F-measure, beta = 1.2.
double rouge_l(std::string_view candidate, std::string_view reference);

struct MeteorParams {
    double alpha = 0.9;
    double beta = 3.0;
    double gamma = 0.5;
};
/// Exact then Porter-stem unigram matching; the alignment with the fewest chunks wins.
double meteor(std::string_view candidate, std::string_view reference, const MeteorParams& params = {});

/// Trim and collapse whitespace runs to one space.
std::string normalize_whitespace(std::string_view s);
double exact_match(std::string_view candidate, std::string_view reference);
/// 100 * (1 - levenshtein / max length) over normalized characters.
double edit_similarity(std::string_view candidate, std::string_view reference);
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Porter (1980) suffix stripping on a lowercase word.
std::string porter_stem(std::string_view word);

/// Throws MetricError for an empty reference (summary metrics).
double compute_metric(Metric m, std::string_view candidate, std::string_view reference);

/// Mean value per metric.
std::map<Metric, double> aggregate(const std::vector<MetricScore>& scores);

}  // namespace asap
