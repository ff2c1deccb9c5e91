#pragma once

// Ranking and classification metrics over (score, label) pairs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

namespace kgrec::eval {

struct MetricsReport {
    std::optional<double> auc;  // empty when only one class is present
    double acc = 0.0;
    std::optional<double> ndcg;
    std::size_t n_examples = 0;
};

// Rank-sum AUC with midranks for ties. Throws SingleClass / ShapeMismatch.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Fraction of rows with (score >= cutoff) == label. Throws EmptyInput.
double acc(std::span<const double> scores, std::span<const std::uint8_t> labels, double cutoff = 0.5);

// DCG@k / ideal DCG@k with gain 2^rel - 1 and a log2(rank + 1) discount.
// Returns 0 when the ideal DCG is 0.
double ndcg(std::span<const double> ranked_relevances, std::size_t k);

// Mean NDCG@k over users that have at least one positive row; each user's
// rows are ranked by descending score.
std::optional<double> mean_user_ndcg(std::span<const std::uint32_t> users, std::span<const double> scores,
                                     std::span<const std::uint8_t> labels, std::size_t k);

// AUC (when both classes occur) and ACC at 0.5.
MetricsReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace kgrec::eval
