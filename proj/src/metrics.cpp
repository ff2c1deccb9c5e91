#include "kgrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "kgrec/errors.hpp"
#include "kgrec/numeric/matrix.hpp"

namespace kgrec::eval {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    numeric::require_shape(scores.size() == labels.size(), "auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of midranks (1-based) of the positives.
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]]) {
                rank_sum += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw SingleClass();
    const double p = static_cast<double>(n_pos);
    const double u = rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(n_neg));
}

double acc(std::span<const double> scores, std::span<const std::uint8_t> labels, double cutoff) {
    numeric::require_shape(scores.size() == labels.size(), "acc: scores and labels differ in length");
    if (scores.empty()) throw EmptyInput();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= cutoff;
        if (predicted == (labels[i] != 0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

namespace {

double dcg(std::span<const double> rel, std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(k, rel.size()); ++i) {
        s += (std::exp2(rel[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    return s;
}

}  // namespace

double ndcg(std::span<const double> ranked_relevances, std::size_t k) {
    if (k == 0) throw InvalidConfig("ndcg: k must be >= 1");
    std::vector<double> ideal(ranked_relevances.begin(), ranked_relevances.end());
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double idcg = dcg(ideal, k);
    if (idcg == 0.0) return 0.0;
    return dcg(ranked_relevances, k) / idcg;
}

std::optional<double> mean_user_ndcg(std::span<const std::uint32_t> users, std::span<const double> scores,
                                     std::span<const std::uint8_t> labels, std::size_t k) {
    numeric::require_shape(users.size() == scores.size() && scores.size() == labels.size(),
                           "ndcg: users, scores and labels differ in length");
    std::map<std::uint32_t, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < users.size(); ++i) rows[users[i]].push_back(i);
    double total = 0.0;
    std::size_t counted = 0;
    for (auto& [user, idx] : rows) {
        if (std::none_of(idx.begin(), idx.end(), [&](std::size_t i) { return labels[i] != 0; })) continue;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        std::vector<double> rel;
        rel.reserve(idx.size());
        for (std::size_t i : idx) rel.push_back(labels[i]);
        total += ndcg(rel, k);
        ++counted;
    }
    if (counted == 0) return std::nullopt;
    return total / static_cast<double>(counted);
}

MetricsReport evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    MetricsReport report;
    report.n_examples = scores.size();
    report.acc = acc(scores, labels);
    const bool has_pos = std::any_of(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; });
    const bool has_neg = std::any_of(labels.begin(), labels.end(), [](std::uint8_t l) { return l == 0; });
    if (has_pos && has_neg) report.auc = auc(scores, labels);
    return report;
}

}  // namespace kgrec::eval
