#ifndef MSDE_EVAL_HPP
#define MSDE_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "msde/common.hpp"
#include "msde/types.hpp"

namespace msde {

namespace detail {

struct ClassCounts {
    std::int64_t pos = 0;
    std::int64_t neg = 0;
};

template <typename Scalar>
ClassCounts check_metric_inputs(std::span<const Scalar> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw Error(Module::Eval, ErrorKind::Data,
                    fmt::format("{} scores but {} labels", scores.size(), labels.size()));
    ClassCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i]))
            throw Error(Module::Eval, ErrorKind::Data, fmt::format("score {} is not finite", i));
        if (labels[i] == 1) ++c.pos;
        else if (labels[i] == 0) ++c.neg;
        else throw Error(Module::Eval, ErrorKind::Data, fmt::format("label {} is {}, expected 0 or 1", i, labels[i]));
    }
    return c;
}

/// Indices ordered by score; equal scores end up adjacent.
template <typename Scalar>
std::vector<std::size_t> order_by_score(std::span<const Scalar> scores, bool descending) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    return order;
}

}  // namespace detail

/// Area under the ROC curve as the Mann-Whitney statistic with half credit for ties.
/// Sort-based, O(n log n); the pair count is accumulated exactly in integers.
template <typename Scalar>
double auc_roc(std::span<const Scalar> scores, std::span<const int> labels) {
    const auto counts = detail::check_metric_inputs(scores, labels);
    if (counts.pos == 0 || counts.neg == 0)
        throw Error(Module::Eval, ErrorKind::Data,
                    fmt::format("AUC needs both classes (positives={}, negatives={})", counts.pos, counts.neg));
    const auto order = detail::order_by_score(scores, /*descending=*/false);
    std::int64_t twice_wins = 0;  // 2 * (wins + ties / 2)
    std::int64_t neg_below = 0;
    for (std::size_t b = 0; b < order.size();) {
        std::size_t e = b;
        std::int64_t p = 0;
        std::int64_t q = 0;
        while (e < order.size() && scores[order[e]] == scores[order[b]]) {
            (labels[order[e]] == 1 ? p : q) += 1;
            ++e;
        }
        twice_wins += p * (2 * neg_below + q);
        neg_below += q;
        b = e;
    }
    return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(counts.pos) * static_cast<double>(counts.neg));
}

/// Average precision: sum over the descending ranking of (R_k - R_{k-1}) * P_k, with each
/// block of tied scores treated as one step so the result does not depend on input order.
template <typename Scalar>
double average_precision(std::span<const Scalar> scores, std::span<const int> labels) {
    const auto counts = detail::check_metric_inputs(scores, labels);
    if (counts.pos == 0) throw Error(Module::Eval, ErrorKind::Data, "average precision needs at least one positive");
    const auto order = detail::order_by_score(scores, /*descending=*/true);
    double ap = 0.0;
    std::int64_t tp = 0;
    std::int64_t seen = 0;
    for (std::size_t b = 0; b < order.size();) {
        std::size_t e = b;
        std::int64_t p = 0;
        while (e < order.size() && scores[order[e]] == scores[order[b]]) {
            if (labels[order[e]] == 1) ++p;
            ++e;
        }
        tp += p;
        seen += static_cast<std::int64_t>(e - b);
        ap += static_cast<double>(p) * (static_cast<double>(tp) / static_cast<double>(seen));
        b = e;
    }
    return ap / static_cast<double>(counts.pos);
}

template <typename Scalar>
MetricResult evaluate(std::span<const Scalar> scores, std::span<const int> labels) {
    MetricResult r;
    r.auc = auc_roc(scores, labels);
    r.ap = average_precision(scores, labels);
    const auto counts = detail::check_metric_inputs(scores, labels);
    r.n_pos = counts.pos;
    r.n_neg = counts.neg;
    return r;
}

template <typename Scalar>
double auc_roc(const std::vector<Scalar>& scores, const std::vector<int>& labels) {
    return auc_roc(std::span<const Scalar>(scores), std::span<const int>(labels));
}
template <typename Scalar>
double average_precision(const std::vector<Scalar>& scores, const std::vector<int>& labels) {
    return average_precision(std::span<const Scalar>(scores), std::span<const int>(labels));
}
template <typename Scalar>
MetricResult evaluate(const std::vector<Scalar>& scores, const std::vector<int>& labels) {
    return evaluate(std::span<const Scalar>(scores), std::span<const int>(labels));
}

/// {"auc": ..., "ap": ..., "n_pos": ..., "n_neg": ...} with six decimals.
inline std::string metrics_json(const MetricResult& m) {
    return fmt::format("{{\"auc\": {:.6f}, \"ap\": {:.6f}, \"n_pos\": {}, \"n_neg\": {}}}", m.auc, m.ap, m.n_pos,
                       m.n_neg);
}

}  // namespace msde

#endif  // MSDE_EVAL_HPP
