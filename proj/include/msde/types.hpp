#ifndef MSDE_TYPES_HPP
#define MSDE_TYPES_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msde/common.hpp"

namespace msde {

/// n samples of dimension d with stable row identifiers and optional 0/1 labels
/// (0 = normal, 1 = anomalous). All pipeline arithmetic is in double.
struct EmbeddingMatrix {
    RowMatrix<double> values;
    std::vector<std::string> row_ids;
    std::optional<std::vector<int>> labels;

    Index n_samples() const { return values.rows(); }
    Index dim() const { return values.cols(); }
    bool empty() const { return values.rows() == 0; }

    /// Throws Error(DataIo) on non-finite values, duplicate ids or bad labels.
    /// Zero rows are accepted only when allow_empty is set.
    void validate(bool allow_empty = false) const;

    /// Wraps raw values; ids become prefix + row index.
    static EmbeddingMatrix from_values(RowMatrix<double> values, const std::string& id_prefix = "");

    EmbeddingMatrix select_rows(std::span<const Index> rows) const;
    EmbeddingMatrix with_values(RowMatrix<double> new_values) const;
};

/// Stacks a over b. Ids are namespaced with the given prefixes so the union stays unique.
EmbeddingMatrix concat_rows(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                            const std::string& prefix_a, const std::string& prefix_b);

/// One-class split: train holds normals only, test carries labels.
struct DatasetSplit {
    EmbeddingMatrix train;
    EmbeddingMatrix test;

    void validate() const;
};

struct MetricResult {
    double auc = 0.0;
    double ap = 0.0;
    Index n_pos = 0;
    Index n_neg = 0;
};

/// Per-test-sample scores in test-matrix row order.
struct ScoreReport {
    std::vector<std::string> row_ids;
    std::vector<int> labels;
    std::vector<double> raw;
    std::vector<double> normalized;
    std::optional<MetricResult> metrics;
};

}  // namespace msde

#endif  // MSDE_TYPES_HPP
