#include "msde/types.hpp"

#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

namespace msde {

void EmbeddingMatrix::validate(bool allow_empty) const {
    if (!allow_empty && n_samples() < 1)
        throw Error(Module::DataIo, ErrorKind::Data, "embedding matrix has no rows");
    if (dim() < 1) throw Error(Module::DataIo, ErrorKind::Data, "embedding matrix has dimension 0");
    if (static_cast<Index>(row_ids.size()) != n_samples())
        throw Error(Module::DataIo, ErrorKind::Data,
                    fmt::format("{} row ids for {} rows", row_ids.size(), n_samples()));
    for (Index i = 0; i < n_samples(); ++i)
        for (Index j = 0; j < dim(); ++j)
            if (!std::isfinite(values(i, j)))
                throw Error(Module::DataIo, ErrorKind::Data,
                            fmt::format("non-finite value at row {}, column {}", i, j));
    std::unordered_set<std::string> seen;
    for (const auto& id : row_ids)
        if (!seen.insert(id).second)
            throw Error(Module::DataIo, ErrorKind::Data, fmt::format("duplicate row id '{}'", id));
    if (labels) {
        if (static_cast<Index>(labels->size()) != n_samples())
            throw Error(Module::DataIo, ErrorKind::Data,
                        fmt::format("{} labels for {} rows", labels->size(), n_samples()));
        for (std::size_t i = 0; i < labels->size(); ++i)
            if ((*labels)[i] != 0 && (*labels)[i] != 1)
                throw Error(Module::DataIo, ErrorKind::Data,
                            fmt::format("label at row {} is {}, expected 0 or 1", i, (*labels)[i]));
    }
}

EmbeddingMatrix EmbeddingMatrix::from_values(RowMatrix<double> values, const std::string& id_prefix) {
    EmbeddingMatrix m;
    m.row_ids.reserve(static_cast<std::size_t>(values.rows()));
    for (Index i = 0; i < values.rows(); ++i) m.row_ids.push_back(id_prefix + std::to_string(i));
    m.values = std::move(values);
    return m;
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const Index> rows) const {
    EmbeddingMatrix out;
    out.values.resize(static_cast<Index>(rows.size()), dim());
    out.row_ids.reserve(rows.size());
    if (labels) out.labels.emplace().reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Index src = rows[r];
        out.values.row(static_cast<Index>(r)) = values.row(src);
        out.row_ids.push_back(row_ids[static_cast<std::size_t>(src)]);
        if (labels) out.labels->push_back((*labels)[static_cast<std::size_t>(src)]);
    }
    return out;
}

EmbeddingMatrix EmbeddingMatrix::with_values(RowMatrix<double> new_values) const {
    EmbeddingMatrix out{std::move(new_values), row_ids, labels};
    return out;
}

EmbeddingMatrix concat_rows(const EmbeddingMatrix& a, const EmbeddingMatrix& b,
                            const std::string& prefix_a, const std::string& prefix_b) {
    if (a.dim() != b.dim())
        throw Error(Module::DataIo, ErrorKind::Data,
                    fmt::format("cannot stack dimension {} with dimension {}", a.dim(), b.dim()));
    EmbeddingMatrix out;
    out.values.resize(a.n_samples() + b.n_samples(), a.dim());
    out.values.topRows(a.n_samples()) = a.values;
    out.values.bottomRows(b.n_samples()) = b.values;
    out.row_ids.reserve(a.row_ids.size() + b.row_ids.size());
    for (const auto& id : a.row_ids) out.row_ids.push_back(prefix_a + id);
    for (const auto& id : b.row_ids) out.row_ids.push_back(prefix_b + id);
    if (a.labels || b.labels) {
        auto& l = out.labels.emplace();
        l = a.labels.value_or(std::vector<int>(a.row_ids.size(), 0));
        const auto lb = b.labels.value_or(std::vector<int>(b.row_ids.size(), 0));
        l.insert(l.end(), lb.begin(), lb.end());
    }
    return out;
}

void DatasetSplit::validate() const {
    train.validate();
    test.validate(/*allow_empty=*/true);
    if (train.dim() != test.dim())
        throw Error(Module::DataIo, ErrorKind::Data,
                    fmt::format("train dimension {} does not match test dimension {}", train.dim(),
                                test.dim()));
    if (train.labels)
        for (std::size_t i = 0; i < train.labels->size(); ++i)
            if ((*train.labels)[i] != 0)
                throw Error(Module::DataIo, ErrorKind::Data,
                            fmt::format("train row '{}' is labelled anomalous; training is one-class",
                                        train.row_ids[i]));
    if (!test.empty() && !test.labels)
        throw Error(Module::DataIo, ErrorKind::Data, "test set has no labels");
}

}  // namespace msde
