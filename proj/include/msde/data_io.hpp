#ifndef MSDE_DATA_IO_HPP
#define MSDE_DATA_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "msde/types.hpp"

namespace msde {

enum class FileFormat { Npy, Csv };

/// Picks the format from the file extension (.npy, otherwise CSV).
FileFormat format_from_path(const std::filesystem::path& path);

/// Loads a 2-D embedding matrix.
///
/// CSV: comma separated, optional header row (detected when any cell of the first row
/// is non-numeric). A header column named `row_id` supplies identifiers and a column
/// named `label` supplies labels; all other columns are features. Without ids the rows
/// are numbered "0", "1", ...
///
/// NPY: version 1.0, C order, `<f4` or `<f8`, 2-D. Values are widened to double.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, FileFormat format);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

/// Writes NPY v1.0, `<f8`, C order.
void save_npy(const std::filesystem::path& path, const RowMatrix<double>& values);

/// Writes `row_id,f0,...,f{d-1}[,label]` with 17 significant digits.
void save_csv(const std::filesystem::path& path, const EmbeddingMatrix& m);

/// Sidecar label file `row_id,label`.
std::vector<std::pair<std::string, int>> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const EmbeddingMatrix& m);

/// Assigns labels by row id. Every row must be covered and every id must exist.
void attach_labels(EmbeddingMatrix& m, const std::vector<std::pair<std::string, int>>& labels);

// ---------------------------------------------------------------------------
// Standardization

/// Standard deviations below this are replaced by 1 so constant features pass through.
inline constexpr double kStdFloor = 1e-8;

struct Standardizer {
    Vector<double> mean;
    Vector<double> std;

    Index dim() const { return mean.size(); }
};

/// Column means and sample (n-1) standard deviations of the training rows.
Standardizer fit_standardizer(const EmbeddingMatrix& train);
EmbeddingMatrix apply_standardizer(const Standardizer& s, const EmbeddingMatrix& x);

// ---------------------------------------------------------------------------
// Synthetic blobs

struct BlobSpec {
    Index dim = 32;
    Index n_train = 500;
    Index n_test_normal = 100;
    Index n_test_anomalous = 100;
    double anomaly_offset = 2.5;
    double noise_scale = 1.0;
};

/// Normals ~ N(0, noise^2 I); anomalies ~ N(offset * e_1, noise^2 I).
/// Train ids are "train-<i>", test ids "test-<i>"; test normals come first.
/// Pure function of (spec, seed).
DatasetSplit generate_synthetic(const BlobSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Score files

/// CSV `row_id,label,raw_score,normalized_score`, 17 significant digits.
void save_scores(const ScoreReport& report, const std::filesystem::path& path);
ScoreReport load_scores(const std::filesystem::path& path);

}  // namespace msde

#endif  // MSDE_DATA_IO_HPP
