#ifndef MSDE_TUNE_HPP
#define MSDE_TUNE_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "msde/config.hpp"
#include "msde/types.hpp"

namespace msde {

/// Ranges for the five shift hyperparameters. tol is log-uniform, the rest uniform.
struct SearchSpace {
    Index k_min = 5, k_max = 60;
    Index t_nbd_min = 3, t_nbd_max = 80;
    double eta_min = 0.01, eta_max = 0.5;
    Index max_iters_min = 3, max_iters_max = 12;
    double tol_min = 1e-4, tol_max = 0.05;

    bool contains(const ShiftParams& p) const;
};

/// Draws the five searched parameters; everything else is copied from base.
ShiftParams sample_params(const SearchSpace& space, const ShiftParams& base, std::mt19937_64& rng);

/// Zero-leakage partition. Validation uses 20% of train normals and 10% of test anomalies
/// (floors); the remaining test rows form final_test, which the search never sees.
struct LeakageSplit {
    EmbeddingMatrix fit_train;
    EmbeddingMatrix val_normals;
    EmbeddingMatrix val_anomalies;
    DatasetSplit final_test;  // train = all train normals, test = remaining test rows

    /// fit_train as train; val normals then val anomalies as a labelled test set,
    /// ids prefixed with "train/" and "test/".
    DatasetSplit validation_split() const;
};

inline constexpr Index kMinLeakageNormals = 5;
inline constexpr Index kMinLeakageAnomalies = 10;

LeakageSplit make_leakage_split(const DatasetSplit& split, std::uint64_t seed);

struct TrialRecord {
    Index trial_index = 0;
    ShiftParams params;
    double val_auc = -1.0;  // -1 marks a numerically failed trial
    double val_ap = -1.0;
    std::uint64_t seed = 0;
};

enum class SearchPhase { Trial, Final };

struct SearchOptions {
    Index n_trials = 80;
    std::uint64_t seed = 0;
    MsdeConfig base;  // fixed settings (lambda, pca_dim, k_umap, ...)
    /// Sees every split handed to the pipeline.
    std::function<void(SearchPhase, const DatasetSplit&)> on_pipeline_call;
    /// Replaces sample_params when set; receives (trial index, trial seed).
    std::function<ShiftParams(Index, std::uint64_t)> sampler;
};

struct SearchResult {
    TrialRecord best;
    std::vector<TrialRecord> trials;
    MetricResult final_metrics;
    ScoreReport final_report;
};

/// Random search over the space on the validation split of one LeakageSplit, maximizing
/// validation AUC (ties to the lowest trial index). The winner is refit on all train normals
/// and evaluated once on final_test. Trial i samples with seed + i.
SearchResult random_search(const DatasetSplit& split, const SearchSpace& space, const SearchOptions& options);

std::string trial_to_json(const TrialRecord& t);
std::string summary_to_json(const SearchResult& r);

/// trials.jsonl: one record per line, then the summary object.
void save_trials_jsonl(const std::filesystem::path& path, const SearchResult& r);
void save_trials_csv(const std::filesystem::path& path, const SearchResult& r);

}  // namespace msde

#endif  // MSDE_TUNE_HPP
