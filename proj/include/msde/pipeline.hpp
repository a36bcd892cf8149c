#ifndef MSDE_PIPELINE_HPP
#define MSDE_PIPELINE_HPP

#include <filesystem>
#include <optional>

#include "msde/config.hpp"
#include "msde/data_io.hpp"
#include "msde/mean_shift.hpp"
#include "msde/scoring.hpp"
#include "msde/types.hpp"

namespace msde {

struct PipelineResult {
    ScoreReport report;
    GaussianScorer<double> scorer;
    std::optional<Standardizer> standardizer;
    JointShiftResult shift;
    RowMatrix<double> test_shifted;  // the rows the scorer was applied to
};

/// Hooks for tracing a run. Both are optional.
struct PipelineObservers {
    ShiftObserver solo;
    ShiftObserver joint;
};

/// standardize (train statistics) -> joint shift -> PCA and Gaussian on the solo-shifted
/// train rows -> Mahalanobis of the joint-shifted test rows -> logistic normalization.
/// Metrics are filled in when the test set holds both classes.
PipelineResult run_pipeline(const DatasetSplit& split, const MsdeConfig& config,
                            const PipelineObservers& observers = {});

inline ScoreReport score_pipeline(const DatasetSplit& split, const MsdeConfig& config) {
    return run_pipeline(split, config).report;
}

/// JSON bundle holding the basis, Gaussian and config. Reloading reproduces scores bit-exactly.
void save_model(const std::filesystem::path& path, const GaussianScorer<double>& scorer, const MsdeConfig& config,
                const std::optional<Standardizer>& standardizer = std::nullopt);

struct LoadedModel {
    GaussianScorer<double> scorer;
    MsdeConfig config;
    std::optional<Standardizer> standardizer;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace msde

#endif  // MSDE_PIPELINE_HPP
