#ifndef MSDE_COMMON_HPP
#define MSDE_COMMON_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace msde {

/// Row-major dense matrix: one sample per row.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

enum class Module { DataIo, KnnGraph, DensityWeights, MeanShift, Scoring, Eval, Tune, Cli };

/// Error category; maps onto CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

constexpr std::string_view module_name(Module m) {
    switch (m) {
        case Module::DataIo: return "data_io";
        case Module::KnnGraph: return "knn_graph";
        case Module::DensityWeights: return "density_weights";
        case Module::MeanShift: return "mean_shift";
        case Module::Scoring: return "scoring";
        case Module::Eval: return "eval";
        case Module::Tune: return "tune";
        case Module::Cli: return "cli";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Module module, ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(module_name(module)) + ": " + detail),
          module_(module),
          kind_(kind),
          detail_(detail) {}

    Module module() const noexcept { return module_; }
    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    Module module_;
    ErrorKind kind_;
    std::string detail_;
};

}  // namespace msde

#endif  // MSDE_COMMON_HPP
