#include "msde/pipeline.hpp"

#include <fstream>

#include <json.hpp>

#include "msde/eval.hpp"
#include "msde/logging.hpp"

namespace msde {

PipelineResult run_pipeline(const DatasetSplit& input, const MsdeConfig& config, const PipelineObservers& observers) {
    config.validate();
    input.validate();

    PipelineResult r;
    DatasetSplit split = input;
    if (config.standardize) {
        r.standardizer = fit_standardizer(split.train);
        split.train = apply_standardizer(*r.standardizer, split.train);
        if (!split.test.empty()) split.test = apply_standardizer(*r.standardizer, split.test);
    }

    r.shift = joint_shift(split, config.shift, /*skip_solo=*/config.fit_on_joint, observers.solo, observers.joint);
    const RowMatrix<double> fit_rows = config.fit_on_joint
                                           ? RowMatrix<double>(r.shift.joint.points.values.topRows(split.train.n_samples()))
                                           : r.shift.train_solo.points.values;

    r.scorer.basis = fit_pca(fit_rows, config.pca_dim);
    r.scorer.gaussian = fit_gaussian(project(r.scorer.basis, fit_rows), config.lambda);

    r.test_shifted = r.shift.test_shifted.values;
    auto& report = r.report;
    report.row_ids = split.test.row_ids;
    report.labels = split.test.labels.value_or(std::vector<int>{});
    report.raw = r.scorer.score(r.test_shifted);
    report.normalized = normalize_scores(report.raw);

    const auto positives = std::count(report.labels.begin(), report.labels.end(), 1);
    if (positives > 0 && positives < static_cast<std::ptrdiff_t>(report.labels.size()))
        report.metrics = evaluate(report.raw, report.labels);
    else if (!report.labels.empty())
        logger()->warn("test set holds a single class; metrics not computed");
    return r;
}

namespace {

using nlohmann::json;

template <typename Derived>
json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

template <typename Derived>
json vector_to_json(const Eigen::MatrixBase<Derived>& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

[[noreturn]] void bundle_error(const std::string& msg) { throw Error(Module::Scoring, ErrorKind::Data, msg); }

Vector<double> json_to_vector(const json& j) {
    Vector<double> v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

template <typename MatrixType>
MatrixType json_to_matrix(const json& j) {
    const auto rows = static_cast<Index>(j.size());
    const auto cols = rows > 0 ? static_cast<Index>(j[0].size()) : Index{0};
    MatrixType m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (static_cast<Index>(row.size()) != cols) bundle_error("ragged matrix in model bundle");
        for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

}  // namespace

void save_model(const std::filesystem::path& path, const GaussianScorer<double>& scorer, const MsdeConfig& config,
                const std::optional<Standardizer>& standardizer) {
    json j;
    j["format"] = "msde-gaussian-scorer";
    j["version"] = 1;
    j["config"] = config_to_text(config);
    j["center"] = vector_to_json(scorer.basis.center);
    j["components"] = matrix_to_json(scorer.basis.components);
    j["explained_variance"] = vector_to_json(scorer.basis.explained_variance);
    j["mu"] = vector_to_json(scorer.gaussian.mu);
    j["sigma"] = matrix_to_json(scorer.gaussian.sigma);
    j["precision"] = matrix_to_json(scorer.gaussian.precision);
    j["lambda"] = scorer.gaussian.lambda;
    if (standardizer) {
        j["standardizer"]["mean"] = vector_to_json(standardizer->mean);
        j["standardizer"]["std"] = vector_to_json(standardizer->std);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Module::Scoring, ErrorKind::Data, "cannot write model bundle '" + path.string() + "'");
    out << j.dump(1) << '\n';
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) bundle_error("cannot read model bundle '" + path.string() + "'");
    json j;
    try {
        in >> j;
        if (j.at("format") != "msde-gaussian-scorer" || j.at("version") != 1)
            bundle_error("'" + path.string() + "' is not a version-1 msde model bundle");
        LoadedModel m;
        apply_config_text(m.config, j.at("config").get<std::string>());
        m.scorer.basis.center = json_to_vector(j.at("center"));
        m.scorer.basis.components = json_to_matrix<RowMatrix<double>>(j.at("components"));
        m.scorer.basis.explained_variance = json_to_vector(j.at("explained_variance"));
        m.scorer.gaussian.mu = json_to_vector(j.at("mu"));
        m.scorer.gaussian.sigma = json_to_matrix<GaussianModel<double>::Dense>(j.at("sigma"));
        m.scorer.gaussian.lambda = j.at("lambda").get<double>();
        m.scorer.gaussian.refactor();
        if (j.contains("standardizer"))
            m.standardizer = Standardizer{json_to_vector(j["standardizer"].at("mean")),
                                          json_to_vector(j["standardizer"].at("std"))};
        return m;
    } catch (const json::exception& e) {
        bundle_error("malformed model bundle '" + path.string() + "': " + e.what());
    }
}

}  // namespace msde
