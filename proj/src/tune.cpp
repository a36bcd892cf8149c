#include "msde/tune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "msde/logging.hpp"
#include "msde/pipeline.hpp"

namespace msde {

bool SearchSpace::contains(const ShiftParams& p) const {
    return p.k >= k_min && p.k <= k_max && p.t_nbd >= t_nbd_min && p.t_nbd <= t_nbd_max && p.eta >= eta_min &&
           p.eta <= eta_max && p.max_iters >= max_iters_min && p.max_iters <= max_iters_max && p.tol >= tol_min &&
           p.tol <= tol_max;
}

ShiftParams sample_params(const SearchSpace& space, const ShiftParams& base, std::mt19937_64& rng) {
    ShiftParams p = base;
    p.k = std::uniform_int_distribution<Index>(space.k_min, space.k_max)(rng);
    p.t_nbd = std::uniform_int_distribution<Index>(space.t_nbd_min, space.t_nbd_max)(rng);
    p.eta = std::uniform_real_distribution<double>(space.eta_min, space.eta_max)(rng);
    p.max_iters = std::uniform_int_distribution<Index>(space.max_iters_min, space.max_iters_max)(rng);
    const double log_tol =
        std::uniform_real_distribution<double>(std::log(space.tol_min), std::log(space.tol_max))(rng);
    p.tol = std::clamp(std::exp(log_tol), space.tol_min, space.tol_max);
    return p;
}

namespace {

std::vector<Index> shuffled(Index n, std::mt19937_64& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

std::vector<Index> sorted_range(const std::vector<Index>& v, std::size_t begin, std::size_t end) {
    std::vector<Index> out(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

DatasetSplit LeakageSplit::validation_split() const {
    DatasetSplit v;
    v.train = fit_train;
    EmbeddingMatrix normals = val_normals;
    normals.labels = std::vector<int>(normals.row_ids.size(), 0);
    v.test = concat_rows(normals, val_anomalies, "train/", "test/");
    return v;
}

LeakageSplit make_leakage_split(const DatasetSplit& split, std::uint64_t seed) {
    split.validate();
    const auto& labels = split.test.labels.value_or(std::vector<int>{});
    std::vector<Index> anomalies;
    std::vector<Index> test_normals;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? anomalies : test_normals).push_back(static_cast<Index>(i));
    const Index n_train = split.train.n_samples();
    const auto n_anom = static_cast<Index>(anomalies.size());
    if (n_train < kMinLeakageNormals || n_anom < kMinLeakageAnomalies)
        throw Error(Module::Tune, ErrorKind::Data,
                    fmt::format("zero-leakage split needs >= {} train normals and >= {} test anomalies "
                                "(have {} and {})",
                                kMinLeakageNormals, kMinLeakageAnomalies, n_train, n_anom));

    std::mt19937_64 rng(seed);
    const auto train_order = shuffled(n_train, rng);
    const auto n_val_normals = static_cast<std::size_t>(n_train / 5);
    const auto anom_order = shuffled(n_anom, rng);
    const auto n_val_anom = static_cast<std::size_t>(n_anom / 10);

    LeakageSplit s;
    s.val_normals = split.train.select_rows(sorted_range(train_order, 0, n_val_normals));
    s.fit_train = split.train.select_rows(sorted_range(train_order, n_val_normals, train_order.size()));

    std::vector<Index> val_anom_rows;
    std::vector<Index> final_rows = test_normals;
    for (std::size_t r = 0; r < anom_order.size(); ++r) {
        const Index row = anomalies[static_cast<std::size_t>(anom_order[r])];
        (r < n_val_anom ? val_anom_rows : final_rows).push_back(row);
    }
    std::sort(val_anom_rows.begin(), val_anom_rows.end());
    std::sort(final_rows.begin(), final_rows.end());
    s.val_anomalies = split.test.select_rows(val_anom_rows);
    s.final_test.train = split.train;
    s.final_test.test = split.test.select_rows(final_rows);
    return s;
}

SearchResult random_search(const DatasetSplit& split, const SearchSpace& space, const SearchOptions& options) {
    if (options.n_trials < 1)
        throw Error(Module::Tune, ErrorKind::Usage, fmt::format("n_trials must be >= 1, got {}", options.n_trials));
    const auto leakage = make_leakage_split(split, options.seed);
    const auto validation = leakage.validation_split();

    SearchResult result;
    for (Index t = 0; t < options.n_trials; ++t) {
        TrialRecord rec;
        rec.trial_index = t;
        rec.seed = options.seed + static_cast<std::uint64_t>(t);
        if (options.sampler) {
            rec.params = options.sampler(t, rec.seed);
        } else {
            std::mt19937_64 rng(rec.seed);
            rec.params = sample_params(space, options.base.shift, rng);
        }
        MsdeConfig config = options.base;
        config.shift = rec.params;
        if (options.on_pipeline_call) options.on_pipeline_call(SearchPhase::Trial, validation);
        try {
            const auto report = score_pipeline(validation, config);
            rec.val_auc = report.metrics->auc;
            rec.val_ap = report.metrics->ap;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Numeric) throw;
            logger()->warn("trial {} failed: {}", t, e.what());
        }
        logger()->info("trial {}: val auc {:.6f}", t, rec.val_auc);
        result.trials.push_back(rec);
    }

    const TrialRecord* best = nullptr;
    for (const auto& rec : result.trials)
        if (rec.val_auc >= 0.0 && (best == nullptr || rec.val_auc > best->val_auc)) best = &rec;
    if (best == nullptr) throw Error(Module::Tune, ErrorKind::Numeric, "every trial failed");
    result.best = *best;

    MsdeConfig final_config = options.base;
    final_config.shift = result.best.params;
    if (options.on_pipeline_call) options.on_pipeline_call(SearchPhase::Final, leakage.final_test);
    result.final_report = score_pipeline(leakage.final_test, final_config);
    result.final_metrics = *result.final_report.metrics;
    return result;
}

namespace {

nlohmann::ordered_json trial_json(const TrialRecord& t) {
    nlohmann::ordered_json j;
    j["trial_index"] = t.trial_index;
    j["seed"] = t.seed;
    j["k"] = t.params.k;
    j["t_nbd"] = t.params.t_nbd;
    j["eta"] = t.params.eta;
    j["max_iters"] = t.params.max_iters;
    j["tol"] = t.params.tol;
    j["val_auc"] = t.val_auc;
    j["val_ap"] = t.val_ap;
    return j;
}

}  // namespace

std::string trial_to_json(const TrialRecord& t) { return trial_json(t).dump(); }

std::string summary_to_json(const SearchResult& r) {
    nlohmann::ordered_json j;
    j["summary"] = true;
    j["n_trials"] = r.trials.size();
    j["best"] = trial_json(r.best);
    j["final_auc"] = r.final_metrics.auc;
    j["final_ap"] = r.final_metrics.ap;
    j["final_n_pos"] = r.final_metrics.n_pos;
    j["final_n_neg"] = r.final_metrics.n_neg;
    return j.dump();
}

void save_trials_jsonl(const std::filesystem::path& path, const SearchResult& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Module::Tune, ErrorKind::Data, fmt::format("cannot write '{}'", path.string()));
    for (const auto& t : r.trials) out << trial_to_json(t) << '\n';
    out << summary_to_json(r) << '\n';
}

void save_trials_csv(const std::filesystem::path& path, const SearchResult& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Module::Tune, ErrorKind::Data, fmt::format("cannot write '{}'", path.string()));
    out << "trial_index,seed,k,t_nbd,eta,max_iters,tol,val_auc,val_ap\n";
    for (const auto& t : r.trials)
        out << fmt::format("{},{},{},{},{:.17g},{},{:.17g},{:.17g},{:.17g}\n", t.trial_index, t.seed, t.params.k,
                           t.params.t_nbd, t.params.eta, t.params.max_iters, t.params.tol, t.val_auc, t.val_ap);
}

}  // namespace msde
