#include "cli.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "msde/data_io.hpp"
#include "msde/eval.hpp"
#include "msde/parallel.hpp"
#include "msde/pipeline.hpp"
#include "msde/tune.hpp"

namespace msde::cli {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Module::Cli, ErrorKind::Data, fmt::format("cannot read '{}'", path.string()));
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

namespace {

/// Flags shared by run and tune: inputs plus one override per config key.
struct PipelineFlags {
    std::string train;
    std::string test;
    std::string labels;
    std::string config;
    std::string out;
    bool no_shift = false;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    CLI::Option* fit_on_joint = nullptr;
    CLI::Option* static_graph = nullptr;

    void attach(CLI::App* app) {
        app->add_option("--train", train, "Training embeddings (.npy or .csv), normals only")->required();
        app->add_option("--test", test, "Test embeddings (.npy or .csv)")->required();
        app->add_option("--labels", labels, "Sidecar CSV row_id,label for the test set");
        app->add_option("--config", config, "key = value config file; flags override it");
        app->add_option("--out", out, "Output directory")->required();
        app->add_flag("--no-shift", no_shift, "Skip the mean shift (max_iters = 0)");
        for (const auto& key : config_keys()) {
            if (key == "fit_on_joint" || key == "static_graph") continue;
            std::string flag = "--" + key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            options[key] = app->add_option(flag, values[key], "Override config '" + key + "'");
        }
        fit_on_joint = app->add_flag("--fit-on-joint", "Fit the Gaussian on the joint-shifted train rows");
        static_graph = app->add_flag("--static-graph", "Reuse the first k-NN graph across shift iterations");
    }

    MsdeConfig resolve() const {
        MsdeConfig c;
        if (!config.empty()) apply_config_file(c, config);
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) set_config_value(c, key, values.at(key));
        if (fit_on_joint->count() > 0) c.fit_on_joint = true;
        if (static_graph->count() > 0) c.shift.static_graph = true;
        if (no_shift) c.shift.max_iters = 0;
        c.validate();
        return c;
    }

    DatasetSplit load_split() const {
        DatasetSplit split;
        split.train = load_embeddings(train);
        split.test = load_embeddings(test);
        if (!labels.empty()) attach_labels(split.test, load_labels(labels));
        split.validate();
        return split;
    }

    std::string provenance() const {
        std::string s;
        s += fmt::format("# train = {}\n# train_sha256 = {}\n", train, sha256_file(train));
        s += fmt::format("# test = {}\n# test_sha256 = {}\n", test, sha256_file(test));
        if (!labels.empty()) s += fmt::format("# labels = {}\n# labels_sha256 = {}\n", labels, sha256_file(labels));
        return s;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(Module::Cli, ErrorKind::Data, fmt::format("cannot write '{}'", path.string()));
    out << text;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Module::Cli, ErrorKind::Data, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

int cmd_run(const PipelineFlags& f, bool dump_weights, std::ostream& out) {
    const MsdeConfig config = f.resolve();
    set_num_threads(config.threads);
    const auto split = f.load_split();
    const fs::path dir(f.out);
    ensure_dir(dir);

    std::string trace;
    PipelineObservers observers;
    observers.solo = [&](Index t, double d) { trace += fmt::format("solo {} {:.17g}\n", t, d); };
    observers.joint = [&](Index t, double d) { trace += fmt::format("joint {} {:.17g}\n", t, d); };
    const auto result = run_pipeline(split, config, observers);

    save_scores(result.report, dir / "scores.csv");
    if (result.report.metrics) write_text(dir / "metrics.json", metrics_json(*result.report.metrics) + "\n");
    write_text(dir / "config_echo.txt", config_to_text(config) + f.provenance());
    write_text(dir / "shift_trace.log", trace);
    save_model(dir / "model.json", result.scorer, config, result.standardizer);
    if (dump_weights && result.shift.joint.weights_used) {
        const auto& w = result.shift.joint.weights_used->weights;
        std::string csv = "row_id,weight\n";
        for (Index i = 0; i < w.size(); ++i)
            csv += fmt::format("{},{:.17g}\n", result.shift.joint.points.row_ids[static_cast<std::size_t>(i)], w(i));
        write_text(dir / "weights.csv", csv);
    }
    if (result.report.metrics) out << metrics_json(*result.report.metrics) << '\n';
    return 0;
}

int cmd_tune(const PipelineFlags& f, Index trials, std::ostream& out) {
    SearchOptions opts;
    opts.base = f.resolve();
    opts.seed = opts.base.seed;
    opts.n_trials = trials;
    set_num_threads(opts.base.threads);
    const auto split = f.load_split();
    const fs::path dir(f.out);
    ensure_dir(dir);

    const auto result = random_search(split, SearchSpace{}, opts);
    save_trials_jsonl(dir / "trials.jsonl", result);
    save_trials_csv(dir / "trials.csv", result);
    MsdeConfig best = opts.base;
    best.shift = result.best.params;
    write_text(dir / "best_params.txt", config_to_text(best));
    write_text(dir / "metrics.json", metrics_json(result.final_metrics) + "\n");
    write_text(dir / "config_echo.txt",
               config_to_text(opts.base) + fmt::format("# trials = {}\n", trials) + f.provenance());
    out << summary_to_json(result) << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-shift density enhancement for one-class anomaly detection on embeddings", "msde"};
    app.require_subcommand(1);

    PipelineFlags run_flags;
    bool dump_weights = false;
    auto* run_cmd = app.add_subcommand("run", "Shift, fit and score a train/test split");
    run_flags.attach(run_cmd);
    run_cmd->add_flag("--dump-weights", dump_weights, "Write joint-run density weights to weights.csv");

    PipelineFlags tune_flags;
    Index trials = 80;
    auto* tune_cmd = app.add_subcommand("tune", "Zero-leakage random search over the shift parameters");
    tune_flags.attach(tune_cmd);
    tune_cmd->add_option("--trials", trials, "Number of trials")->capture_default_str();

    BlobSpec blob;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic Gaussian-blob dataset");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--dim", blob.dim)->capture_default_str();
    synth_cmd->add_option("--n-train", blob.n_train)->capture_default_str();
    synth_cmd->add_option("--n-test-normal", blob.n_test_normal)->capture_default_str();
    synth_cmd->add_option("--n-test-anomalous", blob.n_test_anomalous)->capture_default_str();
    synth_cmd->add_option("--anomaly-offset", blob.anomaly_offset)->capture_default_str();
    synth_cmd->add_option("--noise-scale", blob.noise_scale)->capture_default_str();

    std::string scores_path;
    std::string eval_labels;
    auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics from a scores CSV");
    eval_cmd->add_option("--scores", scores_path, "scores.csv from a run")->required();
    eval_cmd->add_option("--labels", eval_labels, "Optional row_id,label file overriding the score file's labels");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "MSDE-ERR cli: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Usage);
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_flags, dump_weights, out);
        if (tune_cmd->parsed()) return cmd_tune(tune_flags, trials, out);
        if (synth_cmd->parsed()) {
            const auto split = generate_synthetic(blob, synth_seed);
            const fs::path dir(synth_out);
            ensure_dir(dir);
            save_npy(dir / "train.npy", split.train.values);
            save_npy(dir / "test.npy", split.test.values);
            // ids match what load_embeddings assigns to NPY rows
            save_labels(dir / "labels.csv", EmbeddingMatrix{split.test.values,
                                                            EmbeddingMatrix::from_values(split.test.values).row_ids,
                                                            split.test.labels});
            return 0;
        }
        if (eval_cmd->parsed()) {
            auto report = load_scores(scores_path);
            if (!eval_labels.empty()) {
                EmbeddingMatrix ids;
                ids.row_ids = report.row_ids;
                ids.values.resize(static_cast<Index>(report.row_ids.size()), 1);
                attach_labels(ids, load_labels(eval_labels));
                report.labels = *ids.labels;
            }
            out << metrics_json(evaluate(report.raw, report.labels)) << '\n';
            return 0;
        }
    } catch (const Error& e) {
        err << "MSDE-ERR " << module_name(e.module()) << ": " << e.detail() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        err << "MSDE-ERR cli: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Data);
    }
    return static_cast<int>(ErrorKind::Usage);
}

}  // namespace msde::cli
