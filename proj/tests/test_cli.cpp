#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "msde/data_io.hpp"
#include "oracles.hpp"

using msde::testing::TempDir;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Outcome o;
    o.code = msde::cli::run(args, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Small synthetic fixture written through the synth subcommand.
void synth(const TempDir& dir, const std::string& seed = "0") {
    const auto o = run({"synth", "--out", dir.path().string(), "--seed", seed, "--dim", "6", "--n-train", "80",
                        "--n-test-normal", "20", "--n-test-anomalous", "20", "--anomaly-offset", "3"});
    REQUIRE(o.code == 0);
}

std::vector<std::string> run_args(const TempDir& dir, const std::string& out) {
    const auto p = dir.path();
    return {"run",   "--train",     (p / "train.npy").string(), "--test", (p / "test.npy").string(),
            "--labels", (p / "labels.csv").string(), "--out", (p / out).string(), "--k", "8",
            "--t-nbd", "8", "--max-iters", "3"};
}

}  // namespace

TEST_CASE("synth writes loadable files and honours the seed") {
    TempDir a("cli"), b("cli"), c("cli");
    synth(a);
    synth(b);
    synth(c, "5");
    for (const char* f : {"train.npy", "test.npy", "labels.csv"}) CHECK(std::filesystem::exists(a / f));
    CHECK(slurp(a / "train.npy") == slurp(b / "train.npy"));
    CHECK(slurp(a / "train.npy") != slurp(c / "train.npy"));
    const auto train = msde::load_embeddings(a / "train.npy");
    CHECK(train.n_samples() == 80);
    CHECK(train.dim() == 6);

    const auto bad = run({"synth", "--out", (a / "x").string(), "--n-test-anomalous", "0"});
    CHECK(bad.code == 1);
    CHECK(bad.err.rfind("MSDE-ERR data_io:", 0) == 0);
}

TEST_CASE("run writes every artifact and eval agrees with it") {
    TempDir dir("cli");
    synth(dir);
    auto args = run_args(dir, "out");
    args.push_back("--dump-weights");
    const auto o = run(args);
    REQUIRE(o.code == 0);
    const auto out = dir / "out";
    for (const char* f : {"scores.csv", "metrics.json", "config_echo.txt", "shift_trace.log", "model.json", "weights.csv"})
        CHECK(std::filesystem::exists(out / f));
    const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
    CHECK(metrics.contains("auc"));
    CHECK(metrics.contains("ap"));
    CHECK(metrics["n_pos"] == 20);

    const auto echo = slurp(out / "config_echo.txt");
    CHECK(echo.find("k = 8\n") != std::string::npos);
    CHECK(echo.find("t_nbd = 8\n") != std::string::npos);
    CHECK(echo.find("train_sha256 = " + msde::cli::sha256_file(dir / "train.npy")) != std::string::npos);
    CHECK(slurp(out / "shift_trace.log").rfind("solo 1 ", 0) == 0);

    const auto e = run({"eval", "--scores", (out / "scores.csv").string()});
    REQUIRE(e.code == 0);
    CHECK(e.out == slurp(out / "metrics.json"));
    const auto e2 = run({"eval", "--scores", (out / "scores.csv").string(), "--labels", (dir / "labels.csv").string()});
    CHECK(e2.out == e.out);
}

TEST_CASE("run is byte-reproducible and thread-count independent") {
    TempDir dir("cli");
    synth(dir);
    REQUIRE(run(run_args(dir, "a")).code == 0);
    REQUIRE(run(run_args(dir, "b")).code == 0);
    auto threaded = run_args(dir, "c");
    threaded.insert(threaded.end(), {"--threads", "3"});
    REQUIRE(run(threaded).code == 0);
    CHECK(slurp(dir / "a" / "scores.csv") == slurp(dir / "b" / "scores.csv"));
    CHECK(slurp(dir / "a" / "scores.csv") == slurp(dir / "c" / "scores.csv"));
}

TEST_CASE("config file is overridden by flags and no-shift is honoured") {
    TempDir dir("cli");
    synth(dir);
    std::ofstream(dir / "cfg.toml") << "k = 6\neta = 0.5\nmax_iters = 4\n";
    auto args = run_args(dir, "out");
    args.insert(args.end(), {"--config", (dir / "cfg.toml").string(), "--no-shift"});
    REQUIRE(run(args).code == 0);
    const auto echo = slurp(dir / "out" / "config_echo.txt");
    CHECK(echo.find("k = 8\n") != std::string::npos);
    CHECK(echo.find("eta = 0.5\n") != std::string::npos);
    CHECK(echo.find("max_iters = 0\n") != std::string::npos);
    CHECK(slurp(dir / "out" / "shift_trace.log").empty());
}

TEST_CASE("errors map to exit codes with a parsable prefix") {
    TempDir dir("cli");
    synth(dir);
    msde::RowMatrix<double> other = msde::RowMatrix<double>::Zero(5, 4);
    msde::save_npy(dir / "narrow.npy", other);
    auto args = run_args(dir, "out");
    args[2] = (dir / "narrow.npy").string();
    const auto dims = run(args);
    CHECK(dims.code == 2);
    CHECK(dims.err.rfind("MSDE-ERR data_io:", 0) == 0);
    CHECK(dims.err.find('4') != std::string::npos);
    CHECK(dims.err.find('6') != std::string::npos);

    CHECK(run({"run", "--train", "x"}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    auto bad_eta = run_args(dir, "out");
    bad_eta.insert(bad_eta.end(), {"--eta", "3"});
    const auto u = run(bad_eta);
    CHECK(u.code == 1);
    CHECK(u.err.rfind("MSDE-ERR ", 0) == 0);

    std::ofstream(dir / "zeros.csv") << "row_id,label,raw_score,normalized_score\na,0,1,0.5\nb,0,2,0.5\n";
    const auto ev = run({"eval", "--scores", (dir / "zeros.csv").string()});
    CHECK(ev.code == 2);
    CHECK(ev.err.rfind("MSDE-ERR eval:", 0) == 0);

    std::ofstream(dir / "perfect.csv") << "row_id,label,raw_score,normalized_score\na,0,1,0.2\nb,1,2,0.8\n";
    const auto ok = run({"eval", "--scores", (dir / "perfect.csv").string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("\"auc\": 1.000000") != std::string::npos);
}

TEST_CASE("tune writes its study and reruns identically") {
    TempDir dir("cli");
    synth(dir);
    const auto p = dir.path();
    auto args = [&](const std::string& out) {
        return std::vector<std::string>{"tune",  "--train", (p / "train.npy").string(), "--test", (p / "test.npy").string(),
                                        "--labels", (p / "labels.csv").string(), "--out", (p / out).string(),
                                        "--trials", "3", "--seed", "4"};
    };
    REQUIRE(run(args("t1")).code == 0);
    REQUIRE(run(args("t2")).code == 0);
    const auto jsonl = slurp(p / "t1" / "trials.jsonl");
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 4);
    CHECK(jsonl == slurp(p / "t2" / "trials.jsonl"));
    for (const char* f : {"trials.csv", "best_params.txt", "metrics.json", "config_echo.txt"})
        CHECK(std::filesystem::exists(p / "t1" / f));
}

TEST_CASE("help lists the tune default of 80 trials") {
    const auto o = run({"tune", "--help"});
    CHECK(o.code == 0);
    CHECK(o.out.find("80") != std::string::npos);
}
