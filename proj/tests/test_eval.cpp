#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "msde/eval.hpp"
#include "oracles.hpp"

using namespace msde;
using msde::testing::ap_thresholds;
using msde::testing::auc_pairwise;
using msde::testing::capture_error;

namespace {

std::vector<double> random_scores(std::size_t n, std::uint64_t seed, bool ties) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> coarse(0, 9);
    std::vector<double> s(n);
    for (auto& v : s) v = ties ? static_cast<double>(coarse(rng)) * 0.1 : g(rng);
    return s;
}

}  // namespace

TEST_CASE("auc closed forms") {
    CHECK(auc_roc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK(auc_roc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) == 0.0);
    CHECK(auc_roc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}) == 0.5);
}

TEST_CASE("ap closed forms") {
    CHECK(average_precision(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(average_precision(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) == 0.5);
    CHECK(average_precision(std::vector<double>{3, 3, 3, 3, 3}, std::vector<int>{1, 0, 1, 0, 0}) == 0.4);
    CHECK(average_precision(std::vector<double>{1.0}, std::vector<int>{1}) == 1.0);
}

TEST_CASE("metrics equal the exhaustive oracles exactly") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::size_t n = 2 + static_cast<std::size_t>(seed * 37 % 499);
        const bool ties = seed % 2 == 1;
        const auto s = random_scores(n, seed, ties);
        const auto l = msde::testing::random_labels(n, seed + 7, 0.1 + 0.008 * static_cast<double>(seed));
        CHECK(auc_roc(s, l) == auc_pairwise(s, l));
        CHECK(average_precision(s, l) == ap_thresholds(s, l));
    }
}

TEST_CASE("metrics are invariant under increasing transforms and input order") {
    const auto s = random_scores(200, 3, true);
    const auto l = msde::testing::random_labels(200, 4);
    std::vector<double> t;
    for (const double v : s) t.push_back(std::exp(3.0 * v) + 1.0);
    CHECK(auc_roc(t, l) == auc_roc(s, l));
    CHECK(average_precision(t, l) == average_precision(s, l));

    std::vector<std::size_t> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(5);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ps;
    std::vector<int> pl;
    for (const auto i : perm) {
        ps.push_back(s[i]);
        pl.push_back(l[i]);
    }
    CHECK(auc_roc(ps, pl) == auc_roc(s, l));
    CHECK(average_precision(ps, pl) == average_precision(s, l));
}

TEST_CASE("negated scores and swapped labels complement the auc") {
    const auto s = random_scores(150, 11, false);
    const auto l = msde::testing::random_labels(150, 12);
    std::vector<double> neg;
    for (const double v : s) neg.push_back(-v);
    std::vector<int> flipped;
    for (const int v : l) flipped.push_back(1 - v);
    const double a = auc_roc(s, l);
    CHECK(a + auc_roc(neg, l) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(auc_roc(s, flipped) == doctest::Approx(1.0 - a).epsilon(1e-15));
}

TEST_CASE("metric input errors") {
    auto e = capture_error([] { auc_roc(std::vector<double>{1, 2}, std::vector<int>{0, 0}); });
    REQUIRE(e.has_value());
    CHECK(e->module() == Module::Eval);
    CHECK(capture_error([] { auc_roc(std::vector<double>{1, 2}, std::vector<int>{1, 1}); }).has_value());
    CHECK(capture_error([] { average_precision(std::vector<double>{1, 2}, std::vector<int>{0, 0}); }).has_value());
    CHECK(capture_error([] { auc_roc(std::vector<double>{1, 2}, std::vector<int>{0}); }).has_value());
    CHECK(capture_error([] { auc_roc(std::vector<double>{1, 2}, std::vector<int>{0, 2}); }).has_value());
    CHECK(capture_error([] { auc_roc(std::vector<double>{1, NAN}, std::vector<int>{0, 1}); }).has_value());
}

TEST_CASE("evaluate and json") {
    const auto m = evaluate(std::vector<double>{0.1, 0.7, 0.4}, std::vector<int>{0, 1, 0});
    CHECK(m.auc == 1.0);
    CHECK(m.ap == 1.0);
    CHECK(m.n_pos == 1);
    CHECK(m.n_neg == 2);
    CHECK(metrics_json(m) == R"({"auc": 1.000000, "ap": 1.000000, "n_pos": 1, "n_neg": 2})");
}
