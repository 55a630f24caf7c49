#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "crashsamp/predictor.hpp"
#include "crashsamp/types.hpp"
#include "crashsamp/rng.hpp"

using namespace crashsamp;

TEST_SUITE("predictor") {

namespace {

struct Data {
    std::vector<FeatureRow> x;
    std::vector<double> y;
};

Data grid_data(std::size_t n, std::uint64_t seed, double (*f)(const FeatureRow&)) {
    Data d;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        FeatureRow r{std::uint16_t(rng.below(67)), std::uint16_t(rng.below(15)), std::uint16_t(rng.below(44))};
        d.x.push_back(r);
        d.y.push_back(f(r));
    }
    return d;
}

double threshold_label(const FeatureRow& r) { return r[0] > 20 ? 1.0 : 0.0; }
double smooth(const FeatureRow& r) { return 0.5 * r[0] - 2.0 * r[1] + 0.1 * r[2]; }

PredictorModel with_metric(double m) {
    PredictorModel p;
    p.holdout_metric = m;
    return p;
}

}  // namespace

TEST_CASE("constant outcome predicts the constant with sigma 0") {
    Data d = grid_data(200, 1, [](const FeatureRow&) { return 4.25; });
    auto m = fit(d.x, d.y, TaskKind::regression, {}, 3);
    REQUIRE(m);
    CHECK(m->sigma == 0.0);
    CHECK(m->holdout_metric == 1.0);
    for (const auto& r : d.x) CHECK(m->predict(r) == doctest::Approx(4.25));
    CHECK(gate(m) == GateDecision::use_model);
}

TEST_CASE("threshold labels beat the majority rate") {
    Data d = grid_data(500, 2, threshold_label);
    auto m = fit(d.x, d.y, TaskKind::classification, {}, 5);
    REQUIRE(m);
    CHECK(m->holdout_metric > 0.0);
    CHECK(gate(m) == GateDecision::use_model);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.x.size(); ++i) correct += (m->predict(d.x[i]) >= 0.5) == (d.y[i] == 1.0);
    CHECK(double(correct) / double(d.x.size()) >= 0.9);
    for (const auto& r : d.x) {
        double p = m->predict(r);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(std::sqrt(p * (1.0 - p)) <= 0.5);
    }
}

TEST_CASE("regression on a smooth surface has positive R^2") {
    Data d = grid_data(800, 4, smooth);
    auto m = fit(d.x, d.y, TaskKind::regression, {}, 8);
    REQUIRE(m);
    CHECK(m->holdout_metric > 0.8);
    CHECK(m->sigma > 0.0);
    CHECK(m->n_train + m->n_holdout == 800);
    CHECK(m->n_holdout == 160);
}

TEST_CASE("insufficient data") {
    Data d = grid_data(19, 1, smooth);
    CHECK_FALSE(fit(d.x, d.y, TaskKind::regression, {}, 1).has_value());
    Data one = grid_data(100, 1, [](const FeatureRow&) { return 1.0; });
    CHECK_FALSE(fit(one.x, one.y, TaskKind::classification, {}, 1).has_value());
    CHECK(gate(std::nullopt) == GateDecision::fallback);
}

TEST_CASE("gate boundaries") {
    CHECK(gate(with_metric(-0.3)) == GateDecision::fallback);
    CHECK(gate(with_metric(0.0)) == GateDecision::use_model);
    CHECK(gate(with_metric(0.2)) == GateDecision::use_model);
    CHECK(gate(with_metric(-1e-12)) == GateDecision::fallback);
}

TEST_CASE("single stump is piecewise constant") {
    Data d = grid_data(300, 6, threshold_label);
    ForestParams p;
    p.n_trees = 1;
    p.max_depth = 1;
    std::vector<std::size_t> rows(d.x.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    Forest f = fit_forest(d.x, d.y, rows, p, 11);
    REQUIRE(f.size() == 1);
    CHECK(f.trees()[0].nodes().size() <= 3);
    std::set<double> values;
    for (const auto& r : d.x) values.insert(f.predict(r));
    CHECK(values.size() <= 2);
}

TEST_CASE("serial and parallel fits are identical and deterministic") {
    Data d = grid_data(400, 7, smooth);
    auto a = fit(d.x, d.y, TaskKind::regression, {}, 21);
    auto b = fit_serial(d.x, d.y, TaskKind::regression, {}, 21);
    auto c = fit(d.x, d.y, TaskKind::regression, {}, 21);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->holdout_metric == b->holdout_metric);
    CHECK(a->sigma == c->sigma);
    for (const auto& r : d.x) {
        CHECK(a->predict(r) == b->predict(r));
        CHECK(a->predict(r) == c->predict(r));
    }
}

TEST_CASE("block prediction equals pointwise prediction") {
    Data d = grid_data(600, 9, smooth);
    auto m = fit(d.x, d.y, TaskKind::regression, {}, 4);
    REQUIRE(m);
    for (std::uint16_t rank : {0, 17, 43}) {
        std::vector<double> block(67 * 15);
        m->forest.predict_block(67, 15, rank, block);
        for (std::uint16_t o = 0; o < 67; ++o)
            for (std::uint16_t dd = 0; dd < 15; ++dd)
                CHECK(block[o * 15 + dd] == doctest::Approx(m->forest.predict({o, dd, rank})).epsilon(1e-9));
    }
}

TEST_CASE("prediction does not depend on query order") {
    Data d = grid_data(300, 10, smooth);
    auto m = fit(d.x, d.y, TaskKind::regression, {}, 2);
    std::vector<double> fwd, back;
    for (const auto& r : d.x) fwd.push_back(m->predict(r));
    for (auto it = d.x.rbegin(); it != d.x.rend(); ++it) back.push_back(m->predict(*it));
    std::reverse(back.begin(), back.end());
    CHECK(fwd == back);
}

TEST_CASE("bad parameters throw") {
    Data d = grid_data(100, 1, smooth);
    ForestParams p;
    p.n_trees = 0;
    CHECK_THROWS_AS(fit(d.x, d.y, TaskKind::regression, p, 1), ConfigError);
    std::vector<double> short_y(5);
    CHECK_THROWS(fit(d.x, short_y, TaskKind::regression, {}, 1));
}

}
