// Copyright 2026 The pemsurv Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <set>

#include "pemsurv/error.hpp"
#include "pemsurv/ped.hpp"
#include "pemsurv/random.hpp"
#include "pemsurv/synth.hpp"

using namespace pemsurv;

namespace {

SurvivalDataset table2_data() {
    SurvivalDataset ds;
    ds.n_causes = 2;
    ds.spans = {{"1", 0, 1.3, 1, 2, 0, {}}, {"2", 0, 0.5, 0, 0, 0, {}}, {"3", 0, 2.7, 1, 1, 0, {}}};
    return ds;
}

// Random right-censored single-event data with one numeric feature.
SurvivalDataset random_spans(Rng& rng, int n) {
    SurvivalDataset ds;
    ds.schema.features = {{"x", FeatureKind::numeric, {}}};
    for (int i = 0; i < n; ++i) {
        const double t = rng.uniform(0.05, 5.0);
        const int status = rng.uniform() < 0.6 ? 1 : 0;
        ds.spans.push_back({std::to_string(i), 0.0, t, status, status, 0, {rng.uniform()}});
    }
    return ds;
}

CutPoints random_cuts(Rng& rng, double cover) {
    std::set<double> c;
    const int m = static_cast<int>(rng.integer(1, 8));
    for (int i = 0; i < m; ++i) c.insert(rng.uniform(0.01, cover));
    c.insert(cover + rng.uniform(0.0, 1.0));
    return CutPoints::from_positive({c.begin(), c.end()});
}

}  // namespace

TEST_CASE("cut-point construction") {
    const auto ds = table2_data();
    CHECK(make_cutpoints(ds, CutStrategy::explicit_list({1, 1.5, 3})).values() == std::vector<double>{0, 1, 1.5, 3});
    CHECK(make_cutpoints(ds, CutStrategy::all_events()).values() == std::vector<double>{0, 1.3, 2.7});

    SurvivalDataset one;
    one.spans = {{"a", 0, 2, 1, 1, 0, {}}};
    CHECK(make_cutpoints(one, CutStrategy::all_events()).values() == std::vector<double>{0, 2});

    SurvivalDataset none;
    none.spans = {{"a", 0, 2, 0, 0, 0, {}}};
    CHECK_THROWS_WITH_AS(make_cutpoints(none, CutStrategy::all_events()), "no event times to place cut-points",
                         DomainError);
    CHECK_THROWS_AS(CutStrategy::subsample(0, 1), DomainError);
    CHECK_THROWS_AS(CutPoints::from_positive({1, 1}), DomainError);
    CHECK_THROWS_AS(make_cutpoints(ds, CutStrategy::explicit_list({-1, 2})), DomainError);

    const CutPoints cp({0, 1, 1.5, 3});
    CHECK(cp.interval_of(1.0) == 1);
    CHECK(cp.interval_of(1.0000001) == 2);
    CHECK(cp.interval_of(3.0) == 3);
    CHECK(cp.interval_of(3.5) == 4);
}

TEST_CASE("sub-sample cut-points match direct enumeration of the sampled subjects") {
    SynthConfig cfg;
    cfg.n = 400;
    cfg.seed = 3;
    const auto ds = generate(cfg).data;
    const auto sub = make_cutpoints(ds, CutStrategy::subsample(200, 99));
    const auto all = make_cutpoints(ds, CutStrategy::all_events());
    CHECK(sub.n_intervals() <= all.n_intervals());

    // Oracle: redraw the subjects and collect their event times by hand.
    const auto chosen = subsample_subjects(400, 200, 99);
    CHECK(chosen.size() == 200);
    CHECK(std::set<std::size_t>(chosen.begin(), chosen.end()).size() == 200);
    std::set<double> events;
    double max_t = 0.0;
    for (std::size_t i = 0; i < ds.spans.size(); ++i) {
        max_t = std::max(max_t, ds.spans[i].t_end);
        if (ds.spans[i].status == 1 && std::binary_search(chosen.begin(), chosen.end(), i))
            events.insert(ds.spans[i].t_end);
    }
    std::vector<double> expect{0.0};
    expect.insert(expect.end(), events.begin(), events.end());
    if (max_t > expect.back()) expect.push_back(max_t);
    CHECK(sub.values() == expect);
}

TEST_CASE("Table 2 transformation") {
    const auto ped = transform(table2_data(), CutPoints({0, 1, 1.5, 3}));
    // (i, j, delta, t_j, t_ij, k) with t_ij = t_i - kappa_{j-1} in the event
    // or censoring interval.
    struct Row {
        int i, j;
        double delta, tj, toff;
        int k;
    };
    const std::vector<Row> expect{
        {1, 1, 0, 1, 1, 1}, {1, 2, 0, 1.5, 1.3 - 1.0, 1}, {2, 1, 0, 1, 0.5, 1},
        {3, 1, 0, 1, 1, 1}, {3, 2, 0, 1.5, 0.5, 1},       {3, 3, 1, 3, 2.7 - 1.5, 1},
        {1, 1, 0, 1, 1, 2}, {1, 2, 1, 1.5, 1.3 - 1.0, 2}, {2, 1, 0, 1, 0.5, 2},
        {3, 1, 0, 1, 1, 2}, {3, 2, 0, 1.5, 0.5, 2},       {3, 3, 0, 3, 2.7 - 1.5, 2},
    };
    REQUIRE(ped.size() == 12);
    for (Eigen::Index r = 0; r < 12; ++r) {
        const auto& e = expect[static_cast<std::size_t>(r)];
        CAPTURE(r);
        CHECK(ped.subject_ids[static_cast<std::size_t>(ped.subject(r))] == std::to_string(e.i));
        CHECK(ped.interval(r) == e.j);
        CHECK(ped.label(r) == e.delta);
        CHECK(ped.tj(r) == e.tj);
        CHECK(ped.toff(r) == e.toff);
        CHECK(ped.transition(r) == e.k);
        CHECK(ped.features(r, 0) == e.tj);
        CHECK(ped.features(r, 1) == e.k);
    }
    CHECK(ped.schema.names() == std::vector<std::string>{"tj", "k"});
}

TEST_CASE("boundary conventions") {
    SurvivalDataset ds;
    ds.spans = {{"a", 0, 1.5, 0, 0, 0, {}}};
    const auto ped = transform(ds, CutPoints({0, 1, 1.5, 3}));
    REQUIRE(ped.size() == 2);
    CHECK(ped.toff(0) == 1.0);
    CHECK(ped.toff(1) == 0.5);
    CHECK(ped.label.sum() == 0.0);

    // Entry exactly at kappa_1 starts in interval 2.
    SurvivalDataset lt;
    lt.spans = {{"a", 1.0, 2.0, 1, 1, 0, {}}};
    const auto p2 = transform(lt, CutPoints({0, 1, 1.5, 3}));
    REQUIRE(p2.size() == 2);
    CHECK(p2.interval(0) == 2);
    CHECK(p2.toff(0) == 0.5);
    CHECK(p2.toff(1) == 0.5);
    CHECK(p2.label(1) == 1.0);

    // Entry inside an interval.
    lt.spans[0].t_start = 0.25;
    const auto p3 = transform(lt, CutPoints({0, 1, 1.5, 3}));
    CHECK(p3.interval(0) == 1);
    CHECK(p3.toff(0) == 0.75);

    SurvivalDataset late;
    late.spans = {{"a", 0, 4, 1, 1, 0, {}}};
    CHECK_THROWS_AS(transform(late, CutPoints({0, 1, 3})), CoverageError);
    const auto cut = transform(late, CutPoints({0, 1, 3}), {true});
    CHECK(cut.size() == 2);
    CHECK(cut.label.sum() == 0.0);
    CHECK(cut.toff.sum() == 3.0);
}

TEST_CASE("time-varying features use the value active in each interval") {
    SurvivalDataset ds;
    ds.schema.features = {{"x", FeatureKind::numeric, {}}};
    ds.spans = {{"a", 0, 1.2, 0, 0, 0, {1}}, {"a", 1.2, 2.0, 0, 0, 0, {2}}, {"a", 2.0, 2.5, 1, 1, 0, {3}}};
    const auto ped = transform(ds, CutPoints({0, 1, 2, 3}));
    REQUIRE(ped.size() == 3);
    CHECK(ped.features(0, 0) == 1.0);
    // (1, 2] holds x = 1 on (1, 1.2] then 2: last value carried forward.
    CHECK(ped.features(1, 0) == 2.0);
    CHECK(ped.features(2, 0) == 3.0);
    REQUIRE(ped.warnings.size() == 1);
    CHECK(ped.warnings[0].interval == 2);

    // Changes exactly at cut-points need no aggregation.
    const auto exact = transform(ds, CutPoints({0, 1.2, 2, 3}));
    CHECK(exact.warnings.empty());
    CHECK(exact.features(0, 0) == 1.0);
    CHECK(exact.features(1, 0) == 2.0);
}

TEST_CASE("ped_loglik examples") {
    SurvivalDataset ds;
    ds.spans = {{"a", 0, 1, 1, 1, 0, {}}};
    const auto ped = transform(ds, CutPoints({0, 1}));
    const std::vector<double> one{1.0};
    CHECK(ped_loglik(ped, one) == -1.0);

    ds.spans[0].status = 0;
    ds.spans[0].cause = 0;
    const auto cens = transform(ds, CutPoints({0, 1}));
    const std::vector<double> tiny{1e-12};
    CHECK(std::abs(ped_loglik(cens, tiny)) < 1e-9);
    const std::vector<double> bad{0.0};
    CHECK_THROWS_AS(ped_loglik(cens, bad), DomainError);
}

TEST_CASE("PED likelihood equals the survival likelihood on random data") {
    Rng rng(2024);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = static_cast<int>(rng.integer(1, 20));
        const auto ds = random_spans(rng, n);
        double max_t = 0.0;
        for (const auto& s : ds.spans) max_t = std::max(max_t, s.t_end);
        const auto cp = random_cuts(rng, max_t);
        const auto ped = transform(ds, cp);

        const auto J = static_cast<Eigen::Index>(cp.n_intervals());
        const Eigen::MatrixXd lambda = (Eigen::MatrixXd::Random(n, J).array() + 1.5).matrix();

        // log(lambda(t_i)^delta_i S(t_i)) by direct integration.
        double oracle = 0.0;
        const auto& kappa = cp.values();
        for (int i = 0; i < n; ++i) {
            const double t = ds.spans[static_cast<std::size_t>(i)].t_end;
            double cum = 0.0;
            for (Eigen::Index j = 0; j < J; ++j) {
                const double lo = kappa[static_cast<std::size_t>(j)];
                const double hi = kappa[static_cast<std::size_t>(j) + 1];
                if (t > lo) cum += lambda(i, j) * (std::min(t, hi) - lo);
                if (ds.spans[static_cast<std::size_t>(i)].status == 1 && t > lo && t <= hi)
                    oracle += std::log(lambda(i, j));
            }
            oracle -= cum;
        }

        std::vector<double> h(static_cast<std::size_t>(ped.size()));
        double log_toff = 0.0;
        for (Eigen::Index r = 0; r < ped.size(); ++r) {
            h[static_cast<std::size_t>(r)] = lambda(ped.subject(r), ped.interval(r) - 1);
            log_toff += ped.label(r) * std::log(ped.toff(r));
        }
        CHECK(std::abs(ped_loglik(ped, h) - oracle) < 1e-10);
        CHECK(std::abs(poisson_loglik(ped, h) - log_toff - oracle) < 1e-10);
    }
}

TEST_CASE("PED invariants on random data") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = static_cast<int>(rng.integer(1, 20));
        auto ds = random_spans(rng, n);
        double max_t = 0.0;
        for (auto& s : ds.spans) {
            max_t = std::max(max_t, s.t_end);
            if (rng.uniform() < 0.3) s.t_start = rng.uniform(0.0, s.t_end * 0.9);
        }
        const auto cp = random_cuts(rng, max_t);
        const auto ped = transform(ds, cp);

        std::vector<double> exposure(static_cast<std::size_t>(n), 0.0);
        std::vector<double> mass(static_cast<std::size_t>(n), 0.0);
        std::vector<int> rows(static_cast<std::size_t>(n), 0);
        for (Eigen::Index r = 0; r < ped.size(); ++r) {
            const auto i = static_cast<std::size_t>(ped.subject(r));
            const int j = ped.interval(r);
            CHECK(ped.toff(r) > 0.0);
            CHECK(ped.toff(r) <= cp.length(static_cast<std::size_t>(j)) + 1e-15);
            if (r > 0 && ped.subject(r - 1) == ped.subject(r)) CHECK(ped.interval(r - 1) + 1 == j);
            exposure[i] += ped.toff(r);
            mass[i] += ped.label(r);
            ++rows[i];
        }
        for (int i = 0; i < n; ++i) {
            const auto& s = ds.spans[static_cast<std::size_t>(i)];
            CHECK(exposure[static_cast<std::size_t>(i)] == doctest::Approx(s.t_end - s.t_start).epsilon(1e-14));
            CHECK(mass[static_cast<std::size_t>(i)] == s.status);
            if (s.t_start == 0.0) {
                int expect = 0;
                for (std::size_t j = 1; j <= cp.n_intervals(); ++j) expect += cp.lower(j) < s.t_end;
                CHECK(rows[static_cast<std::size_t>(i)] == expect);
            }
        }
    }
}

TEST_CASE("refining a cut-point leaves the likelihood unchanged under constant hazard") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto ds = random_spans(rng, 15);
        double max_t = 0.0;
        for (const auto& s : ds.spans) max_t = std::max(max_t, s.t_end);
        const auto coarse = random_cuts(rng, max_t);
        auto kappa = coarse.values();
        kappa.insert(kappa.begin() + 1, kappa[1] / 2.0);
        const CutPoints fine(kappa);
        const auto a = transform(ds, coarse);
        const auto b = transform(ds, fine);
        // Hazard per interval of the coarse grid, shared by both halves.
        const Eigen::VectorXd lam = Eigen::VectorXd::Random(static_cast<Eigen::Index>(coarse.n_intervals())).array() + 2.0;
        std::vector<double> ha, hb;
        for (Eigen::Index r = 0; r < a.size(); ++r) ha.push_back(lam(a.interval(r) - 1));
        for (Eigen::Index r = 0; r < b.size(); ++r) hb.push_back(lam(std::max(b.interval(r) - 1, 1) - 1));
        CHECK(ped_loglik(a, ha) == doctest::Approx(ped_loglik(b, hb)).epsilon(1e-12));
    }
}

TEST_CASE("stacked transitions are symmetric") {
    Rng rng(5);
    SurvivalDataset ds;
    ds.n_causes = 3;
    ds.schema.features = {{"x", FeatureKind::numeric, {}}};
    for (int i = 0; i < 12; ++i) {
        const int status = rng.uniform() < 0.7;
        const int cause = status ? static_cast<int>(rng.integer(1, 3)) : 0;
        ds.spans.push_back({std::to_string(i), 0, rng.uniform(0.1, 3.0), status, cause, 0, {rng.uniform()}});
    }
    const auto ped = transform(ds, CutPoints({0, 0.5, 1, 2, 3}));
    REQUIRE(ped.size() % 3 == 0);
    const Eigen::Index m = ped.size() / 3;
    for (Eigen::Index r = 0; r < m; ++r) {
        double labels = 0.0;
        for (int k = 0; k < 3; ++k) {
            const Eigen::Index q = r + k * m;
            CHECK(ped.transition(q) == k + 1);
            CHECK(ped.subject(q) == ped.subject(r));
            CHECK(ped.interval(q) == ped.interval(r));
            CHECK(ped.toff(q) == ped.toff(r));
            CHECK(ped.features(q, 0) == ped.features(r, 0));
            labels += ped.label(q);
        }
        CHECK(labels <= 1.0);
    }
}

TEST_CASE("multi-state data only puts subjects at risk from their current state") {
    SurvivalDataset ds;
    ds.n_causes = 2;
    ds.transitions = {{0, 1}, {1, 2}};
    // a: 0 -> 1 at 1.5, then 1 -> 2 at 2.5; b: censored in state 0.
    ds.spans = {{"a", 0, 1.5, 1, 1, 0, {}}, {"a", 1.5, 2.5, 1, 2, 1, {}}, {"b", 0, 2, 0, 0, 0, {}}};
    const auto ped = transform(ds, CutPoints({0, 1, 2, 3}));
    double k1_exposure = 0.0, k2_exposure = 0.0;
    for (Eigen::Index r = 0; r < ped.size(); ++r)
        (ped.transition(r) == 1 ? k1_exposure : k2_exposure) += ped.toff(r);
    CHECK(k1_exposure == doctest::Approx(1.5 + 2.0));
    CHECK(k2_exposure == doctest::Approx(1.0));
    CHECK(ped.label.sum() == 2.0);
}
