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

#include "pemsurv/baselines.hpp"
#include "pemsurv/error.hpp"
#include "pemsurv/random.hpp"
#include "pemsurv/synth.hpp"

using namespace pemsurv;

namespace {

SurvivalDataset spans_of(const std::vector<std::tuple<double, double, int>>& rows) {
    SurvivalDataset ds;
    int i = 0;
    for (const auto& [entry, time, status] : rows)
        ds.spans.push_back({std::to_string(i++), entry, time, status, status, 0, {}});
    return ds;
}

// Product over distinct event times of 1 - d / n, counting the risk set
// subject by subject.
double km_oracle(const SurvivalDataset& ds, double t) {
    std::vector<double> times;
    for (const auto& s : ds.spans)
        if (s.status == 1 && s.t_end <= t) times.push_back(s.t_end);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    double s = 1.0;
    for (double u : times) {
        double d = 0.0, n = 0.0;
        for (const auto& sp : ds.spans) {
            if (sp.t_start < u && sp.t_end >= u) ++n;
            if (sp.status == 1 && sp.t_end == u) ++d;
        }
        s *= 1.0 - d / n;
    }
    return s;
}

}  // namespace

TEST_CASE("Kaplan-Meier by hand") {
    const auto km = km_fit(spans_of({{0, 1, 1}, {0, 2, 1}}));
    CHECK(km(0.5) == 1.0);
    CHECK(km(1.0) == 0.5);
    CHECK(km(1.5) == 0.5);
    CHECK(km(2.0) == 0.0);
    CHECK(km.left_limit(1.0) == 1.0);
    CHECK(km.left_limit(2.0) == 0.5);

    const auto cens = km_fit(spans_of({{0, 3, 0}}));
    CHECK(cens(1.0) == 1.0);
    CHECK(cens(3.0) == 1.0);
}

TEST_CASE("Kaplan-Meier equals the brute-force product limit") {
    Rng rng(10);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::tuple<double, double, int>> rows;
        for (int i = 0; i < 10; ++i) {
            // Coarse times force ties; a third of the subjects enter late.
            const double t = std::ceil(rng.uniform(0.0, 6.0) * 2.0) / 2.0 + 0.5;
            const double entry = rng.uniform() < 0.3 ? std::floor(rng.uniform(0.0, t) * 2.0) / 2.0 : 0.0;
            rows.emplace_back(entry, t, rng.uniform() < 0.6);
        }
        const auto ds = spans_of(rows);
        const auto km = km_fit(ds);
        for (double t = 0.0; t <= 8.0; t += 0.25) CHECK(std::abs(km(t) - km_oracle(ds, t)) < 1e-12);
        // Non-increasing.
        for (std::size_t i = 1; i < km.survival.size(); ++i) CHECK(km.survival[i] <= km.survival[i - 1]);
    }
}

TEST_CASE("censoring Kaplan-Meier swaps the indicator") {
    const auto ds = spans_of({{0, 1, 0}, {0, 2, 1}, {0, 3, 0}, {0, 4, 1}});
    const auto g = censoring_km(outcomes(ds));
    CHECK(g(1.0) == doctest::Approx(0.75));
    CHECK(g(3.0) == doctest::Approx(0.75 * 0.5));
    CHECK(g.left_limit(3.0) == doctest::Approx(0.75));
}

TEST_CASE("intercept-only GLM recovers occurrence/exposure") {
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        SurvivalDataset ds;
        for (int i = 0; i < 40; ++i) {
            const int status = rng.uniform() < 0.7;
            ds.spans.push_back({std::to_string(i), 0, rng.uniform(0.1, 4.0), status, status, 0, {}});
        }
        ds.spans.back().t_end = 5.0;
        ds.spans.back().status = ds.spans.back().cause = 1;
        const auto ped = transform(ds, make_cutpoints(ds, CutStrategy::subsample(12, rep)), {true});
        const auto m = glm_fit(ped, 0.0);
        CHECK(m.converged);
        const auto J = ped.cutpoints.n_intervals();
        for (std::size_t j = 1; j <= J; ++j) {
            double d = 0.0, e = 0.0;
            for (Eigen::Index r = 0; r < ped.size(); ++r)
                if (static_cast<std::size_t>(ped.interval(r)) == j) {
                    d += ped.label(r);
                    e += ped.toff(r);
                }
            if (d == 0.0) continue;
            CHECK(std::abs(m.baseline[0](static_cast<Eigen::Index>(j) - 1) - std::log(d / e)) < 1e-6);
        }
    }
}

TEST_CASE("single interval, one event, exposure 2") {
    SurvivalDataset ds;
    ds.spans = {{"a", 0, 1, 1, 1, 0, {}}, {"b", 0, 1, 0, 0, 0, {}}};
    const auto m = glm_fit(transform(ds, CutPoints({0, 1})), 0.0);
    CHECK(m.baseline[0](0) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("zero-event interval needs a ridge") {
    SurvivalDataset ds;
    ds.spans = {{"a", 0, 1, 1, 1, 0, {}}, {"b", 0, 3, 0, 0, 0, {}}};
    const auto ped = transform(ds, CutPoints({0, 1, 3}));
    CHECK_THROWS_WITH_AS(glm_fit(ped, 0.0), doctest::Contains("ridge"), ConvergenceError);
    const auto m = glm_fit(ped, 1e-4);
    CHECK(m.converged);
    CHECK(m.baseline[0](1) < -5.0);
    CHECK_THROWS_AS(glm_fit(ped, -1.0), DomainError);
}

TEST_CASE("GLM recovers a proportional binary effect") {
    // Time-varying baseline, true log hazard ratio 0.7 for x = 1.
    const double beta = 0.7;
    SurvivalDataset ds;
    ds.schema.features = {{"x", FeatureKind::numeric, {}}};
    for (int i = 0; i < 2000; ++i) {
        Rng rng(derive_seed(77, static_cast<std::uint64_t>(i)));
        const double x = rng.uniform() < 0.5 ? 1.0 : 0.0;
        auto hazard = [&](double t) { return std::exp(-1.0 + 0.4 * std::sin(t) + beta * x); };
        const double t = sample_event_time(hazard, -std::log(rng.uniform_open()), 0.01, 6.0);
        const double c = rng.uniform(0.0, 8.0);
        const double obs = std::min({t, c, 6.0});
        const int status = t <= c && std::isfinite(t);
        ds.spans.push_back({std::to_string(i), 0, obs, status, status, 0, {x}});
    }
    const auto ped = transform(ds, CutPoints({0, 0.5, 1, 1.5, 2, 3, 4, 6}));
    const auto m = glm_fit(ped, 0.0);
    REQUIRE(m.beta[0].size() == 1);
    CHECK(std::abs(m.beta[0](0) - beta) < 0.1);
    CHECK(m.deviance <= m.null_deviance);
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i)
        CHECK(m.objective_trace[i] <= m.objective_trace[i - 1] * (1 + 1e-12));

    // Log hazard for a PED row is baseline + x beta.
    Eigen::MatrixXd rows(2, 3);
    rows << 1, 1.5, 1, 0, 1.5, 1;
    const auto eta = glm_log_hazard(m, rows);
    CHECK(eta(0) - eta(1) == doctest::Approx(m.beta[0](0)));
    CHECK(eta(1) == doctest::Approx(m.baseline[0](2)));
    CHECK(glm_deviance(m, ped) == doctest::Approx(m.deviance).epsilon(1e-9));
}

TEST_CASE("competing risks get one coefficient set per transition") {
    Rng rng(3);
    SurvivalDataset ds;
    ds.n_causes = 2;
    ds.schema.features = {{"g", FeatureKind::categorical, {"a", "b", "c"}}};
    for (int i = 0; i < 600; ++i) {
        const double g = static_cast<double>(i % 3);
        const double r1 = 0.5 * std::exp(g == 1 ? 0.5 : 0.0);
        const double r2 = 0.3 * std::exp(g == 2 ? -0.5 : 0.0);
        const double t = -std::log(rng.uniform_open()) / (r1 + r2);
        const int cause = rng.uniform() < r1 / (r1 + r2) ? 1 : 2;
        const bool obs = t < 3.0;
        ds.spans.push_back({std::to_string(i), 0, obs ? t : 3.0, obs, obs ? cause : 0, 0, {g}});
    }
    const auto ped = transform(ds, CutPoints({0, 1, 2, 3}));
    const auto cols = glm_design_columns(ped.schema);
    REQUIRE(cols.size() == 2);
    CHECK(cols[0].level == 1);
    CHECK(cols[1].level == 2);
    const auto m = glm_fit(ped, 0.0);
    REQUIRE(m.beta.size() == 2);
    CHECK(std::abs(m.beta[0](0) - 0.5) < 0.3);
    CHECK(std::abs(m.beta[0](1)) < 0.3);
    CHECK(std::abs(m.beta[1](1) + 0.5) < 0.4);
    CHECK(std::abs(m.baseline[0](0) - std::log(0.5)) < 0.3);
}

TEST_CASE("Kaplan-Meier needs single-event data") {
    auto ds = spans_of({{0, 1, 1}});
    ds.n_causes = 2;
    CHECK_THROWS_AS(km_fit(ds), DomainError);
}
