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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pemsurv/baselines.hpp"
#include "pemsurv/error.hpp"
#include "pemsurv/synth.hpp"

using namespace pemsurv;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size()), m = (n - 1) / 2;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - m) * (rb[i] - m);
        saa += (ra[i] - m) * (ra[i] - m);
        sbb += (rb[i] - m) * (rb[i] - m);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("grid inversion of the cumulative hazard") {
    auto two = [](double) { return 2.0; };
    CHECK(sample_event_time(two, 0.7, 0.01, 20) == doctest::Approx(0.35).epsilon(1e-12));
    // Rate 1 on (0, 1], 3 afterwards: H(1) = 1, so H = 2 at 1 + 1/3.
    auto step = [](double u) { return u < 1.0 ? 1.0 : 3.0; };
    CHECK(sample_event_time(step, 2.0, 0.5, 20) == doctest::Approx(1.0 + 1.0 / 3.0).epsilon(1e-12));
    CHECK(std::isinf(sample_event_time(two, 50.0, 0.01, 20)));
    CHECK_THROWS_AS(sample_event_time(two, 1.0, 0.0, 20), DomainError);
}

TEST_CASE("zero log-hazard gives Exp(1) event times") {
    SynthConfig cfg;
    cfg.n = 100000;
    cfg.zero_log_hazard = true;
    cfg.censoring_rate = 0.0;
    cfg.n_noise = 0;
    cfg.seed = 11;
    const auto r = generate(cfg);
    double sum = 0.0;
    for (const auto& s : r.data.spans) {
        CHECK(s.status == 1);
        sum += s.t_end;
    }
    CHECK(std::abs(sum / 1e5 - 1.0) < 0.02);
    const auto km = km_fit(r.data);
    for (int d = 1; d <= 9; ++d) {
        const double t = -std::log(1.0 - d / 10.0);
        CHECK(std::abs(km(t) - std::exp(-t)) < 0.01);
    }
}

TEST_CASE("Kaplan-Meier of uncensored draws tracks the true marginal survival") {
    SynthConfig cfg;
    cfg.n = 20000;
    cfg.censoring_rate = 0.0;
    cfg.n_noise = 0;
    cfg.seed = 4;
    const auto r = generate(cfg);
    const auto km = km_fit(r.data);
    std::vector<double> times;
    for (const auto& s : r.data.spans) times.push_back(s.t_end);
    std::sort(times.begin(), times.end());
    std::vector<double> probes;
    for (int d = 1; d <= 9; ++d) probes.push_back(times[times.size() * static_cast<std::size_t>(d) / 10]);
    std::vector<double> truth(probes.size(), 0.0);
    for (const auto& s : r.data.spans) {
        const CifCurve c(r.truth.grid_hazards(s.features));
        for (std::size_t p = 0; p < probes.size(); ++p) truth[p] += c.survival(probes[p]) / 20000.0;
    }
    for (std::size_t p = 0; p < probes.size(); ++p) {
        CAPTURE(probes[p]);
        CHECK(std::abs(km(probes[p]) - truth[p]) < 0.01);
    }
}

TEST_CASE("censoring calibration") {
    for (auto sc : {Scenario::tve, Scenario::tve_cr}) {
        SynthConfig cfg;
        cfg.n = 2000;
        cfg.scenario = sc;
        cfg.seed = 8;
        const auto r = generate(cfg);
        double censored = 0.0;
        for (const auto& s : r.data.spans) censored += s.status == 0;
        CHECK(std::abs(censored / 2000.0 - cfg.target_censoring()) < 0.05);
        CHECK(r.achieved_censoring == censored / 2000.0);
        CHECK(r.warnings.empty());
        CHECK(std::isfinite(r.censoring_scale));
    }
}

TEST_CASE("noise features are independent of the outcome") {
    SynthConfig cfg;
    cfg.n = 10000;
    cfg.seed = 21;
    const auto r = generate(cfg);
    std::vector<double> t;
    for (const auto& s : r.data.spans) t.push_back(s.t_end);
    const auto& fs = r.data.schema.features;
    REQUIRE(fs.size() == 24);
    for (std::size_t f = 4; f < fs.size(); ++f) {
        std::vector<double> x;
        for (const auto& s : r.data.spans) x.push_back(s.features[f]);
        CAPTURE(fs[f].name);
        CHECK(std::abs(spearman(x, t)) < 0.05);
    }
    // x3 carries signal strong enough to show up in the ranks.
    std::vector<double> x3;
    for (const auto& s : r.data.spans) x3.push_back(s.features[3]);
    CHECK(std::abs(spearman(x3, t)) > 0.1);
}

TEST_CASE("features, columns and determinism") {
    SynthConfig cfg;
    cfg.n = 300;
    cfg.scenario = Scenario::tve_cr;
    cfg.seed = 5;
    const auto a = generate(cfg), b = generate(cfg);
    REQUIRE(a.data.schema.features.size() == 16);
    CHECK(a.data.n_causes == 2);
    CHECK(a.data.schema.features[4].name == "x4");
    CHECK(a.data.schema.features[6].name == "noise1");
    bool both = false;
    for (std::size_t i = 0; i < a.data.spans.size(); ++i) {
        const auto &s = a.data.spans[i], &u = b.data.spans[i];
        CHECK(s.features == u.features);
        CHECK(s.t_end == u.t_end);
        CHECK(s.cause == u.cause);
        const auto& x = s.features;
        CHECK((x[0] == -1.0 || x[0] == 1.0));
        CHECK((x[1] >= 0 && x[1] <= 20));
        CHECK((x[2] >= -3 && x[2] <= 3));
        CHECK((x[3] >= -1 && x[3] <= 1));
        CHECK((x[4] >= 0 && x[4] <= 1));
        CHECK((x[5] >= 0 && x[5] <= 5));
        for (std::size_t f = 6; f < x.size(); ++f) CHECK((x[f] >= 0 && x[f] <= 1));
        CHECK(s.t_end <= 20.0);
        CHECK(s.subject_id == std::to_string(i + 1));
        both = both || s.cause == 2;
    }
    CHECK(both);

    // A subject's draws do not depend on how many others are generated.
    cfg.n = 50;
    const auto c = generate(cfg);
    for (std::size_t i = 0; i < 50; ++i) CHECK(c.data.spans[i].features == a.data.spans[i].features);

    cfg.seed = 6;
    CHECK(generate(cfg).data.spans[0].features != c.data.spans[0].features);
}

TEST_CASE("ground truth is the sampled hazard") {
    SynthConfig cfg;
    cfg.scenario = Scenario::tve_cr;
    const GroundTruth g(cfg);
    const std::vector<double> x{1.0, 2.0, -1.0, 0.5, 0.3, 1.0};
    const auto h = g.grid_hazards(x);
    CHECK(h.rates.rows() == 2000);
    CHECK(h.rates(150, 0) == std::exp(g.log_hazard(1, x, 150.5 * 0.01)));
    CHECK(h.rates(150, 1) == std::exp(g.log_hazard(2, x, 150.5 * 0.01)));
    for (double t : {0.5, 3.0, 10.0})
        CHECK(g.survival(x, t) + g.cif(1, x, t) + g.cif(2, x, t) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(g.log_hazard(3, x, 1.0), DomainError);
    CHECK_THROWS_AS(parse_scenario("weibull"), std::exception);
}
