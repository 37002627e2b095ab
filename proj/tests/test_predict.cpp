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

#include "pemsurv/predict.hpp"
#include "pemsurv/random.hpp"

using namespace pemsurv;

namespace {

PiecewiseHazards random_hazards(Rng& rng, int K) {
    std::set<double> cuts;
    const int J = static_cast<int>(rng.integer(1, 7));
    while (static_cast<int>(cuts.size()) < J) cuts.insert(rng.uniform(0.05, 5.0));
    PiecewiseHazards h{CutPoints::from_positive({cuts.begin(), cuts.end()}), Eigen::MatrixXd(J, K)};
    for (int j = 0; j < J; ++j)
        for (int k = 0; k < K; ++k) h.rates(j, k) = rng.uniform() < 0.1 ? 0.0 : rng.uniform(0.0, 1.5);
    return h;
}

double rate(const PiecewiseHazards& h, int k, double u) {
    const auto j = std::min<std::size_t>(h.cutpoints.interval_of(u), h.cutpoints.n_intervals());
    double s = 0.0;
    for (int c = 0; c < h.rates.cols(); ++c)
        if (k == 0 || c == k - 1) s += h.rates(static_cast<Eigen::Index>(j) - 1, c);
    return s;
}

// Pieces of [0, t] on which the hazard is constant.
std::vector<std::pair<double, double>> pieces(const PiecewiseHazards& h, double t) {
    std::vector<std::pair<double, double>> out;
    const auto& kappa = h.cutpoints.values();
    for (std::size_t j = 1; j < kappa.size() && kappa[j - 1] < t; ++j) {
        const double hi = j + 1 == kappa.size() ? t : std::min(t, kappa[j]);
        out.emplace_back(kappa[j - 1], hi);
    }
    return out;
}

// Cumulative hazard by the composite midpoint rule on each piece.
double cumhaz_quadrature(const PiecewiseHazards& h, int k, double t) {
    double s = 0.0;
    for (const auto& [a, b] : pieces(h, t)) {
        const int m = 100;
        const double w = (b - a) / m;
        for (int i = 0; i < m; ++i) s += rate(h, k, a + (i + 0.5) * w) * w;
    }
    return s;
}

// Exact cumulative hazard as a plain sum over pieces.
double cumhaz_direct(const PiecewiseHazards& h, double t) {
    double s = 0.0;
    for (const auto& [a, b] : pieces(h, t)) s += rate(h, 0, (a + b) / 2.0) * (b - a);
    return s;
}

// F_k(t) = int_0^t lambda_k(u) S(u) du by composite Simpson on each piece.
double cif_quadrature(const PiecewiseHazards& h, int k, double t) {
    double f = 0.0;
    for (const auto& [a, b] : pieces(h, t)) {
        const int m = 400;
        const double w = (b - a) / m;
        const double mid = (a + b) / 2.0;
        auto g = [&](double u) { return rate(h, k, mid) * std::exp(-cumhaz_direct(h, u)); };
        double s = g(a) + g(b);
        for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * g(a + i * w);
        f += s * w / 3.0;
    }
    return f;
}

}  // namespace

TEST_CASE("exponential special cases") {
    const SurvivalCurve one(CutPoints({0, 1, 2}), Eigen::Vector2d(1, 1));
    CHECK(one(1.5) == doctest::Approx(std::exp(-1.5)).epsilon(1e-15));
    CHECK(one(0.0) == 1.0);
    CHECK_FALSE(one.extrapolated(2.0));
    CHECK(one.extrapolated(2.5));
    CHECK(one(3.0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-15));

    const SurvivalCurve zero(CutPoints({0, 1, 2}), Eigen::Vector2d(0, 0));
    CHECK(zero(1.7) == 1.0);
}

TEST_CASE("cause-specific special cases") {
    PiecewiseHazards eq{CutPoints({0, 1, 3}), Eigen::MatrixXd(2, 2)};
    eq.rates << 0.4, 0.4, 0.9, 0.9;
    const CifCurve c(eq);
    for (double t : {0.3, 1.0, 2.2, 4.0}) {
        CHECK(c.cif(1, t) == doctest::Approx((1 - c.survival(t)) / 2).epsilon(1e-14));
        CHECK(c.cif(2, t) == doctest::Approx(c.cif(1, t)).epsilon(1e-14));
    }

    PiecewiseHazards one{CutPoints({0, 1, 3}), Eigen::MatrixXd(2, 2)};
    one.rates << 0.4, 0.0, 0.0, 0.0;
    const CifCurve d(one);
    for (double t : {0.3, 1.0, 2.2})
        CHECK(d.cif(1, t) == doctest::Approx(1 - d.survival(t)).epsilon(1e-14));
    CHECK(d.cif(2, 2.0) == 0.0);
    CHECK(d.survival(2.5) == doctest::Approx(std::exp(-0.4)));
}

TEST_CASE("survival and incidence match quadrature and sum to one") {
    Rng rng(42);
    for (int rep = 0; rep < 50; ++rep) {
        const int K = static_cast<int>(rng.integer(1, 3));
        const auto h = random_hazards(rng, K);
        const CifCurve c(h);
        const auto all = survival_curve(h);
        for (int i = 0; i < 20; ++i) {
            const double t = rng.uniform(0.0, 1.3 * h.cutpoints.max());
            CHECK(std::abs(c.survival(t) - std::exp(-cumhaz_quadrature(h, 0, t))) < 1e-10);
            CHECK(all(t) == doctest::Approx(c.survival(t)).epsilon(1e-14));
            double total = c.survival(t);
            for (int k = 1; k <= K; ++k) {
                CHECK(std::abs(c.cif(k, t) - cif_quadrature(h, k, t)) < 1e-8);
                CHECK(std::abs(survival_curve(h, k)(t) - std::exp(-cumhaz_quadrature(h, k, t))) < 1e-10);
                total += c.cif(k, t);
            }
            CHECK(std::abs(total - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("curves are monotone") {
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const auto h = random_hazards(rng, 2);
        const CifCurve c(h);
        double s = 1.0, f1 = 0.0, f2 = 0.0;
        for (double t = 0.0; t < 6.0; t += 0.05) {
            CHECK(c.survival(t) <= s);
            CHECK(c.cif(1, t) >= f1);
            CHECK(c.cif(2, t) >= f2);
            s = c.survival(t);
            f1 = c.cif(1, t);
            f2 = c.cif(2, t);
        }
        CHECK(c.cif(1, 0.0) == 0.0);
    }
}

TEST_CASE("refining an interval changes nothing") {
    Rng rng(15);
    for (int rep = 0; rep < 20; ++rep) {
        const auto h = random_hazards(rng, 2);
        auto kappa = h.cutpoints.values();
        const double split = kappa[1] * 0.37;
        kappa.insert(kappa.begin() + 1, split);
        PiecewiseHazards f{CutPoints(kappa), Eigen::MatrixXd(h.rates.rows() + 1, 2)};
        f.rates.row(0) = h.rates.row(0);
        f.rates.bottomRows(h.rates.rows()) = h.rates;
        const CifCurve a(h), b(f);
        for (double t = 0.0; t < 6.0; t += 0.1) {
            CHECK(a.survival(t) == doctest::Approx(b.survival(t)).epsilon(1e-13));
            CHECK(a.cif(1, t) == doctest::Approx(b.cif(1, t)).epsilon(1e-12));
            CHECK(a.cif(2, t) == doctest::Approx(b.cif(2, t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("interval design rows") {
    const std::vector<double> x{0.5, -1.0};
    const auto d = interval_design(CutPoints({0, 1, 2.5}), 2, x);
    REQUIRE(d.rows() == 4);
    REQUIRE(d.cols() == 4);
    Eigen::MatrixXd expect(4, 4);
    expect << 0.5, -1, 1, 1, 0.5, -1, 2.5, 1, 0.5, -1, 1, 2, 0.5, -1, 2.5, 2;
    CHECK(d == expect);
}

TEST_CASE("model hazards come from the margin without offset") {
    BoostedEnsemble m;
    m.schema = ped_schema({{{"x", FeatureKind::numeric, {}}}});
    m.cutpoints = CutPoints({0, 1, 2});
    m.n_causes = 2;
    m.params.base_margin_init = -1.0;
    m.params.learning_rate = 1.0;
    // Split on t_j at 1.5, then on k.
    std::vector<TreeNode> nodes(5);
    nodes[0] = {1, 1.5, false, 1, 2, 0, 0, 0};
    nodes[1].weight = 0.0;
    nodes[2] = {2, 1.5, false, 3, 4, 0, 0, 0};
    nodes[3].weight = 0.5;
    nodes[4].weight = -0.5;
    m.trees.emplace_back(nodes);
    const std::vector<double> x{3.0};
    const auto h = interval_hazards(m, x);
    CHECK(h.rates(0, 0) == doctest::Approx(std::exp(-1.0)));
    CHECK(h.rates(0, 1) == doctest::Approx(std::exp(-1.0)));
    CHECK(h.rates(1, 0) == doctest::Approx(std::exp(-0.5)));
    CHECK(h.rates(1, 1) == doctest::Approx(std::exp(-1.5)));
    const auto c = cif_curves(m, x);
    CHECK(c.survival(1.0) == doctest::Approx(std::exp(-2 * std::exp(-1.0))));
}
