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

#include "pemsurv/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "pemsurv/error.hpp"

namespace pemsurv {

double empirical_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Horizons quantile_horizons(const std::vector<Outcome>& test) {
    std::vector<double> events;
    for (const auto& o : test)
        if (o.status == 1) events.push_back(o.time);
    if (events.empty()) throw DomainError("no event times in test data to place horizons");
    return {empirical_quantile(events, 0.25), empirical_quantile(events, 0.50), empirical_quantile(events, 0.75)};
}

Horizons quantile_horizons(const SurvivalDataset& test) { return quantile_horizons(outcomes(test)); }

namespace {

double checked_weight(double g, double t) {
    if (!(g > 0.0)) throw DomainError("censoring weight degenerate at t = " + std::to_string(t));
    return g;
}

bool is_cause_event(const Outcome& o, int cause) { return o.status == 1 && (cause == 0 || o.cause == cause); }

// Brier score at u with the risk-set composition fixed at `split`: subjects
// with time <= split count as observed; everyone else is weighted by g_alive.
double brier_at(const std::vector<Outcome>& test, const EventProbability& prob, double split, double u,
                double g_alive, const KmCurve& censoring, int cause) {
    double sum = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& o = test[i];
        if (o.time <= split) {
            if (o.status != 1) continue;
            const double y = is_cause_event(o, cause) ? 1.0 : 0.0;
            const double d = y - prob(i, u);
            sum += d * d / checked_weight(censoring.left_limit(o.time), o.time);
        } else {
            const double p = prob(i, u);
            sum += p * p / checked_weight(g_alive, u);
        }
    }
    return sum / static_cast<double>(test.size());
}

}  // namespace

double brier_score(const std::vector<Outcome>& test, std::span<const double> event_prob, double t,
                   const KmCurve& censoring, int cause) {
    if (event_prob.size() != test.size()) throw DomainError("one prediction per test subject required");
    if (test.empty()) throw DomainError("empty test data");
    double sum = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& o = test[i];
        const double p = event_prob[i];
        if (o.time <= t) {
            if (o.status != 1) continue;
            const double y = is_cause_event(o, cause) ? 1.0 : 0.0;
            sum += (y - p) * (y - p) / checked_weight(censoring.left_limit(o.time), o.time);
        } else {
            sum += p * p / checked_weight(censoring(t), t);
        }
    }
    return sum / static_cast<double>(test.size());
}

double brier(const std::vector<Outcome>& test, std::span<const double> survival, double t,
             const KmCurve& censoring) {
    std::vector<double> p(survival.size());
    std::transform(survival.begin(), survival.end(), p.begin(), [](double s) { return 1.0 - s; });
    return brier_score(test, p, t, censoring, 0);
}

double integrated_brier(const std::vector<Outcome>& test, const EventProbability& prob, double tau,
                        const KmCurve& censoring, int cause) {
    if (!(tau > 0.0)) throw DomainError("IBS horizon must be positive");
    if (test.empty()) throw DomainError("empty test data");
    // Test times fix the risk-set composition and jumps of G the weights, so
    // BS only varies through the predictions inside a piece; sub-steps of at
    // most tau / kSubSteps keep the trapezoid close for curved predictions.
    constexpr int kSubSteps = 256;
    std::vector<double> grid{0.0};
    for (const auto& o : test)
        if (o.time > 0.0 && o.time < tau) grid.push_back(o.time);
    for (double u : censoring.times)
        if (u > 0.0 && u < tau) grid.push_back(u);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grid.push_back(tau);

    double integral = 0.0;
    for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
        const double a = grid[g];
        const double b = grid[g + 1];
        const int steps = std::max(1, static_cast<int>(std::ceil((b - a) * kSubSteps / tau)));
        const double w = censoring.left_limit(b);
        double left = brier_at(test, prob, a, a, censoring(a), censoring, cause);
        for (int s = 1; s <= steps; ++s) {
            const double u = s == steps ? b : a + (b - a) * s / steps;
            const double right = brier_at(test, prob, a, u, w, censoring, cause);
            integral += 0.5 * (left + right) * (b - a) / steps;
            left = right;
        }
    }
    return integral / tau;
}

double cindex_td(const std::vector<Outcome>& test, std::span<const double> risk, double tau,
                 const KmCurve& censoring, int cause) {
    if (risk.size() != test.size()) throw DomainError("one risk score per test subject required");
    double concordant = 0.0;
    double comparable = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& oi = test[i];
        if (!is_cause_event(oi, cause) || oi.time > tau) continue;
        const double g = checked_weight(censoring.left_limit(oi.time), oi.time);
        const double w = 1.0 / (g * g);
        for (std::size_t l = 0; l < test.size(); ++l) {
            if (l == i) continue;
            const auto& ol = test[l];
            const bool later = ol.time > oi.time || (ol.time == oi.time && !is_cause_event(ol, cause));
            if (!later) continue;
            comparable += w;
            if (risk[i] > risk[l]) concordant += w;
            else if (risk[i] == risk[l]) concordant += 0.5 * w;
        }
    }
    if (comparable == 0.0) throw DomainError("no comparable pairs for the C-index");
    return concordant / comparable;
}

MetricsReport evaluate_metrics(const std::vector<Outcome>& test, int n_causes,
                               const std::function<EventProbability(int cause)>& prob, const KmCurve& censoring) {
    MetricsReport report;
    report.horizons = quantile_horizons(test);
    const auto taus = report.horizons.values();
    std::size_t censored = 0;
    for (const auto& o : test) censored += o.status == 0 ? 1 : 0;
    report.test_censoring_fraction = static_cast<double>(censored) / static_cast<double>(test.size());
    for (std::size_t h = 0; h < 3; ++h) report.censoring_survival[h] = censoring(taus[h]);

    for (int k = 1; k <= n_causes; ++k) {
        const int metric_cause = n_causes == 1 ? 0 : k;
        const EventProbability p = prob(k);
        CauseMetrics cm;
        cm.cause = k;
        for (std::size_t h = 0; h < 3; ++h) {
            std::vector<double> at_tau(test.size());
            for (std::size_t i = 0; i < test.size(); ++i) at_tau[i] = p(i, taus[h]);
            cm.brier[h] = brier_score(test, at_tau, taus[h], censoring, metric_cause);
            cm.ibs[h] = integrated_brier(test, p, taus[h], censoring, metric_cause);
            cm.cindex[h] = cindex_td(test, at_tau, taus[h], censoring, metric_cause);
        }
        report.causes.push_back(cm);
    }
    return report;
}

}  // namespace pemsurv
