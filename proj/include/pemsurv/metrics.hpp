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

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pemsurv/baselines.hpp"
#include "pemsurv/survdata.hpp"

namespace pemsurv {

/// Predicted probability that subject i has experienced the event of
/// interest by time t (1 - S(t) for single-event data, F_k(t) per cause).
using EventProbability = std::function<double(std::size_t subject, double t)>;

struct Horizons {
    double q25 = 0.0;
    double q50 = 0.0;
    double q75 = 0.0;

    std::array<double, 3> values() const { return {q25, q50, q75}; }
    static constexpr std::array<const char*, 3> labels() { return {"Q25", "Q50", "Q75"}; }
};

/// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double p);

/// 25/50/75% quantiles of the observed (any-cause) event times.
Horizons quantile_horizons(const std::vector<Outcome>& test);
Horizons quantile_horizons(const SurvivalDataset& test);

/// IPCW Brier score at t for the event probability predictions
/// `event_prob[i]` (cause 0 counts any event). `censoring` is the
/// Kaplan-Meier of the censoring times; subjects censored before t
/// contribute zero.
double brier_score(const std::vector<Outcome>& test, std::span<const double> event_prob, double t,
                   const KmCurve& censoring, int cause = 0);

/// Brier score in terms of predicted survival S_i(t) for single-event data.
double brier(const std::vector<Outcome>& test, std::span<const double> survival, double t,
             const KmCurve& censoring);

/// (1/tau) * integral of the Brier score over [0, tau], trapezoidal on the
/// grid of distinct test times. Each piece keeps the risk-set composition
/// of its left end, so jumps in the score at observed times are exact.
double integrated_brier(const std::vector<Outcome>& test, const EventProbability& prob, double tau,
                        const KmCurve& censoring, int cause = 0);

/// IPCW truncated concordance for `cause` (0: any event) with comparable
/// pairs t_i < t_l (or tied times where l is not a cause event), t_i <= tau,
/// weights G(t_i-)^-2, and half credit for tied risks.
double cindex_td(const std::vector<Outcome>& test, std::span<const double> risk, double tau,
                 const KmCurve& censoring, int cause = 0);

struct CauseMetrics {
    int cause = 1;
    std::array<double, 3> brier{};
    std::array<double, 3> ibs{};
    std::array<double, 3> cindex{};
};

struct MetricsReport {
    Horizons horizons;
    std::vector<CauseMetrics> causes;
    /// G(tau) at each horizon.
    std::array<double, 3> censoring_survival{};
    double test_censoring_fraction = 0.0;
};

/// Brier, IBS and C-index at Q25/Q50/Q75 for every cause. `prob(cause)`
/// yields the event-probability predictor of one cause.
MetricsReport evaluate_metrics(const std::vector<Outcome>& test, int n_causes,
                               const std::function<EventProbability(int cause)>& prob,
                               const KmCurve& censoring);

}  // namespace pemsurv
