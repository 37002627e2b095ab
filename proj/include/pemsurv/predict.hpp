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

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <vector>

#include "pemsurv/baselines.hpp"
#include "pemsurv/boost.hpp"
#include "pemsurv/ped.hpp"

namespace pemsurv {

/// Piece-wise constant hazards of one subject: one row per interval, one
/// column per transition.
struct PiecewiseHazards {
    CutPoints cutpoints;
    Eigen::MatrixXd rates;
};

/// S(t) = exp(-sum_j lambda_j * time spent in interval j). Beyond the last
/// cut-point the last hazard is carried forward.
class SurvivalCurve {
public:
    SurvivalCurve(CutPoints cutpoints, Eigen::VectorXd hazards);

    double operator()(double t) const { return std::exp(-cumulative_hazard(t)); }
    double cumulative_hazard(double t) const;
    bool extrapolated(double t) const { return t > cutpoints_.max(); }

    const CutPoints& cutpoints() const { return cutpoints_; }
    const Eigen::VectorXd& hazards() const { return hazards_; }

private:
    CutPoints cutpoints_;
    Eigen::VectorXd hazards_;
    /// Cumulative hazard at each cut-point.
    std::vector<double> cumulative_;
};

/// All-cause survival and per-cause cumulative incidence under cause-specific
/// piece-wise constant hazards, integrated in closed form per interval.
class CifCurve {
public:
    explicit CifCurve(PiecewiseHazards hazards);

    int n_causes() const { return static_cast<int>(hazards_.rates.cols()); }
    double survival(double t) const;
    /// F_k(t) for k in 1..K.
    double cif(int k, double t) const;
    bool extrapolated(double t) const { return t > hazards_.cutpoints.max(); }
    const PiecewiseHazards& hazards() const { return hazards_; }

private:
    PiecewiseHazards hazards_;
    Eigen::VectorXd total_;
    std::vector<double> survival_at_cut_;
    /// cif_at_cut_(j, k) = F_k(kappa_j).
    Eigen::MatrixXd cif_at_cut_;
};

/// Rows (x, t_j = kappa_j, k) for every interval and transition, ordered by
/// transition then interval.
Eigen::MatrixXd interval_design(const CutPoints& cutpoints, int n_causes, std::span<const double> x);

PiecewiseHazards interval_hazards(const BoostedEnsemble& model, std::span<const double> x);
PiecewiseHazards interval_hazards(const PemGlm& model, std::span<const double> x);

/// Survival from one cause's hazards (others zeroed); cause 0 sums all causes.
SurvivalCurve survival_curve(const PiecewiseHazards& hazards, int cause = 0);

template <class Model>
SurvivalCurve survival_curve(const Model& model, std::span<const double> x, int cause = 0) {
    return survival_curve(interval_hazards(model, x), cause);
}

template <class Model>
CifCurve cif_curves(const Model& model, std::span<const double> x) {
    return CifCurve(interval_hazards(model, x));
}

}  // namespace pemsurv
