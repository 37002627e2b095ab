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
#include <span>
#include <string>
#include <vector>

#include "pemsurv/ped.hpp"
#include "pemsurv/survdata.hpp"

namespace pemsurv {

/// Product-limit estimate. `survival[i]` is S just after `times[i]`.
struct KmCurve {
    std::vector<double> times;
    std::vector<double> survival;
    std::vector<double> at_risk;
    std::vector<double> events;

    /// S(t), right-continuous; 1 before the first event time.
    double operator()(double t) const;
    /// S(t-).
    double left_limit(double t) const;
};

/// Product-limit estimator with delayed entry: a subject is at risk at t when
/// entry < t <= time. `indicator` marks the counted event.
KmCurve product_limit(std::span<const double> entry, std::span<const double> time, std::span<const int> indicator);

/// Kaplan-Meier of the any-cause event time.
KmCurve km_fit(const SurvivalDataset& ds);

/// Kaplan-Meier of the censoring time (event indicator 1 - status).
KmCurve censoring_km(const std::vector<Outcome>& outcomes);

/// One column of the GLM feature design.
struct DesignColumn {
    std::size_t feature = 0;
    /// Dummy level for categorical features, -1 for numeric ones.
    int level = -1;
    std::string name;
};

/// Piece-wise exponential proportional-hazards Poisson GLM, fitted per
/// transition: log lambda_jk(x) = baseline_k[j] + x' beta_k.
struct PemGlm {
    CutPoints cutpoints;
    /// PED schema (subject features followed by t_j and k).
    FeatureSchema schema;
    std::vector<DesignColumn> columns;
    std::vector<Eigen::VectorXd> baseline;
    std::vector<Eigen::VectorXd> beta;
    int n_causes = 1;
    double ridge = 0.0;
    int iterations = 0;
    bool converged = false;
    double deviance = 0.0;
    double null_deviance = 0.0;
    /// Penalized objective after each IRLS iteration (all transitions).
    std::vector<double> objective_trace;
};

/// Expanded design of subject features (dummy coding for categoricals).
std::vector<DesignColumn> glm_design_columns(const FeatureSchema& ped_schema);

/// IRLS fit with step-halving on the penalized deviance; converges when the
/// gradient norm drops below 1e-8 (at most 50 iterations).
PemGlm glm_fit(const PedDataset& ped, double ridge);

/// Log-hazard for rows in PED layout (t_j selects the interval, k the transition).
Eigen::VectorXd glm_log_hazard(const PemGlm& model, const Eigen::MatrixXd& rows);

/// Poisson deviance of the model on `ped`.
double glm_deviance(const PemGlm& model, const PedDataset& ped);

}  // namespace pemsurv
