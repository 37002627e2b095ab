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

#include "pemsurv/predict.hpp"

#include <algorithm>
#include <cmath>

#include "pemsurv/error.hpp"

namespace pemsurv {

SurvivalCurve::SurvivalCurve(CutPoints cutpoints, Eigen::VectorXd hazards)
    : cutpoints_(std::move(cutpoints)), hazards_(std::move(hazards)) {
    const std::size_t J = cutpoints_.n_intervals();
    if (static_cast<std::size_t>(hazards_.size()) != J) throw DomainError("one hazard per interval required");
    if ((hazards_.array() < 0.0).any() || !hazards_.allFinite())
        throw DomainError("hazards must be finite and non-negative");
    cumulative_.assign(J + 1, 0.0);
    for (std::size_t j = 1; j <= J; ++j)
        cumulative_[j] = cumulative_[j - 1] + hazards_(static_cast<Eigen::Index>(j - 1)) * cutpoints_.length(j);
}

double SurvivalCurve::cumulative_hazard(double t) const {
    if (t <= 0.0) return 0.0;
    const std::size_t J = cutpoints_.n_intervals();
    const std::size_t j = std::min(cutpoints_.interval_of(t), J);
    return cumulative_[j - 1] + hazards_(static_cast<Eigen::Index>(j - 1)) * (t - cutpoints_.lower(j));
}

CifCurve::CifCurve(PiecewiseHazards hazards) : hazards_(std::move(hazards)) {
    const auto& cp = hazards_.cutpoints;
    const std::size_t J = cp.n_intervals();
    const auto K = hazards_.rates.cols();
    if (static_cast<std::size_t>(hazards_.rates.rows()) != J || K < 1)
        throw DomainError("hazard matrix must have one row per interval");
    if ((hazards_.rates.array() < 0.0).any() || !hazards_.rates.allFinite())
        throw DomainError("hazards must be finite and non-negative");
    total_ = hazards_.rates.rowwise().sum();
    survival_at_cut_.assign(J + 1, 1.0);
    cif_at_cut_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(J + 1), K);
    for (std::size_t j = 1; j <= J; ++j) {
        const auto r = static_cast<Eigen::Index>(j - 1);
        const double s0 = survival_at_cut_[j - 1];
        const double len = cp.length(j);
        // S(kappa_{j-1}) - S(kappa_j), computed without cancellation
        const double drop = -s0 * std::expm1(-total_(r) * len);
        survival_at_cut_[j] = s0 - drop;
        for (Eigen::Index k = 0; k < K; ++k) {
            const double share = total_(r) > 0.0 ? hazards_.rates(r, k) / total_(r) : 0.0;
            cif_at_cut_(static_cast<Eigen::Index>(j), k) = cif_at_cut_(r, k) + share * drop;
        }
    }
}

double CifCurve::survival(double t) const {
    if (t <= 0.0) return 1.0;
    const auto& cp = hazards_.cutpoints;
    const std::size_t j = std::min(cp.interval_of(t), cp.n_intervals());
    return survival_at_cut_[j - 1] * std::exp(-total_(static_cast<Eigen::Index>(j - 1)) * (t - cp.lower(j)));
}

double CifCurve::cif(int k, double t) const {
    if (k < 1 || k > n_causes()) throw DomainError("cause out of range");
    if (t <= 0.0) return 0.0;
    const auto& cp = hazards_.cutpoints;
    const std::size_t j = std::min(cp.interval_of(t), cp.n_intervals());
    const auto r = static_cast<Eigen::Index>(j - 1);
    const double s0 = survival_at_cut_[j - 1];
    const double drop = -s0 * std::expm1(-total_(r) * (t - cp.lower(j)));
    const double share = total_(r) > 0.0 ? hazards_.rates(r, k - 1) / total_(r) : 0.0;
    return cif_at_cut_(r, k - 1) + share * drop;
}

Eigen::MatrixXd interval_design(const CutPoints& cutpoints, int n_causes, std::span<const double> x) {
    const std::size_t J = cutpoints.n_intervals();
    const auto p = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(J) * n_causes, p + 2);
    Eigen::Index r = 0;
    for (int k = 1; k <= n_causes; ++k) {
        for (std::size_t j = 1; j <= J; ++j, ++r) {
            for (Eigen::Index f = 0; f < p; ++f) rows(r, f) = x[static_cast<std::size_t>(f)];
            rows(r, p) = cutpoints.upper(j);
            rows(r, p + 1) = k;
        }
    }
    return rows;
}

namespace {
PiecewiseHazards from_log_hazard(const CutPoints& cp, int K, const Eigen::VectorXd& eta) {
    const auto J = static_cast<Eigen::Index>(cp.n_intervals());
    PiecewiseHazards h{cp, Eigen::MatrixXd(J, K)};
    for (int k = 0; k < K; ++k)
        for (Eigen::Index j = 0; j < J; ++j) h.rates(j, k) = std::exp(eta(k * J + j));
    return h;
}

void check_width(std::size_t schema_size, std::span<const double> x) {
    if (x.size() + 2 != schema_size)
        throw SchemaError("feature row has " + std::to_string(x.size()) + " values, model expects " +
                          std::to_string(schema_size - 2));
}
}  // namespace

PiecewiseHazards interval_hazards(const BoostedEnsemble& model, std::span<const double> x) {
    check_width(model.schema.size(), x);
    const auto rows = interval_design(model.cutpoints, model.n_causes, x);
    return from_log_hazard(model.cutpoints, model.n_causes, predict_margin(model, rows));
}

PiecewiseHazards interval_hazards(const PemGlm& model, std::span<const double> x) {
    check_width(model.schema.size(), x);
    const auto rows = interval_design(model.cutpoints, model.n_causes, x);
    return from_log_hazard(model.cutpoints, model.n_causes, glm_log_hazard(model, rows));
}

SurvivalCurve survival_curve(const PiecewiseHazards& hazards, int cause) {
    const auto K = hazards.rates.cols();
    if (cause < 0 || cause > K) throw DomainError("cause out of range");
    Eigen::VectorXd h = cause == 0 ? Eigen::VectorXd(hazards.rates.rowwise().sum())
                                   : Eigen::VectorXd(hazards.rates.col(cause - 1));
    return SurvivalCurve(hazards.cutpoints, std::move(h));
}

}  // namespace pemsurv
