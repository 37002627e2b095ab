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

#include "pemsurv/baselines.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pemsurv/error.hpp"
#include "pemsurv/poisson.hpp"

namespace pemsurv {

double KmCurve::operator()(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KmCurve::left_limit(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

KmCurve product_limit(std::span<const double> entry, std::span<const double> time, std::span<const int> indicator) {
    const std::size_t n = time.size();
    if (entry.size() != n || indicator.size() != n) throw DomainError("product_limit: length mismatch");
    std::vector<double> ev_sorted;
    for (std::size_t i = 0; i < n; ++i)
        if (indicator[i] == 1) ev_sorted.push_back(time[i]);
    std::sort(ev_sorted.begin(), ev_sorted.end());
    std::vector<double> event_times = ev_sorted;
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

    std::vector<double> sorted_time(time.begin(), time.end());
    std::vector<double> sorted_entry(entry.begin(), entry.end());
    std::sort(sorted_time.begin(), sorted_time.end());
    std::sort(sorted_entry.begin(), sorted_entry.end());

    KmCurve km;
    double s = 1.0;
    for (double t : event_times) {
        // at risk: entry < t and time >= t
        const auto exited = std::lower_bound(sorted_time.begin(), sorted_time.end(), t) - sorted_time.begin();
        const auto entered = std::lower_bound(sorted_entry.begin(), sorted_entry.end(), t) - sorted_entry.begin();
        const double at_risk = static_cast<double>(entered - exited);
        const auto range = std::equal_range(ev_sorted.begin(), ev_sorted.end(), t);
        const double d = static_cast<double>(range.second - range.first);
        if (at_risk > 0.0) s *= 1.0 - d / at_risk;
        km.times.push_back(t);
        km.survival.push_back(s);
        km.at_risk.push_back(at_risk);
        km.events.push_back(d);
    }
    return km;
}

KmCurve km_fit(const SurvivalDataset& ds) {
    if (ds.n_causes > 1) throw DomainError("the km engine supports single-event data only");
    const auto out = outcomes(ds);
    std::vector<double> entry, time;
    std::vector<int> ind;
    for (const auto& o : out) {
        entry.push_back(o.entry);
        time.push_back(o.time);
        ind.push_back(o.status);
    }
    return product_limit(entry, time, ind);
}

KmCurve censoring_km(const std::vector<Outcome>& out) {
    std::vector<double> entry, time;
    std::vector<int> ind;
    for (const auto& o : out) {
        entry.push_back(0.0);
        time.push_back(o.time);
        ind.push_back(1 - o.status);
    }
    return product_limit(entry, time, ind);
}

std::vector<DesignColumn> glm_design_columns(const FeatureSchema& ped_schema) {
    std::vector<DesignColumn> cols;
    const std::size_t p = ped_schema.size() >= 2 ? ped_schema.size() - 2 : 0;
    for (std::size_t f = 0; f < p; ++f) {
        const auto& spec = ped_schema[f];
        if (spec.is_categorical()) {
            for (std::size_t l = 1; l < spec.levels.size(); ++l)
                cols.push_back({f, static_cast<int>(l), spec.name + "=" + spec.levels[l]});
        } else {
            cols.push_back({f, -1, spec.name});
        }
    }
    return cols;
}

namespace {

Eigen::MatrixXd expand_design(const std::vector<DesignColumn>& cols, const Eigen::MatrixXd& features,
                              const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto f = static_cast<Eigen::Index>(cols[c].feature);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const double v = features(rows[r], f);
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                cols[c].level < 0 ? v : (v == cols[c].level ? 1.0 : 0.0);
        }
    }
    return X;
}

struct TransitionFit {
    Eigen::VectorXd baseline;
    Eigen::VectorXd beta;
    int iterations = 0;
    double deviance = 0.0;
    double null_deviance = 0.0;
    std::vector<double> trace;
};

TransitionFit fit_transition(const Eigen::MatrixXd& X, const Eigen::VectorXi& interval, const Eigen::ArrayXd& y,
                             const Eigen::ArrayXd& log_off, std::size_t J, double ridge) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const auto Ji = static_cast<Eigen::Index>(J);

    Eigen::VectorXd events = Eigen::VectorXd::Zero(Ji);
    Eigen::VectorXd exposure = Eigen::VectorXd::Zero(Ji);
    for (Eigen::Index r = 0; r < n; ++r) {
        events(interval(r) - 1) += y(r);
        exposure(interval(r) - 1) += std::exp(log_off(r));
    }
    if (ridge == 0.0) {
        for (Eigen::Index j = 0; j < Ji; ++j)
            if (exposure(j) > 0.0 && events(j) == 0.0)
                throw ConvergenceError("interval " + std::to_string(j + 1) +
                                       " has no events: baseline diverges (separation); use ridge > 0");
    }

    TransitionFit fit;
    fit.baseline.resize(Ji);
    for (Eigen::Index j = 0; j < Ji; ++j)
        fit.baseline(j) = exposure(j) > 0.0 ? std::log(std::max(events(j), 0.5) / exposure(j)) : 0.0;
    fit.beta = Eigen::VectorXd::Zero(p);

    // Null model: occurrence/exposure per interval.
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index j = interval(r) - 1;
        const double mu = events(j) > 0.0 ? std::exp(log_off(r)) * events(j) / exposure(j) : 0.0;
        fit.null_deviance += y(r) == 0.0 ? 2.0 * mu : poisson_unit_deviance(y(r), mu);
    }

    auto eta_of = [&](const Eigen::VectorXd& b0, const Eigen::VectorXd& b) {
        Eigen::ArrayXd eta = (X * b).array() + log_off;
        for (Eigen::Index r = 0; r < n; ++r) eta(r) += b0(interval(r) - 1);
        return eta;
    };
    // Penalized negative log-likelihood (up to constants).
    auto objective = [&](const Eigen::ArrayXd& eta, const Eigen::VectorXd& b0, const Eigen::VectorXd& b) {
        return (eta.exp() - y * eta).sum() + 0.5 * ridge * (b0.squaredNorm() + b.squaredNorm());
    };

    Eigen::ArrayXd eta = eta_of(fit.baseline, fit.beta);
    double obj = objective(eta, fit.baseline, fit.beta);
    constexpr int kMaxIter = 50;
    bool converged = false;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        const Eigen::ArrayXd mu = eta.exp();
        const Eigen::ArrayXd resid = mu - y;
        Eigen::VectorXd grad0 = ridge * fit.baseline;
        Eigen::VectorXd d = Eigen::VectorXd::Constant(Ji, ridge);
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(Ji, p);
        for (Eigen::Index r = 0; r < n; ++r) {
            const Eigen::Index j = interval(r) - 1;
            grad0(j) += resid(r);
            d(j) += mu(r);
            B.row(j) += mu(r) * X.row(r);
        }
        Eigen::VectorXd grad1 = X.transpose() * resid.matrix() + ridge * fit.beta;
        const double gnorm = std::sqrt(grad0.squaredNorm() + grad1.squaredNorm());
        fit.iterations = iter;
        if (!std::isfinite(gnorm)) break;
        if (gnorm < 1e-8) {
            converged = true;
            break;
        }
        for (Eigen::Index j = 0; j < Ji; ++j) d(j) = std::max(d(j), 1e-300);

        // Newton step via the Schur complement of the diagonal interval block.
        Eigen::MatrixXd C = X.transpose() * mu.matrix().asDiagonal() * X;
        C.diagonal().array() += ridge;
        const Eigen::VectorXd dinv = d.cwiseInverse();
        Eigen::MatrixXd S = C - B.transpose() * dinv.asDiagonal() * B;
        Eigen::VectorXd rhs = -grad1 + B.transpose() * (dinv.asDiagonal() * grad0);
        Eigen::VectorXd step1 = p > 0 ? Eigen::VectorXd(S.ldlt().solve(rhs)) : Eigen::VectorXd();
        Eigen::VectorXd step0 = -(dinv.asDiagonal() * (grad0 + B * step1));

        double scale = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving) {
            Eigen::VectorXd b0 = fit.baseline + scale * step0;
            Eigen::VectorXd b = fit.beta + scale * step1;
            Eigen::ArrayXd e = eta_of(b0, b);
            const double o = objective(e, b0, b);
            if (std::isfinite(o) && o <= obj + 1e-12 * std::abs(obj)) {
                improved = o < obj || scale == 1.0;
                fit.baseline = std::move(b0);
                fit.beta = std::move(b);
                eta = std::move(e);
                obj = o;
                break;
            }
            scale *= 0.5;
        }
        fit.trace.push_back(obj);
        if (!improved) {
            // No descent left at machine precision: treat as converged when the
            // gradient is tiny relative to the data scale.
            converged = gnorm < 1e-6 * std::max(1.0, y.sum());
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("IRLS did not converge (separation or divergence); use ridge > 0");
    const Eigen::ArrayXd mu = eta.exp();
    for (Eigen::Index r = 0; r < n; ++r) fit.deviance += poisson_unit_deviance(y(r), mu(r));
    return fit;
}

}  // namespace

PemGlm glm_fit(const PedDataset& ped, double ridge) {
    if (!(ridge >= 0.0)) throw DomainError("ridge must be >= 0");
    if (ped.size() == 0) throw DomainError("cannot fit on an empty PED");
    PemGlm model;
    model.cutpoints = ped.cutpoints;
    model.schema = ped.schema;
    model.columns = glm_design_columns(ped.schema);
    model.n_causes = ped.n_causes;
    model.ridge = ridge;
    const std::size_t J = ped.cutpoints.n_intervals();
    model.converged = true;
    for (int k = 1; k <= ped.n_causes; ++k) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index r = 0; r < ped.size(); ++r)
            if (ped.transition(r) == k) rows.push_back(r);
        const Eigen::MatrixXd X = expand_design(model.columns, ped.features, rows);
        Eigen::VectorXi interval(static_cast<Eigen::Index>(rows.size()));
        Eigen::ArrayXd y(static_cast<Eigen::Index>(rows.size()));
        Eigen::ArrayXd log_off(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(r);
            interval(i) = ped.interval(rows[r]);
            y(i) = ped.label(rows[r]);
            log_off(i) = std::log(ped.toff(rows[r]));
        }
        auto fit = fit_transition(X, interval, y, log_off, J, ridge);
        model.baseline.push_back(std::move(fit.baseline));
        model.beta.push_back(std::move(fit.beta));
        model.iterations = std::max(model.iterations, fit.iterations);
        model.deviance += fit.deviance;
        model.null_deviance += fit.null_deviance;
        model.objective_trace.insert(model.objective_trace.end(), fit.trace.begin(), fit.trace.end());
    }
    return model;
}

Eigen::VectorXd glm_log_hazard(const PemGlm& model, const Eigen::MatrixXd& rows) {
    if (static_cast<std::size_t>(rows.cols()) != model.schema.size())
        throw SchemaError("prediction rows do not match the GLM schema");
    const auto tj_col = static_cast<Eigen::Index>(model.schema.size() - 2);
    const auto k_col = static_cast<Eigen::Index>(model.schema.size() - 1);
    const std::size_t J = model.cutpoints.n_intervals();
    Eigen::VectorXd out(rows.rows());
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        const int k = static_cast<int>(rows(r, k_col));
        if (k < 1 || k > model.n_causes) throw DomainError("transition index out of range");
        const std::size_t j = std::min(model.cutpoints.interval_of(rows(r, tj_col)), J);
        double eta = model.baseline[static_cast<std::size_t>(k - 1)](static_cast<Eigen::Index>(j - 1));
        const auto& beta = model.beta[static_cast<std::size_t>(k - 1)];
        for (std::size_t c = 0; c < model.columns.size(); ++c) {
            const auto& col = model.columns[c];
            const double v = rows(r, static_cast<Eigen::Index>(col.feature));
            if (model.schema[col.feature].is_categorical() &&
                !(v >= 0 && v < static_cast<double>(model.schema[col.feature].levels.size())))
                throw SchemaError("unknown categorical code for feature '" + model.schema[col.feature].name + "'");
            eta += beta(static_cast<Eigen::Index>(c)) * (col.level < 0 ? v : (v == col.level ? 1.0 : 0.0));
        }
        out(r) = eta;
    }
    return out;
}

double glm_deviance(const PemGlm& model, const PedDataset& ped) {
    const Eigen::VectorXd eta = glm_log_hazard(model, ped.features);
    double dev = 0.0;
    for (Eigen::Index r = 0; r < ped.size(); ++r)
        dev += poisson_unit_deviance(ped.label(r), std::exp(eta(r)) * ped.toff(r));
    return dev;
}

}  // namespace pemsurv
