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

#include "pemsurv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pemsurv/error.hpp"
#include "pemsurv/random.hpp"

namespace pemsurv {

Scenario parse_scenario(const std::string& name) {
    if (name == "tve") return Scenario::tve;
    if (name == "tve_cr") return Scenario::tve_cr;
    throw DomainError("unknown scenario '" + name + "' (expected tve or tve_cr)");
}

std::string scenario_name(Scenario s) { return s == Scenario::tve ? "tve" : "tve_cr"; }

int SynthConfig::noise_features() const {
    if (n_noise) return *n_noise;
    return scenario == Scenario::tve ? 20 : 10;
}

double SynthConfig::target_censoring() const {
    if (censoring_rate) return *censoring_rate;
    return scenario == Scenario::tve ? 0.33 : 0.23;
}

namespace {

// Smooth bump in (x0, t): the peak moves from t = 1 (x0 = -1) to t = 3 (x0 = 1).
double f0(double x0, double t) {
    const double d = t - 2.0 - x0;
    return 0.5 * std::exp(-0.5 * d * d);
}

double f2(double x2, double t) { return std::sin(x2) * std::log1p(t); }

double f3(double x3, double t) { return 1.5 * std::tanh(x3 * std::sqrt(t)); }

constexpr double kIntercept1 = -2.2;
constexpr double kIntercept2 = -3.0;

}  // namespace

GroundTruth::GroundTruth(const SynthConfig& cfg)
    : scenario_(cfg.scenario),
      n_causes_(cfg.n_causes()),
      resolution_(cfg.resolution),
      max_time_(cfg.max_time),
      zero_(cfg.zero_log_hazard) {}

double GroundTruth::log_hazard(int cause, std::span<const double> x, double t) const {
    if (cause < 1 || cause > n_causes_) throw DomainError("cause out of range");
    if (zero_) return 0.0;
    if (cause == 1) return kIntercept1 + 6.0 * f0(x[0], t) - 0.1 * x[1] + f2(x[2], t) + f3(x[3], t);
    return kIntercept2 + f0(x[0], t) + 2.0 * x[4] - 0.1 * x[5];
}

PiecewiseHazards GroundTruth::grid_hazards(std::span<const double> x) const {
    const auto cells = static_cast<std::size_t>(std::ceil(max_time_ / resolution_ - 1e-9));
    std::vector<double> kappa(cells + 1);
    for (std::size_t m = 0; m <= cells; ++m) kappa[m] = std::min(static_cast<double>(m) * resolution_, max_time_);
    PiecewiseHazards h{CutPoints(std::move(kappa)), Eigen::MatrixXd(static_cast<Eigen::Index>(cells), n_causes_)};
    for (std::size_t m = 0; m < cells; ++m) {
        const double mid = (static_cast<double>(m) + 0.5) * resolution_;
        for (int k = 1; k <= n_causes_; ++k)
            h.rates(static_cast<Eigen::Index>(m), k - 1) = std::exp(log_hazard(k, x, mid));
    }
    return h;
}

double GroundTruth::survival(std::span<const double> x, double t) const { return CifCurve(grid_hazards(x)).survival(t); }

double GroundTruth::cif(int cause, std::span<const double> x, double t) const {
    return CifCurve(grid_hazards(x)).cif(cause, t);
}

double sample_event_time(const std::function<double(double)>& hazard, double target, double resolution,
                         double max_time) {
    if (!(resolution > 0.0)) throw DomainError("grid resolution must be positive");
    double H = 0.0;
    for (std::size_t m = 0;; ++m) {
        const double lo = static_cast<double>(m) * resolution;
        if (lo >= max_time) break;
        const double hi = std::min(lo + resolution, max_time);
        const double rate = hazard((static_cast<double>(m) + 0.5) * resolution);
        const double next = H + rate * (hi - lo);
        if (next >= target) return lo + (target - H) / rate;
        H = next;
    }
    return std::numeric_limits<double>::infinity();
}

namespace {

double censored_fraction(const std::vector<double>& T, const std::vector<double>& V, double c) {
    std::size_t censored = 0;
    for (std::size_t i = 0; i < T.size(); ++i) censored += V[i] * c < T[i] ? 1 : 0;
    return static_cast<double>(censored) / static_cast<double>(T.size());
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
    if (cfg.n < 1) throw DomainError("n must be >= 1");
    if (!(cfg.resolution > 0.0)) throw DomainError("grid resolution must be positive");
    if (!(cfg.max_time > 0.0)) throw DomainError("max_time must be positive");
    const double target = cfg.target_censoring();
    if (!(target >= 0.0 && target < 1.0)) throw DomainError("censoring rate must lie in [0, 1)");
    const int n_noise = cfg.noise_features();
    if (n_noise < 0) throw DomainError("noise feature count must be >= 0");
    const int K = cfg.n_causes();

    SynthResult out;
    out.truth = GroundTruth(cfg);
    auto& ds = out.data;
    ds.n_causes = K;
    const int n_signal = K == 2 ? 6 : 4;
    for (int f = 0; f < n_signal; ++f) ds.schema.features.push_back({"x" + std::to_string(f), FeatureKind::numeric, {}});
    for (int f = 1; f <= n_noise; ++f) ds.schema.features.push_back({"noise" + std::to_string(f), FeatureKind::numeric, {}});

    std::vector<double> T(cfg.n);
    std::vector<int> cause(cfg.n, 0);
    std::vector<double> V(cfg.n);
    ds.spans.resize(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
        // one stream per subject, so draws do not depend on generation order
        Rng rng(derive_seed(cfg.seed, i));
        auto& x = ds.spans[i].features;
        x.reserve(static_cast<std::size_t>(n_signal + n_noise));
        x.push_back(rng.uniform() < 0.5 ? -1.0 : 1.0);
        x.push_back(rng.uniform(0.0, 20.0));  // wide enough that -0.1 * x1 moves the log-hazard by 2
        x.push_back(rng.uniform(-3.0, 3.0));
        x.push_back(rng.uniform(-1.0, 1.0));
        if (K == 2) {
            x.push_back(rng.uniform(0.0, 1.0));
            x.push_back(rng.uniform(0.0, 5.0));
        }
        for (int f = 0; f < n_noise; ++f) x.push_back(rng.uniform());

        T[i] = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= K; ++k) {
            const double e = -std::log(rng.uniform_open());
            const double t = sample_event_time(
                [&](double u) { return std::exp(out.truth.log_hazard(k, x, u)); }, e, cfg.resolution, cfg.max_time);
            if (t < T[i]) {
                T[i] = t;
                cause[i] = k;
            }
        }
        V[i] = rng.uniform_open();
        ds.spans[i].subject_id = std::to_string(i + 1);
    }

    double c = std::numeric_limits<double>::infinity();
    if (target > 0.0) {
        // censored fraction is non-increasing in c; bisect on the realized draws
        double lo = 0.0;
        double hi = 2.0 * cfg.max_time;
        for (int it = 0; it < 200 && censored_fraction(T, V, hi) > target; ++it) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (censored_fraction(T, V, mid) > target) lo = mid;
            else hi = mid;
        }
        c = hi;
    }
    out.censoring_scale = c;

    std::size_t censored = 0;
    for (std::size_t i = 0; i < cfg.n; ++i) {
        auto& s = ds.spans[i];
        const double ci = std::isfinite(c) ? V[i] * c : std::numeric_limits<double>::infinity();
        const double exit = std::min({T[i], ci, cfg.max_time});
        s.t_start = 0.0;
        s.t_end = exit;
        s.status = T[i] <= ci && std::isfinite(T[i]) ? 1 : 0;
        s.cause = s.status == 1 ? cause[i] : 0;
        censored += s.status == 0 ? 1 : 0;
    }
    out.achieved_censoring = static_cast<double>(censored) / static_cast<double>(cfg.n);
    if (std::abs(out.achieved_censoring - target) > 0.02)
        out.warnings.push_back("censoring calibration reached " + std::to_string(out.achieved_censoring) +
                               " instead of " + std::to_string(target));
    return out;
}

}  // namespace pemsurv
