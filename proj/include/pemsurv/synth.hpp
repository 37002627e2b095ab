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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pemsurv/predict.hpp"
#include "pemsurv/survdata.hpp"

namespace pemsurv {

enum class Scenario { tve, tve_cr };

Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);

struct SynthConfig {
    std::size_t n = 1000;
    Scenario scenario = Scenario::tve;
    /// Uniform(0,1) noise features; defaults to 20 (tve) or 10 (tve_cr).
    std::optional<int> n_noise;
    /// Target censoring fraction; defaults to 0.33 (tve) or 0.23 (tve_cr).
    /// 0 disables random censoring.
    std::optional<double> censoring_rate;
    std::uint64_t seed = 1;
    /// Width of the grid on which the true hazard is held constant.
    double resolution = 0.01;
    /// Follow-up ends here; subjects without an event are censored.
    double max_time = 20.0;
    /// Debug hook: log-hazard identically 0, so T ~ Exp(1).
    bool zero_log_hazard = false;

    int noise_features() const;
    double target_censoring() const;
    int n_causes() const { return scenario == Scenario::tve_cr ? 2 : 1; }
};

/// True hazards of a generated dataset as functions of the subject features.
class GroundTruth {
public:
    GroundTruth() = default;
    explicit GroundTruth(const SynthConfig& cfg);

    int n_causes() const { return n_causes_; }

    /// g_k(x, t) as defined by the scenario.
    double log_hazard(int cause, std::span<const double> x, double t) const;
    /// Hazards held constant on each grid cell at their midpoint value, i.e.
    /// exactly the hazard the event times were drawn from.
    PiecewiseHazards grid_hazards(std::span<const double> x) const;
    double survival(std::span<const double> x, double t) const;
    double cif(int cause, std::span<const double> x, double t) const;

private:
    Scenario scenario_ = Scenario::tve;
    int n_causes_ = 1;
    double resolution_ = 0.01;
    double max_time_ = 20.0;
    bool zero_ = false;
};

struct SynthResult {
    SurvivalDataset data;
    GroundTruth truth;
    /// Scale c of the censoring law C = c * U(0,1); infinite when disabled.
    double censoring_scale = 0.0;
    double achieved_censoring = 0.0;
    std::vector<std::string> warnings;
};

SynthResult generate(const SynthConfig& cfg);

/// Inverts H(T) = target for a hazard that is constant on cells
/// (m h, (m+1) h] at value hazard((m + 1/2) h). Returns +inf when H(max_time)
/// stays below target.
double sample_event_time(const std::function<double(double)>& hazard, double target, double resolution,
                         double max_time);

}  // namespace pemsurv
