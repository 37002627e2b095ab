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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pemsurv/survdata.hpp"

namespace pemsurv {

/// Interval boundaries 0 = kappa_0 < kappa_1 < ... < kappa_J. Interval j
/// (1-based) is the half-open (kappa_{j-1}, kappa_j].
class CutPoints {
public:
    CutPoints() : kappa_{0.0, 1.0} {}
    /// Takes the full boundary list including the leading 0.
    explicit CutPoints(std::vector<double> kappa);
    /// Prepends 0 to a strictly increasing list of positive cut-points.
    static CutPoints from_positive(std::vector<double> cuts);

    std::size_t n_intervals() const { return kappa_.size() - 1; }
    double lower(std::size_t j) const { return kappa_[j - 1]; }
    double upper(std::size_t j) const { return kappa_[j]; }
    double length(std::size_t j) const { return kappa_[j] - kappa_[j - 1]; }
    double max() const { return kappa_.back(); }
    const std::vector<double>& values() const { return kappa_; }

    /// j with t in (kappa_{j-1}, kappa_j]; 1 for t <= 0 and J + 1 beyond max().
    std::size_t interval_of(double t) const;

    friend bool operator==(const CutPoints&, const CutPoints&) = default;

private:
    std::vector<double> kappa_;
};

struct CutStrategy {
    enum class Kind { all_events, subsample, explicit_list };
    Kind kind = Kind::all_events;
    std::size_t subsample_size = 0;
    std::uint64_t seed = 0;
    std::vector<double> cuts;

    static CutStrategy all_events() { return {}; }
    static CutStrategy subsample(long long n, std::uint64_t seed);
    static CutStrategy explicit_list(std::vector<double> cuts);
};

/// Cut-points at the unique event times (any cause) of `ds`, or of a
/// uniform sub-sample of its subjects. The maximum follow-up time of the
/// full data is appended when it exceeds the last event time.
CutPoints make_cutpoints(const SurvivalDataset& ds, const CutStrategy& strategy);

/// Subject indices (group_subjects order) drawn for a sub-sample strategy.
std::vector<std::size_t> subsample_subjects(std::size_t n_subjects, std::size_t n_sub, std::uint64_t seed);

/// View of one augmented row.
struct PedRow {
    std::string subject_id;
    int interval = 0;
    double tj = 0.0;
    double toff = 0.0;
    double label = 0.0;
    int transition = 1;
    Eigen::VectorXd features;
};

struct PedWarning {
    std::string subject_id;
    int interval = 0;
    std::string message;
};

/// Piece-wise exponential data: one row per subject, interval and
/// transition at risk. The last two feature columns are t_j and k.
struct PedDataset {
    std::vector<std::string> subject_ids;
    Eigen::VectorXi subject;
    Eigen::VectorXi interval;
    Eigen::VectorXd tj;
    Eigen::VectorXd toff;
    Eigen::VectorXd label;
    Eigen::VectorXi transition;
    Eigen::MatrixXd features;
    CutPoints cutpoints;
    FeatureSchema schema;
    int n_causes = 1;
    std::vector<PedWarning> warnings;

    Eigen::Index size() const { return toff.size(); }
    std::size_t n_features() const { return schema.size(); }
    std::size_t time_feature() const { return schema.size() - 2; }
    std::size_t transition_feature() const { return schema.size() - 1; }
    PedRow row(Eigen::Index i) const;
    /// Rows whose index is in `rows`, keeping cut-points and schema.
    PedDataset select(const std::vector<Eigen::Index>& rows) const;
};

inline constexpr const char* kTimeFeature = "tj";
inline constexpr const char* kTransitionFeature = "k";

/// Schema of the augmented data: subject features followed by t_j and k.
FeatureSchema ped_schema(const FeatureSchema& subject_schema);

struct TransformOptions {
    /// Administratively censor follow-up at max(cutpoints) instead of
    /// raising a CoverageError.
    bool censor_at_last_cut = false;
};

/// Survival to Poisson data augmentation. Rows are ordered by
/// (transition, subject, interval).
PedDataset transform(const SurvivalDataset& ds, const CutPoints& cp, const TransformOptions& options = {});

/// Sum over rows of label * log(hazard) - hazard * toff, the piece-wise
/// exponential survival log-likelihood.
double ped_loglik(const PedDataset& ped, std::span<const double> hazards);

/// Poisson log-likelihood with mean hazard * toff. Differs from ped_loglik
/// by the constant sum of label * log(toff) - log(label!).
double poisson_loglik(const PedDataset& ped, std::span<const double> hazards);

}  // namespace pemsurv
