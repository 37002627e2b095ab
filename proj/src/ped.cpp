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

#include "pemsurv/ped.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pemsurv/error.hpp"
#include "pemsurv/random.hpp"

namespace pemsurv {

CutPoints::CutPoints(std::vector<double> kappa) : kappa_(std::move(kappa)) {
    if (kappa_.size() < 2) throw DomainError("cut-points need at least one positive value");
    if (kappa_.front() != 0.0) throw DomainError("first cut-point must be 0");
    for (std::size_t i = 1; i < kappa_.size(); ++i) {
        if (!std::isfinite(kappa_[i]) || !(kappa_[i] > kappa_[i - 1]))
            throw DomainError("cut-points must be finite and strictly increasing");
    }
}

CutPoints CutPoints::from_positive(std::vector<double> cuts) {
    cuts.insert(cuts.begin(), 0.0);
    return CutPoints(std::move(cuts));
}

std::size_t CutPoints::interval_of(double t) const {
    if (t <= 0.0) return 1;
    // first kappa_j >= t
    auto it = std::lower_bound(kappa_.begin() + 1, kappa_.end(), t);
    return static_cast<std::size_t>(it - kappa_.begin());
}

CutStrategy CutStrategy::subsample(long long n, std::uint64_t seed) {
    if (n <= 0) throw DomainError("sub-sample size must be positive");
    CutStrategy s;
    s.kind = Kind::subsample;
    s.subsample_size = static_cast<std::size_t>(n);
    s.seed = seed;
    return s;
}

CutStrategy CutStrategy::explicit_list(std::vector<double> cuts) {
    CutStrategy s;
    s.kind = Kind::explicit_list;
    s.cuts = std::move(cuts);
    return s;
}

std::vector<std::size_t> subsample_subjects(std::size_t n_subjects, std::size_t n_sub, std::uint64_t seed) {
    std::vector<std::size_t> idx(n_subjects);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n_sub >= n_subjects) return idx;
    Rng rng(seed);
    // partial Fisher-Yates
    for (std::size_t i = 0; i < n_sub; ++i) {
        const std::size_t r = i + static_cast<std::size_t>(rng.below(n_subjects - i));
        std::swap(idx[i], idx[r]);
    }
    idx.resize(n_sub);
    std::sort(idx.begin(), idx.end());
    return idx;
}

CutPoints make_cutpoints(const SurvivalDataset& ds, const CutStrategy& strategy) {
    if (strategy.kind == CutStrategy::Kind::explicit_list) {
        for (double c : strategy.cuts)
            if (!(c > 0.0)) throw DomainError("explicit cut-points must be positive");
        return CutPoints::from_positive(strategy.cuts);
    }
    if (strategy.kind == CutStrategy::Kind::subsample && strategy.subsample_size == 0)
        throw DomainError("sub-sample size must be positive");

    const auto out = outcomes(ds);
    if (out.empty()) throw DomainError("no subjects to place cut-points");
    std::vector<std::size_t> chosen;
    if (strategy.kind == CutStrategy::Kind::subsample) {
        chosen = subsample_subjects(out.size(), strategy.subsample_size, strategy.seed);
    } else {
        chosen.resize(out.size());
        std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    }

    std::vector<double> events;
    for (std::size_t i : chosen)
        if (out[i].status == 1) events.push_back(out[i].time);
    // Intermediate transitions of multi-state data are events too.
    if (strategy.kind == CutStrategy::Kind::all_events) {
        for (const auto& s : ds.spans)
            if (s.status == 1) events.push_back(s.t_end);
    } else {
        const auto groups = group_subjects(ds);
        for (std::size_t i : chosen)
            for (std::size_t sp : groups[i].spans)
                if (ds.spans[sp].status == 1) events.push_back(ds.spans[sp].t_end);
    }
    if (events.empty()) throw DomainError("no event times to place cut-points");
    std::sort(events.begin(), events.end());
    events.erase(std::unique(events.begin(), events.end()), events.end());

    double max_follow_up = 0.0;
    for (const auto& o : out) max_follow_up = std::max(max_follow_up, o.time);
    if (max_follow_up > events.back()) events.push_back(max_follow_up);
    return CutPoints::from_positive(std::move(events));
}

FeatureSchema ped_schema(const FeatureSchema& subject_schema) {
    FeatureSchema s = subject_schema;
    for (const auto& f : s.features) {
        if (f.name == kTimeFeature || f.name == kTransitionFeature)
            throw SchemaError("feature name '" + f.name + "' is reserved");
    }
    s.features.push_back({kTimeFeature, FeatureKind::numeric, {}});
    s.features.push_back({kTransitionFeature, FeatureKind::numeric, {}});
    return s;
}

PedRow PedDataset::row(Eigen::Index i) const {
    PedRow r;
    r.subject_id = subject_ids[static_cast<std::size_t>(subject(i))];
    r.interval = interval(i);
    r.tj = tj(i);
    r.toff = toff(i);
    r.label = label(i);
    r.transition = transition(i);
    r.features = features.row(i).transpose();
    return r;
}

PedDataset PedDataset::select(const std::vector<Eigen::Index>& rows) const {
    PedDataset out;
    out.subject_ids = subject_ids;
    out.cutpoints = cutpoints;
    out.schema = schema;
    out.n_causes = n_causes;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.subject.resize(n);
    out.interval.resize(n);
    out.tj.resize(n);
    out.toff.resize(n);
    out.label.resize(n);
    out.transition.resize(n);
    out.features.resize(n, features.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto i = rows[static_cast<std::size_t>(r)];
        out.subject(r) = subject(i);
        out.interval(r) = interval(i);
        out.tj(r) = tj(i);
        out.toff(r) = toff(i);
        out.label(r) = label(i);
        out.transition(r) = transition(i);
        out.features.row(r) = features.row(i);
    }
    return out;
}

namespace {

// One contiguous stay of a subject in a single state.
struct Occupancy {
    std::size_t subject = 0;
    int state = 0;
    std::vector<std::size_t> spans;
};

struct PendingRow {
    int subject;
    int interval;
    double toff;
    double label;
    int transition;
    std::size_t span;
};

}  // namespace

PedDataset transform(const SurvivalDataset& ds, const CutPoints& cp, const TransformOptions& options) {
    const auto groups = group_subjects(ds);
    const int K = ds.n_causes;
    const std::size_t p = ds.schema.size();

    std::vector<Occupancy> stays;
    for (std::size_t s = 0; s < groups.size(); ++s) {
        for (std::size_t sp : groups[s].spans) {
            const int state = ds.spans[sp].state;
            if (stays.empty() || stays.back().subject != s || stays.back().state != state ||
                ds.spans[stays.back().spans.back()].status == 1) {
                stays.push_back({s, state, {}});
            }
            stays.back().spans.push_back(sp);
        }
    }

    auto at_risk = [&](const Occupancy& o, int k) {
        if (ds.transitions.empty()) return o.state == 0;
        return ds.transitions[static_cast<std::size_t>(k - 1)].from == o.state;
    };

    PedDataset ped;
    ped.cutpoints = cp;
    ped.schema = ped_schema(ds.schema);
    ped.n_causes = K;
    for (const auto& g : groups) ped.subject_ids.push_back(g.id);

    std::vector<PendingRow> rows;
    std::set<std::pair<std::size_t, std::size_t>> warned;
    for (int k = 1; k <= K; ++k) {
        for (const auto& stay : stays) {
            if (!at_risk(stay, k)) continue;
            const auto& first = ds.spans[stay.spans.front()];
            const auto& last = ds.spans[stay.spans.back()];
            const double entry = first.t_start;
            double exit = last.t_end;
            bool event = last.status == 1 && (last.cause == k || (K == 1 && last.cause == 0));
            if (exit > cp.max()) {
                if (!options.censor_at_last_cut)
                    throw CoverageError("exit time " + std::to_string(exit) + " of subject " + last.subject_id +
                                        " beyond last cut-point " + std::to_string(cp.max()));
                exit = cp.max();
                event = false;
            }
            if (entry >= exit) continue;
            // Entry exactly at kappa_j starts at interval j + 1.
            const auto& kappa = cp.values();
            const auto j_first = static_cast<std::size_t>(
                std::upper_bound(kappa.begin() + 1, kappa.end(), entry) - kappa.begin());
            const std::size_t j_last = cp.interval_of(exit);
            std::size_t span_pos = 0;
            for (std::size_t j = j_first; j <= j_last; ++j) {
                const double lo = std::max(cp.lower(j), entry);
                const double hi = j == j_last ? exit : cp.upper(j);
                const bool terminal_event = event && j == j_last;
                const double toff = hi - lo;
                // Last span starting before the interval end carries the interval's features.
                std::size_t first_overlap = span_pos;
                while (first_overlap < stay.spans.size() && ds.spans[stay.spans[first_overlap]].t_end <= lo)
                    ++first_overlap;
                span_pos = first_overlap;
                std::size_t chosen = first_overlap;
                while (chosen + 1 < stay.spans.size() && ds.spans[stay.spans[chosen + 1]].t_start < hi) ++chosen;
                if (chosen != first_overlap && warned.insert({stay.subject, j}).second) {
                    bool differs = false;
                    for (std::size_t q = first_overlap; q < chosen; ++q)
                        differs = differs || ds.spans[stay.spans[q]].features != ds.spans[stay.spans[chosen]].features;
                    if (differs)
                        ped.warnings.push_back({first.subject_id, static_cast<int>(j),
                                                "feature change inside interval; last value carried forward"});
                }
                rows.push_back({static_cast<int>(stay.subject), static_cast<int>(j), toff,
                                terminal_event ? 1.0 : 0.0, k, stay.spans[chosen]});
            }
        }
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    ped.subject.resize(n);
    ped.interval.resize(n);
    ped.tj.resize(n);
    ped.toff.resize(n);
    ped.label.resize(n);
    ped.transition.resize(n);
    ped.features.resize(n, static_cast<Eigen::Index>(p + 2));
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        ped.subject(r) = row.subject;
        ped.interval(r) = row.interval;
        ped.tj(r) = cp.upper(static_cast<std::size_t>(row.interval));
        ped.toff(r) = row.toff;
        ped.label(r) = row.label;
        ped.transition(r) = row.transition;
        const auto& x = ds.spans[row.span].features;
        for (std::size_t f = 0; f < p; ++f) ped.features(r, static_cast<Eigen::Index>(f)) = x[f];
        ped.features(r, static_cast<Eigen::Index>(p)) = ped.tj(r);
        ped.features(r, static_cast<Eigen::Index>(p + 1)) = row.transition;
    }
    return ped;
}

namespace {
void check_hazards(const PedDataset& ped, std::span<const double> hazards) {
    if (static_cast<Eigen::Index>(hazards.size()) != ped.size())
        throw DomainError("hazard vector length differs from the number of PED rows");
    for (double h : hazards)
        if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("hazards must be positive and finite");
}
}  // namespace

double ped_loglik(const PedDataset& ped, std::span<const double> hazards) {
    check_hazards(ped, hazards);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < ped.size(); ++i) {
        const double h = hazards[static_cast<std::size_t>(i)];
        if (ped.label(i) != 0.0) ll += ped.label(i) * std::log(h);
        ll -= h * ped.toff(i);
    }
    return ll;
}

double poisson_loglik(const PedDataset& ped, std::span<const double> hazards) {
    check_hazards(ped, hazards);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < ped.size(); ++i) {
        const double h = hazards[static_cast<std::size_t>(i)];
        const double y = ped.label(i);
        const double mu = h * ped.toff(i);
        if (y != 0.0) ll += y * std::log(mu) - std::lgamma(y + 1.0);
        ll -= mu;
    }
    return ll;
}

}  // namespace pemsurv
