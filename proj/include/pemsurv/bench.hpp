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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pemsurv/io.hpp"
#include "pemsurv/metrics.hpp"
#include "pemsurv/ped.hpp"
#include "pemsurv/random.hpp"
#include "pemsurv/synth.hpp"

namespace pemsurv {

/// Features of each subject's first span, in `outcomes(ds)` order.
std::vector<std::vector<double>> baseline_features(const SurvivalDataset& ds);

/// Per-cause event-probability predictors of `model` for the subjects of
/// `test`. Single-event data use cause 1 for 1 - S(t).
std::function<EventProbability(int cause)> event_probabilities(const Model& model, const SurvivalDataset& test);

/// Metrics of `model` on `test`, with the censoring distribution estimated
/// on `train`.
MetricsReport evaluate_model(const Model& model, const SurvivalDataset& train, const SurvivalDataset& test);

/// FNV-1a over the canonical CSV serialization.
std::uint64_t data_hash(const SurvivalDataset& ds);

/// "all", "sub:N" or a comma separated list of cut-points.
CutStrategy parse_cut_strategy(const std::string& text, std::uint64_t seed = 0);
std::string cut_strategy_text(const CutStrategy& s);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct SearchSpace {
    Range max_depth{1, 20};
    Range min_loss_reduction{0.0, 5.0};
    Range min_child_weight{5, 50};
    Range row_subsample{0.5, 1.0};
    Range col_subsample{0.5, 1.0};
    Range l2_lambda{1.0, 3.0};

    /// Integer ranges (depth, child weight) are drawn uniformly on integers.
    BoostParams draw(const BoostParams& base, Rng& rng) const;
};

struct DataSource {
    /// Subject-level CSV; empty selects the synthetic generator.
    std::string path;
    ColumnMap columns;
    SynthConfig synth;
};

struct BenchChecks {
    /// Engines in order of decreasing mean IBS, e.g. km, glm, gbt.
    std::vector<std::string> ibs_order;
    std::vector<std::string> horizons{"Q50", "Q75"};
    /// `winner` has lower IBS than `loser` in at least `min_wins`
    /// replications at every checked horizon.
    std::string winner;
    std::string loser;
    int min_wins = 0;

    bool empty() const { return ibs_order.empty() && winner.empty(); }
};

struct BenchConfig {
    DataSource data;
    double split = 0.7;
    int n_search = 20;
    int cv_folds = 4;
    int replications = 10;
    std::uint64_t seed = 1;
    std::vector<std::string> engines{"km", "glm", "gbt"};
    /// Cut-points of the GBT and GLM PEDs (the subsample seed is derived per
    /// replication).
    std::string gbt_cuts = "all";
    std::string glm_cuts = "all";
    double glm_ridge = 1e-4;
    /// Start boosting from the training occurrence/exposure rate instead of
    /// base_margin_init.
    bool data_driven_base = true;
    BoostParams gbt;
    SearchSpace space;
    BenchChecks checks;

    BenchConfig();
    void validate() const;
};

nlohmann::json bench_config_to_json(const BenchConfig& cfg);
BenchConfig bench_config_from_json(const nlohmann::json& j);

struct ResultRow {
    int replication = 0;
    std::string engine;
    int cause = 1;
    std::string horizon;
    double tau = 0.0;
    double brier = 0.0;
    double ibs = 0.0;
    double cindex = 0.0;
    /// Non-empty when the engine failed in this replication.
    std::string error;
};

struct Candidate {
    BoostParams params;
    double cv_deviance = 0.0;
    double mean_rounds = 0.0;
};

struct ReplicationRecord {
    int replication = 0;
    std::uint64_t seed = 0;
    std::uint64_t data_hash = 0;
    std::vector<Candidate> search;
    std::optional<BoostParams> gbt_params;
    std::vector<Model> models;
};

struct BenchResult {
    std::vector<ResultRow> rows;
    std::vector<ReplicationRecord> replications;
};

/// Instrumentation: which subject ids fed each cut-point / censoring-KM
/// estimate, labelled by stage ("rep1/fold2/gbt", "rep1/censoring", ...).
struct BenchHooks {
    std::function<void(const std::string& stage, const std::vector<std::string>& ids)> on_cutpoints;
    std::function<void(const std::string& stage, const std::vector<std::string>& ids)> on_censoring;
    /// Subject ids of each replication's test split.
    std::function<void(int replication, const std::vector<std::string>& ids)> on_test_split;
};

BenchResult run_benchmark(const BenchConfig& cfg, const BenchHooks& hooks = {}, bool keep_models = false);

/// Mean metric over successful replications.
double mean_metric(const BenchResult& r, const std::string& engine, const std::string& horizon,
                   double ResultRow::*metric, int cause = 1);

struct CheckOutcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

std::vector<CheckOutcome> evaluate_checks(const BenchChecks& checks, const BenchResult& r);

nlohmann::json bench_manifest(const BenchConfig& cfg, const BenchResult& r);
/// Re-runs the manifest's configuration; throws when the data hash differs.
BenchResult rerun_manifest(const nlohmann::json& manifest);
/// Differences between the recorded and re-computed metric values (empty
/// when every value matches bit for bit).
std::vector<std::string> compare_with_manifest(const nlohmann::json& manifest, const BenchResult& r);

void write_results_csv(const BenchResult& r, const std::string& path);

struct ScalingConfig {
    std::vector<std::size_t> sizes{400, 800, 1600, 3200};
    std::vector<std::string> strategies{"all", "sub:200"};
    int replications = 10;
    std::uint64_t seed = 1;
    SynthConfig synth;
    double split = 0.7;
    BoostParams gbt;

    ScalingConfig();
    void validate() const;
};

nlohmann::json scaling_config_to_json(const ScalingConfig& cfg);
ScalingConfig scaling_config_from_json(const nlohmann::json& j);

struct ScalingCell {
    std::size_t n = 0;
    std::string strategy;
    double mean_seconds = 0.0;
    /// IBS at the test Q50, percent.
    double mean_ibs = 0.0;
    double mean_intervals = 0.0;
    double mean_ped_rows = 0.0;
    std::vector<double> seconds;
    std::vector<double> ibs;
};

struct ScalingResult {
    std::vector<ScalingCell> cells;

    const ScalingCell& cell(std::size_t n, const std::string& strategy) const;
    /// time(sizes[i+1]) / time(sizes[i]) for one strategy.
    std::vector<double> ratios(const std::string& strategy) const;
};

ScalingResult run_scaling(const ScalingConfig& cfg);
nlohmann::json scaling_to_json(const ScalingConfig& cfg, const ScalingResult& r);

}  // namespace pemsurv
