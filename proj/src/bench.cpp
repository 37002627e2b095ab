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

#include "pemsurv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "pemsurv/baselines.hpp"
#include "pemsurv/boost.hpp"
#include "pemsurv/error.hpp"
#include "pemsurv/predict.hpp"

namespace pemsurv {

using nlohmann::json;

std::vector<std::vector<double>> baseline_features(const SurvivalDataset& ds) {
    std::vector<std::vector<double>> out;
    for (const auto& g : group_subjects(ds)) out.push_back(ds.spans[g.spans.front()].features);
    return out;
}

std::function<EventProbability(int cause)> event_probabilities(const Model& model, const SurvivalDataset& test) {
    if (const auto* km = std::get_if<KmCurve>(&model)) {
        if (test.n_causes > 1) throw DomainError("the km engine supports single-event data only");
        auto curve = std::make_shared<KmCurve>(*km);
        return [curve](int) -> EventProbability {
            return [curve](std::size_t, double t) { return 1.0 - (*curve)(t); };
        };
    }
    const auto schema = subject_schema(model);
    if (schema.names() != test.schema.names())
        throw SchemaError("test features do not match the model's feature schema");
    auto curves = std::make_shared<std::vector<CifCurve>>();
    for (const auto& x : baseline_features(test)) {
        if (const auto* gbt = std::get_if<BoostedEnsemble>(&model)) curves->push_back(cif_curves(*gbt, x));
        else curves->push_back(cif_curves(std::get<PemGlm>(model), x));
    }
    const int K = curves->empty() ? 1 : (*curves)[0].n_causes();
    return [curves, K](int cause) -> EventProbability {
        if (K == 1) return [curves](std::size_t i, double t) { return 1.0 - (*curves)[i].survival(t); };
        return [curves, cause](std::size_t i, double t) { return (*curves)[i].cif(cause, t); };
    };
}

MetricsReport evaluate_model(const Model& model, const SurvivalDataset& train, const SurvivalDataset& test) {
    const KmCurve censoring = censoring_km(outcomes(train));
    return evaluate_metrics(outcomes(test), test.n_causes, event_probabilities(model, test), censoring);
}

std::uint64_t data_hash(const SurvivalDataset& ds) {
    std::ostringstream out;
    write_csv(ds, out);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : out.str()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

CutStrategy parse_cut_strategy(const std::string& text, std::uint64_t seed) {
    if (text == "all") return CutStrategy::all_events();
    if (text.rfind("sub:", 0) == 0) {
        const auto n = csv::parse_double(text.substr(4));
        if (!n || *n != std::floor(*n)) throw DomainError("invalid sub-sample size in '" + text + "'");
        return CutStrategy::subsample(static_cast<long long>(*n), seed);
    }
    std::vector<double> cuts;
    for (const auto& cell : csv::split(text, ',')) {
        const auto v = csv::parse_double(cell);
        if (!v) throw DomainError("invalid cut-point '" + cell + "'");
        cuts.push_back(*v);
    }
    return CutStrategy::explicit_list(std::move(cuts));
}

std::string cut_strategy_text(const CutStrategy& s) {
    switch (s.kind) {
        case CutStrategy::Kind::all_events: return "all";
        case CutStrategy::Kind::subsample: return "sub:" + std::to_string(s.subsample_size);
        default: {
            std::string out;
            for (std::size_t i = 0; i < s.cuts.size(); ++i) out += (i ? "," : "") + csv::format_double(s.cuts[i]);
            return out;
        }
    }
}

BoostParams SearchSpace::draw(const BoostParams& base, Rng& rng) const {
    BoostParams p = base;
    p.max_depth = static_cast<int>(rng.integer(std::llround(max_depth.lo), std::llround(max_depth.hi)));
    p.min_loss_reduction = rng.uniform(min_loss_reduction.lo, min_loss_reduction.hi);
    p.min_child_weight =
        static_cast<double>(rng.integer(std::llround(min_child_weight.lo), std::llround(min_child_weight.hi)));
    p.row_subsample = rng.uniform(row_subsample.lo, row_subsample.hi);
    p.col_subsample = rng.uniform(col_subsample.lo, col_subsample.hi);
    p.l2_lambda = rng.uniform(l2_lambda.lo, l2_lambda.hi);
    return p;
}

BenchConfig::BenchConfig() {
    gbt.learning_rate = 0.05;
    gbt.n_rounds = 1000;
    gbt.early_stopping_rounds = 50;
    gbt.max_bins = 256;
}

namespace {

const std::set<std::string> kEngines{"km", "glm", "gbt"};

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError("invalid configuration: " + what);
}

void check_range(const Range& r, double lo, double hi, const char* name) {
    require(r.lo <= r.hi && r.lo >= lo && r.hi <= hi, std::string("search range of ") + name);
}

}  // namespace

void BenchConfig::validate() const {
    require(split > 0.0 && split < 1.0, "split must lie in (0, 1)");
    require(cv_folds >= 2, "cv_folds must be >= 2");
    require(n_search >= 0, "n_search must be >= 0");
    require(replications >= 0, "replications must be >= 0");
    for (const auto& e : engines) require(kEngines.count(e) > 0, "unknown engine '" + e + "'");
    require(glm_ridge >= 0.0, "glm_ridge must be >= 0");
    gbt.validate();
    parse_cut_strategy(gbt_cuts);
    parse_cut_strategy(glm_cuts);
    check_range(space.max_depth, 1, 1e9, "max_depth");
    check_range(space.min_loss_reduction, 0, INFINITY, "min_loss_reduction");
    check_range(space.min_child_weight, 0, INFINITY, "min_child_weight");
    check_range(space.row_subsample, 1e-12, 1, "row_subsample");
    check_range(space.col_subsample, 1e-12, 1, "col_subsample");
    check_range(space.l2_lambda, 0, INFINITY, "l2_lambda");
    for (const auto& h : checks.horizons) require(h == "Q25" || h == "Q50" || h == "Q75", "unknown horizon " + h);
}

namespace {

json synth_to_json(const SynthConfig& s) {
    json j{{"scenario", scenario_name(s.scenario)},
           {"n", s.n},
           {"n_noise", s.noise_features()},
           {"censoring_rate", s.target_censoring()},
           {"resolution", s.resolution},
           {"max_time", s.max_time}};
    return j;
}

SynthConfig synth_from_json(const json& j, SynthConfig s = {}) {
    static const std::set<std::string> known{"scenario", "n",          "n_noise", "censoring_rate",
                                             "seed",     "resolution", "max_time"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw SchemaError("unknown synthetic data key '" + key + "'");
    if (j.contains("scenario")) s.scenario = parse_scenario(j.at("scenario").get<std::string>());
    if (j.contains("n")) s.n = j.at("n").get<std::size_t>();
    if (j.contains("n_noise")) s.n_noise = j.at("n_noise").get<int>();
    if (j.contains("censoring_rate")) s.censoring_rate = j.at("censoring_rate").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("resolution")) s.resolution = j.at("resolution").get<double>();
    if (j.contains("max_time")) s.max_time = j.at("max_time").get<double>();
    return s;
}

json columns_to_json(const ColumnMap& c) {
    return {{"id", c.id},         {"time", c.time},         {"tstart", c.tstart},
            {"status", c.status}, {"cause", c.cause},       {"state", c.state},
            {"features", c.features}, {"categorical", c.categorical}, {"delimiter", std::string(1, c.delimiter)},
            {"n_causes", c.n_causes}};
}

ColumnMap columns_from_json(const json& j) {
    ColumnMap c;
    c.id = j.value("id", std::string("id"));
    c.time = j.value("time", std::string());
    c.tstart = j.value("tstart", std::string());
    c.status = j.value("status", std::string("status"));
    c.cause = j.value("cause", std::string());
    c.state = j.value("state", std::string());
    c.features = j.value("features", std::vector<std::string>{});
    c.categorical = j.value("categorical", std::vector<std::string>{});
    const auto d = j.value("delimiter", std::string(","));
    if (d.size() != 1) throw SchemaError("delimiter must be a single character");
    c.delimiter = d[0];
    c.n_causes = j.value("n_causes", 0);
    return c;
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw SchemaError(std::string("search range '") + key + "' needs two values");
    return {v[0], v[1]};
}

}  // namespace

json bench_config_to_json(const BenchConfig& cfg) {
    json data = cfg.data.path.empty() ? json{{"synth", synth_to_json(cfg.data.synth)}}
                                      : json{{"path", cfg.data.path}, {"columns", columns_to_json(cfg.data.columns)}};
    json checks = json::object();
    if (!cfg.checks.ibs_order.empty()) checks["ibs_order"] = cfg.checks.ibs_order;
    checks["horizons"] = cfg.checks.horizons;
    if (!cfg.checks.winner.empty()) {
        checks["wins"] = {cfg.checks.winner, cfg.checks.loser};
        checks["min_wins"] = cfg.checks.min_wins;
    }
    const auto& s = cfg.space;
    return {{"seed", cfg.seed},
            {"replications", cfg.replications},
            {"split", cfg.split},
            {"n_search", cfg.n_search},
            {"cv_folds", cfg.cv_folds},
            {"engines", cfg.engines},
            {"gbt_cuts", cfg.gbt_cuts},
            {"glm_cuts", cfg.glm_cuts},
            {"glm_ridge", cfg.glm_ridge},
            {"data_driven_base", cfg.data_driven_base},
            {"data", data},
            {"gbt", params_to_json(cfg.gbt)},
            {"search",
             {{"max_depth", range_json(s.max_depth)},
              {"min_loss_reduction", range_json(s.min_loss_reduction)},
              {"min_child_weight", range_json(s.min_child_weight)},
              {"row_subsample", range_json(s.row_subsample)},
              {"col_subsample", range_json(s.col_subsample)},
              {"l2_lambda", range_json(s.l2_lambda)}}},
            {"checks", checks}};
}

BenchConfig bench_config_from_json(const json& j) {
    static const std::set<std::string> known{"seed",     "replications", "split",     "n_search",  "cv_folds",
                                             "engines",  "gbt_cuts",     "glm_cuts",  "glm_ridge", "data_driven_base",
                                             "data",     "gbt",          "search",    "checks"};
    BenchConfig cfg;
    try {
        for (const auto& [key, value] : j.items())
            if (!known.count(key)) throw SchemaError("unknown bench configuration key '" + key + "'");
        cfg.seed = j.value("seed", cfg.seed);
        cfg.replications = j.value("replications", cfg.replications);
        cfg.split = j.value("split", cfg.split);
        cfg.n_search = j.value("n_search", cfg.n_search);
        cfg.cv_folds = j.value("cv_folds", cfg.cv_folds);
        cfg.engines = j.value("engines", cfg.engines);
        cfg.gbt_cuts = j.value("gbt_cuts", cfg.gbt_cuts);
        cfg.glm_cuts = j.value("glm_cuts", cfg.glm_cuts);
        cfg.glm_ridge = j.value("glm_ridge", cfg.glm_ridge);
        cfg.data_driven_base = j.value("data_driven_base", cfg.data_driven_base);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            if (d.contains("path")) {
                cfg.data.path = d.at("path").get<std::string>();
                cfg.data.columns = columns_from_json(d.value("columns", json::object()));
            }
            if (d.contains("synth")) cfg.data.synth = synth_from_json(d.at("synth"));
        }
        if (j.contains("gbt")) cfg.gbt = params_from_json(j.at("gbt"), cfg.gbt);
        if (j.contains("search")) {
            const auto& s = j.at("search");
            if (s.contains("max_depth")) cfg.space.max_depth = range_from(s, "max_depth");
            if (s.contains("min_loss_reduction")) cfg.space.min_loss_reduction = range_from(s, "min_loss_reduction");
            if (s.contains("min_child_weight")) cfg.space.min_child_weight = range_from(s, "min_child_weight");
            if (s.contains("row_subsample")) cfg.space.row_subsample = range_from(s, "row_subsample");
            if (s.contains("col_subsample")) cfg.space.col_subsample = range_from(s, "col_subsample");
            if (s.contains("l2_lambda")) cfg.space.l2_lambda = range_from(s, "l2_lambda");
        }
        if (j.contains("checks")) {
            const auto& c = j.at("checks");
            cfg.checks.ibs_order = c.value("ibs_order", std::vector<std::string>{});
            cfg.checks.horizons = c.value("horizons", cfg.checks.horizons);
            if (c.contains("wins")) {
                const auto w = c.at("wins").get<std::vector<std::string>>();
                if (w.size() != 2) throw SchemaError("checks.wins needs [winner, loser]");
                cfg.checks.winner = w[0];
                cfg.checks.loser = w[1];
            }
            cfg.checks.min_wins = c.value("min_wins", 0);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid bench configuration: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

namespace {

std::vector<std::string> subject_ids(const SurvivalDataset& ds) {
    std::vector<std::string> ids;
    for (const auto& g : group_subjects(ds)) ids.push_back(g.id);
    return ids;
}

double occurrence_exposure_margin(const PedDataset& ped, double fallback) {
    const double events = ped.label.sum();
    const double exposure = ped.toff.sum();
    return events > 0.0 && exposure > 0.0 ? std::log(events / exposure) : fallback;
}

struct FoldData {
    PedDataset train;
    PedDataset valid;
};

// Random search over the space, scored by mean best validation deviance over
// folds. Cut-points of each fold come from its training part only.
BoostParams tune_gbt(const BenchConfig& cfg, const SurvivalDataset& train, std::uint64_t rep_seed,
                     const std::string& stage, const BenchHooks& hooks, ReplicationRecord& rec) {
    const auto groups = group_subjects(train);
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng fold_rng(derive_seed(rep_seed, 14));
    fold_rng.shuffle(order);

    std::vector<FoldData> folds;
    for (int f = 0; f < cfg.cv_folds; ++f) {
        std::vector<std::size_t> in, out;
        for (std::size_t i = 0; i < order.size(); ++i)
            (static_cast<int>(i % static_cast<std::size_t>(cfg.cv_folds)) == f ? out : in).push_back(order[i]);
        std::sort(in.begin(), in.end());
        std::sort(out.begin(), out.end());
        const auto fold_train = subset_subjects(train, in);
        const auto fold_valid = subset_subjects(train, out);
        const auto cp =
            make_cutpoints(fold_train, parse_cut_strategy(cfg.gbt_cuts, derive_seed(rep_seed, 100 + f)));
        if (hooks.on_cutpoints)
            hooks.on_cutpoints(stage + "/fold" + std::to_string(f + 1) + "/gbt", subject_ids(fold_train));
        folds.push_back({transform(fold_train, cp), transform(fold_valid, cp, {true})});
    }

    Rng search_rng(derive_seed(rep_seed, 15));
    std::size_t best = 0;
    for (int c = 0; c < cfg.n_search; ++c) {
        Candidate cand;
        cand.params = cfg.space.draw(cfg.gbt, search_rng);
        cand.params.seed = derive_seed(rep_seed, 200 + static_cast<std::uint64_t>(c));
        double dev = 0.0;
        double rounds = 0.0;
        for (const auto& fold : folds) {
            BoostParams p = cand.params;
            if (cfg.data_driven_base) p.base_margin_init = occurrence_exposure_margin(fold.train, p.base_margin_init);
            if (!p.early_stopping_rounds) p.early_stopping_rounds = p.n_rounds;
            const auto m = fit(fold.train, p, &fold.valid);
            dev += m.valid_deviance[static_cast<std::size_t>(m.best_iteration)];
            rounds += m.best_iteration + 1;
        }
        cand.cv_deviance = dev / static_cast<double>(folds.size());
        cand.mean_rounds = rounds / static_cast<double>(folds.size());
        rec.search.push_back(cand);
        if (cand.cv_deviance < rec.search[best].cv_deviance) best = rec.search.size() - 1;
    }
    BoostParams chosen = rec.search[best].params;
    chosen.n_rounds = std::max(1, static_cast<int>(std::lround(rec.search[best].mean_rounds)));
    chosen.early_stopping_rounds.reset();
    return chosen;
}

Model fit_engine(const std::string& engine, const BenchConfig& cfg, const SurvivalDataset& train,
                 std::uint64_t rep_seed, const std::string& stage, const BenchHooks& hooks, ReplicationRecord& rec) {
    if (engine == "km") return km_fit(train);
    if (engine == "glm") {
        const auto cp = make_cutpoints(train, parse_cut_strategy(cfg.glm_cuts, derive_seed(rep_seed, 16)));
        if (hooks.on_cutpoints) hooks.on_cutpoints(stage + "/glm", subject_ids(train));
        return glm_fit(transform(train, cp), cfg.glm_ridge);
    }
    BoostParams params = cfg.gbt;
    if (cfg.n_search > 0) {
        params = tune_gbt(cfg, train, rep_seed, stage, hooks, rec);
    } else {
        params.early_stopping_rounds.reset();
        params.seed = derive_seed(rep_seed, 200);
    }
    const auto cp = make_cutpoints(train, parse_cut_strategy(cfg.gbt_cuts, derive_seed(rep_seed, 13)));
    if (hooks.on_cutpoints) hooks.on_cutpoints(stage + "/gbt", subject_ids(train));
    const auto ped = transform(train, cp);
    if (cfg.data_driven_base) params.base_margin_init = occurrence_exposure_margin(ped, params.base_margin_init);
    rec.gbt_params = params;
    return fit(ped, params);
}

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg, const BenchHooks& hooks, bool keep_models) {
    cfg.validate();
    BenchResult result;
    std::optional<SurvivalDataset> file_data;
    if (!cfg.data.path.empty()) file_data = load_csv(cfg.data.path, cfg.data.columns);

    for (int r = 0; r < cfg.replications; ++r) {
        const std::uint64_t rep_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
        ReplicationRecord rec;
        rec.replication = r + 1;
        rec.seed = rep_seed;
        const std::string stage = "rep" + std::to_string(r + 1);

        SurvivalDataset data;
        if (file_data) {
            data = *file_data;
        } else {
            SynthConfig sc = cfg.data.synth;
            sc.seed = derive_seed(rep_seed, 11);
            data = generate(sc).data;
        }
        rec.data_hash = data_hash(data);

        const std::size_t n = group_subjects(data).size();
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng split_rng(derive_seed(rep_seed, 12));
        split_rng.shuffle(perm);
        const auto n_train = static_cast<std::size_t>(std::llround(cfg.split * static_cast<double>(n)));
        std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<std::size_t> test_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
        const auto train = subset_subjects(data, train_idx);
        const auto test = subset_subjects(data, test_idx);
        if (hooks.on_test_split) hooks.on_test_split(r + 1, subject_ids(test));
        if (hooks.on_censoring) hooks.on_censoring(stage + "/censoring", subject_ids(train));
        const KmCurve censoring = censoring_km(outcomes(train));
        const auto test_outcomes = outcomes(test);

        for (const auto& engine : cfg.engines) {
            std::vector<ResultRow> rows;
            try {
                Model model = fit_engine(engine, cfg, train, rep_seed, stage, hooks, rec);
                const auto report =
                    evaluate_metrics(test_outcomes, test.n_causes, event_probabilities(model, test), censoring);
                const auto taus = report.horizons.values();
                for (const auto& cm : report.causes)
                    for (std::size_t h = 0; h < 3; ++h)
                        rows.push_back({r + 1, engine, cm.cause, Horizons::labels()[h], taus[h], 100.0 * cm.brier[h],
                                        100.0 * cm.ibs[h], 100.0 * cm.cindex[h], {}});
                if (keep_models) rec.models.push_back(std::move(model));
            } catch (const std::exception& e) {
                rows.clear();
                for (const char* h : Horizons::labels()) rows.push_back({r + 1, engine, 1, h, 0, 0, 0, 0, e.what()});
            }
            result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        }
        result.replications.push_back(std::move(rec));
    }
    return result;
}

double mean_metric(const BenchResult& r, const std::string& engine, const std::string& horizon,
                   double ResultRow::*metric, int cause) {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : r.rows) {
        if (row.engine != engine || row.horizon != horizon || row.cause != cause || !row.error.empty()) continue;
        sum += row.*metric;
        ++count;
    }
    return count > 0 ? sum / count : std::nan("");
}

std::vector<CheckOutcome> evaluate_checks(const BenchChecks& checks, const BenchResult& r) {
    std::vector<CheckOutcome> out;
    for (const auto& h : checks.horizons) {
        if (checks.ibs_order.size() >= 2) {
            CheckOutcome c{"ibs_order@" + h, true, ""};
            double prev = 0.0;
            for (std::size_t e = 0; e < checks.ibs_order.size(); ++e) {
                const double m = mean_metric(r, checks.ibs_order[e], h, &ResultRow::ibs);
                c.detail += (e ? " > " : "") + checks.ibs_order[e] + "=" + csv::format_double(m);
                if (std::isnan(m) || (e > 0 && !(prev > m))) c.passed = false;
                prev = m;
            }
            out.push_back(std::move(c));
        }
        if (!checks.winner.empty()) {
            int wins = 0;
            int reps = 0;
            std::set<int> seen;
            for (const auto& row : r.rows) seen.insert(row.replication);
            for (int rep : seen) {
                const ResultRow* a = nullptr;
                const ResultRow* b = nullptr;
                for (const auto& row : r.rows) {
                    if (row.replication != rep || row.horizon != h || row.cause != 1 || !row.error.empty()) continue;
                    if (row.engine == checks.winner) a = &row;
                    if (row.engine == checks.loser) b = &row;
                }
                ++reps;
                if (a && b && a->ibs < b->ibs) ++wins;
            }
            out.push_back({"wins@" + h, wins >= checks.min_wins,
                           checks.winner + " beats " + checks.loser + " in " + std::to_string(wins) + "/" +
                               std::to_string(reps) + " replications (need " + std::to_string(checks.min_wins) + ")"});
        }
    }
    return out;
}

namespace {

json row_to_json(const ResultRow& row) {
    json j{{"replication", row.replication}, {"engine", row.engine}, {"cause", row.cause},
           {"horizon", row.horizon},         {"tau", row.tau},       {"brier", row.brier},
           {"ibs", row.ibs},                 {"cindex", row.cindex}};
    if (!row.error.empty()) j["error"] = row.error;
    return j;
}

}  // namespace

json bench_manifest(const BenchConfig& cfg, const BenchResult& r) {
    json reps = json::array();
    for (const auto& rec : r.replications) {
        json search = json::array();
        for (const auto& c : rec.search)
            search.push_back(
                {{"params", params_to_json(c.params)}, {"cv_deviance", c.cv_deviance}, {"mean_rounds", c.mean_rounds}});
        json entry{{"replication", rec.replication},
                   {"seed", rec.seed},
                   {"data_hash", rec.data_hash},
                   {"search", search}};
        if (rec.gbt_params) entry["gbt_params"] = params_to_json(*rec.gbt_params);
        reps.push_back(std::move(entry));
    }
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back(row_to_json(row));
    return {{"format", "pemsurv-bench-manifest"},
            {"version", kModelFormatVersion},
            {"config", bench_config_to_json(cfg)},
            {"replications", reps},
            {"results", rows}};
}

BenchResult rerun_manifest(const json& manifest) {
    if (manifest.value("format", std::string()) != "pemsurv-bench-manifest")
        throw SchemaError("not a pemsurv bench manifest");
    const BenchConfig cfg = bench_config_from_json(manifest.at("config"));
    BenchResult r = run_benchmark(cfg);
    const auto& reps = manifest.at("replications");
    if (reps.size() != r.replications.size()) throw Error("manifest replication count differs from re-run");
    for (std::size_t i = 0; i < reps.size(); ++i)
        if (reps[i].at("data_hash").get<std::uint64_t>() != r.replications[i].data_hash)
            throw Error("data hash of replication " + std::to_string(i + 1) + " differs from the manifest");
    return r;
}

std::vector<std::string> compare_with_manifest(const json& manifest, const BenchResult& r) {
    std::vector<std::string> diffs;
    const auto& rows = manifest.at("results");
    if (rows.size() != r.rows.size()) {
        diffs.push_back("row count " + std::to_string(rows.size()) + " vs " + std::to_string(r.rows.size()));
        return diffs;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const json now = row_to_json(r.rows[i]);
        if (rows[i] != now) diffs.push_back("row " + std::to_string(i) + ": " + rows[i].dump() + " vs " + now.dump());
    }
    return diffs;
}

void write_results_csv(const BenchResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "replication,engine,cause,horizon,tau,brier,ibs,cindex,error\n";
    for (const auto& row : r.rows) {
        std::string err = row.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << row.replication << ',' << row.engine << ',' << row.cause << ',' << row.horizon << ','
            << csv::format_double(row.tau) << ',' << csv::format_double(row.brier) << ','
            << csv::format_double(row.ibs) << ',' << csv::format_double(row.cindex) << ',' << err << '\n';
    }
}

ScalingConfig::ScalingConfig() {
    gbt.learning_rate = 0.05;
    gbt.n_rounds = 300;
    gbt.max_depth = 4;
    gbt.min_child_weight = 5.0;
    gbt.max_bins = 256;
}

void ScalingConfig::validate() const {
    require(!sizes.empty(), "sizes must not be empty");
    for (std::size_t i = 1; i < sizes.size(); ++i) require(sizes[i] > sizes[i - 1], "sizes must be increasing");
    require(replications >= 1, "replications must be >= 1");
    require(split > 0.0 && split < 1.0, "split must lie in (0, 1)");
    for (const auto& s : strategies) parse_cut_strategy(s);
    gbt.validate();
}

json scaling_config_to_json(const ScalingConfig& cfg) {
    return {{"sizes", cfg.sizes},          {"strategies", cfg.strategies}, {"replications", cfg.replications},
            {"seed", cfg.seed},            {"split", cfg.split},           {"synth", synth_to_json(cfg.synth)},
            {"gbt", params_to_json(cfg.gbt)}};
}

ScalingConfig scaling_config_from_json(const json& j) {
    static const std::set<std::string> known{"sizes", "strategies", "replications", "seed", "split", "synth", "gbt"};
    ScalingConfig cfg;
    try {
        for (const auto& [key, value] : j.items())
            if (!known.count(key)) throw SchemaError("unknown scaling configuration key '" + key + "'");
        cfg.sizes = j.value("sizes", cfg.sizes);
        cfg.strategies = j.value("strategies", cfg.strategies);
        cfg.replications = j.value("replications", cfg.replications);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.split = j.value("split", cfg.split);
        if (j.contains("synth")) cfg.synth = synth_from_json(j.at("synth"));
        if (j.contains("gbt")) cfg.gbt = params_from_json(j.at("gbt"), cfg.gbt);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid scaling configuration: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

const ScalingCell& ScalingResult::cell(std::size_t n, const std::string& strategy) const {
    for (const auto& c : cells)
        if (c.n == n && c.strategy == strategy) return c;
    throw DomainError("no scaling cell for n=" + std::to_string(n) + ", strategy " + strategy);
}

std::vector<double> ScalingResult::ratios(const std::string& strategy) const {
    std::vector<const ScalingCell*> mine;
    for (const auto& c : cells)
        if (c.strategy == strategy) mine.push_back(&c);
    std::vector<double> out;
    for (std::size_t i = 1; i < mine.size(); ++i) out.push_back(mine[i]->mean_seconds / mine[i - 1]->mean_seconds);
    return out;
}

ScalingResult run_scaling(const ScalingConfig& cfg) {
    cfg.validate();
    ScalingResult result;
    for (std::size_t n : cfg.sizes) {
        for (const auto& strategy : cfg.strategies) {
            ScalingCell cell;
            cell.n = n;
            cell.strategy = strategy;
            double intervals = 0.0;
            double rows = 0.0;
            for (int r = 0; r < cfg.replications; ++r) {
                // The same data for every strategy of one size and replication.
                const std::uint64_t rep_seed = derive_seed(derive_seed(cfg.seed, n), static_cast<std::uint64_t>(r));
                SynthConfig sc = cfg.synth;
                sc.n = n;
                sc.seed = rep_seed;
                const auto data = generate(sc).data;
                std::vector<std::size_t> perm(n);
                std::iota(perm.begin(), perm.end(), std::size_t{0});
                Rng split_rng(derive_seed(rep_seed, 12));
                split_rng.shuffle(perm);
                const auto n_train = static_cast<std::size_t>(std::llround(cfg.split * static_cast<double>(n)));
                std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
                std::vector<std::size_t> te(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
                std::sort(tr.begin(), tr.end());
                std::sort(te.begin(), te.end());
                const auto train = subset_subjects(data, tr);
                const auto test = subset_subjects(data, te);
                const auto cp = make_cutpoints(train, parse_cut_strategy(strategy, derive_seed(rep_seed, 13)));

                const auto start = std::chrono::steady_clock::now();
                const auto ped = transform(train, cp);
                BoostParams p = cfg.gbt;
                p.base_margin_init = occurrence_exposure_margin(ped, p.base_margin_init);
                p.seed = derive_seed(rep_seed, 200);
                const Model model = fit(ped, p);
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

                const auto test_outcomes = outcomes(test);
                const double tau = quantile_horizons(test_outcomes).q50;
                const double ibs = integrated_brier(test_outcomes, event_probabilities(model, test)(1), tau,
                                                    censoring_km(outcomes(train)));
                cell.seconds.push_back(secs);
                cell.ibs.push_back(100.0 * ibs);
                intervals += static_cast<double>(cp.n_intervals());
                rows += static_cast<double>(ped.size());
            }
            const double reps = cfg.replications;
            cell.mean_seconds = std::accumulate(cell.seconds.begin(), cell.seconds.end(), 0.0) / reps;
            cell.mean_ibs = std::accumulate(cell.ibs.begin(), cell.ibs.end(), 0.0) / reps;
            cell.mean_intervals = intervals / reps;
            cell.mean_ped_rows = rows / reps;
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

json scaling_to_json(const ScalingConfig& cfg, const ScalingResult& r) {
    json cells = json::array();
    for (const auto& c : r.cells)
        cells.push_back({{"n", c.n},
                         {"strategy", c.strategy},
                         {"mean_seconds", c.mean_seconds},
                         {"mean_ibs", c.mean_ibs},
                         {"mean_intervals", c.mean_intervals},
                         {"mean_ped_rows", c.mean_ped_rows},
                         {"seconds", c.seconds},
                         {"ibs", c.ibs}});
    json ratios = json::object();
    for (const auto& s : cfg.strategies) ratios[s] = r.ratios(s);
    return {{"config", scaling_config_to_json(cfg)}, {"cells", cells}, {"time_ratios", ratios}};
}

}  // namespace pemsurv
