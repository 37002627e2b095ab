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

// pemsurv command line: simulate, transform, fit, predict, evaluate, bench,
// scaling.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pemsurv/baselines.hpp"
#include "pemsurv/bench.hpp"
#include "pemsurv/boost.hpp"
#include "pemsurv/config.hpp"
#include "pemsurv/error.hpp"
#include "pemsurv/io.hpp"
#include "pemsurv/ped.hpp"
#include "pemsurv/predict.hpp"
#include "pemsurv/synth.hpp"

namespace fs = std::filesystem;
using namespace pemsurv;

namespace {

struct ColumnFlags {
    std::string id;
    std::string time;
    std::string tstart;
    std::string status = "status";
    std::string cause;
    std::string state;
    std::string features;
    std::string categorical;
    std::string delimiter = ",";
    int n_causes = 0;

    void add(CLI::App* app) {
        app->add_option("--col-id", id, "subject id column (default: id when present)");
        app->add_option("--col-time,--col-tstop", time, "exit time column (default: time or tstop)");
        app->add_option("--col-tstart", tstart, "entry time column (default: tstart when present)");
        app->add_option("--col-status", status, "status column");
        app->add_option("--col-cause", cause, "cause column (default: cause when present)");
        app->add_option("--col-state", state, "state column (default: state when present)");
        app->add_option("--features", features, "comma separated feature columns (default: all others)");
        app->add_option("--categorical", categorical, "comma separated categorical features");
        app->add_option("--delimiter", delimiter, "field delimiter");
        app->add_option("--n-causes", n_causes, "number of causes (0 infers from data)");
    }

    std::vector<std::string> list(const std::string& s) const {
        if (s.empty()) return {};
        return csv::split(s, ',');
    }

    // Fills defaults from the file header.
    ColumnMap resolve(const std::string& path) const {
        if (delimiter.size() != 1) throw SchemaError("delimiter must be a single character");
        std::ifstream in(path);
        if (!in) throw Error("cannot open '" + path + "'");
        std::string line;
        std::getline(in, line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto header = csv::split(line, delimiter[0]);
        auto has = [&](const std::string& c) { return std::find(header.begin(), header.end(), c) != header.end(); };

        ColumnMap m;
        m.delimiter = delimiter[0];
        m.id = !id.empty() ? id : (has("id") ? "id" : "");
        m.status = status;
        m.time = !time.empty() ? time : (has("time") || !has("tstop") ? "time" : "tstop");
        m.tstart = !tstart.empty() ? tstart : (has("tstart") ? "tstart" : "");
        m.cause = !cause.empty() ? cause : (has("cause") ? "cause" : "");
        m.state = !state.empty() ? state : (has("state") ? "state" : "");
        m.n_causes = n_causes;
        m.categorical = list(categorical);
        m.features = list(features);
        if (m.features.empty()) {
            for (const auto& c : header)
                if (c != m.id && c != m.time && c != m.tstart && c != m.status && c != m.cause && c != m.state)
                    m.features.push_back(c);
        }
        return m;
    }
};

std::vector<double> parse_times(const std::string& text) {
    std::vector<double> out;
    for (const auto& cell : csv::split(text, ',')) {
        const auto v = csv::parse_double(cell);
        if (!v || *v < 0.0) throw DomainError("invalid time '" + cell + "'");
        out.push_back(*v);
    }
    return out;
}

CutStrategy read_cut_strategy(const std::string& text, std::uint64_t seed) {
    if (text != "all" && text.rfind("sub:", 0) != 0 && fs::exists(text)) {
        std::ifstream in(text);
        std::vector<double> cuts;
        std::string tok;
        while (in >> tok) {
            for (const auto& cell : csv::split(tok, ',')) {
                if (cell.empty()) continue;
                const auto v = csv::parse_double(cell);
                if (!v) throw DomainError("invalid cut-point '" + cell + "' in " + text);
                cuts.push_back(*v);
            }
        }
        return CutStrategy::explicit_list(std::move(cuts));
    }
    return parse_cut_strategy(text, seed);
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(1) << '\n';
}

int cmd_simulate(const std::string& scenario, std::size_t n, std::uint64_t seed, const std::string& out,
                 const std::string& truth, const std::string& truth_times, double censoring, int n_noise) {
    SynthConfig cfg;
    cfg.scenario = parse_scenario(scenario);
    cfg.n = n;
    cfg.seed = seed;
    if (censoring >= 0.0) cfg.censoring_rate = censoring;
    if (n_noise >= 0) cfg.n_noise = n_noise;
    const auto res = generate(cfg);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    write_csv(res.data, out);
    if (!truth.empty()) {
        const auto times = parse_times(truth_times);
        std::ofstream t(truth);
        t << "id,time,survival";
        for (int k = 1; k <= res.truth.n_causes() && res.truth.n_causes() > 1; ++k) t << ",cif" << k;
        t << '\n';
        for (const auto& span : res.data.spans) {
            const CifCurve curve(res.truth.grid_hazards(span.features));
            for (double u : times) {
                t << span.subject_id << ',' << csv::format_double(u) << ',' << csv::format_double(curve.survival(u));
                for (int k = 1; k <= curve.n_causes() && curve.n_causes() > 1; ++k)
                    t << ',' << csv::format_double(curve.cif(k, u));
                t << '\n';
            }
        }
    }
    std::cerr << "wrote " << n << " subjects, censoring " << res.achieved_censoring << '\n';
    return 0;
}

int cmd_transform(const ColumnFlags& cols, const std::string& in, const std::string& out, const std::string& cuts,
                  std::uint64_t seed, bool censor_at_last_cut) {
    const auto ds = load_csv(in, cols.resolve(in));
    const auto cp = make_cutpoints(ds, read_cut_strategy(cuts, seed));
    const auto ped = transform(ds, cp, {censor_at_last_cut});
    for (const auto& w : ped.warnings)
        std::cerr << "warning: subject " << w.subject_id << " interval " << w.interval << ": " << w.message << '\n';
    write_ped_csv(ped, out);
    std::cerr << "wrote " << ped.size() << " PED rows over " << cp.n_intervals() << " intervals\n";
    return 0;
}

PedDataset load_training_ped(const ColumnFlags& cols, const std::string& path, const std::string& cuts,
                             std::uint64_t seed, const CutPoints* fixed) {
    if (fs::exists(ped_meta_path(path))) {
        auto ped = read_ped_csv(path);
        if (fixed && !(ped.cutpoints == *fixed)) throw SchemaError("validation PED uses different cut-points");
        return ped;
    }
    const auto ds = load_csv(path, cols.resolve(path));
    if (fixed) return transform(ds, *fixed, {true});
    return transform(ds, make_cutpoints(ds, read_cut_strategy(cuts, seed)));
}

int cmd_fit(const ColumnFlags& cols, const std::string& engine, const std::string& params_path,
            const std::string& train, const std::string& valid, const std::string& out, const std::string& coef_out,
            const std::string& cuts, std::uint64_t seed, double ridge) {
    Model model;
    if (engine == "km") {
        if (fs::exists(ped_meta_path(train))) throw SchemaError("the km engine needs subject-level data, not PED");
        model = km_fit(load_csv(train, cols.resolve(train)));
    } else if (engine == "glm") {
        model = glm_fit(load_training_ped(cols, train, cuts, seed, nullptr), ridge);
        if (!coef_out.empty()) {
            std::ofstream c(coef_out);
            write_glm_coefficients(std::get<PemGlm>(model), c);
        }
    } else if (engine == "gbt") {
        BoostParams params;
        if (!params_path.empty()) {
            auto j = load_config(params_path);
            if (j.contains("gbt")) j = j.at("gbt");
            params = params_from_json(j);
        }
        const auto ped = load_training_ped(cols, train, cuts, seed, nullptr);
        if (!valid.empty()) {
            const auto vped = load_training_ped(cols, valid, cuts, seed, &ped.cutpoints);
            model = fit(ped, params, &vped);
        } else {
            model = fit(ped, params);
        }
        const auto& m = std::get<BoostedEnsemble>(model);
        std::cerr << "fitted " << m.trees.size() << " trees";
        if (m.best_iteration >= 0) std::cerr << " (best iteration " << m.best_iteration + 1 << ")";
        std::cerr << '\n';
    } else {
        throw DomainError("unknown engine '" + engine + "' (expected gbt, glm or km)");
    }
    save_model(model, out);
    return 0;
}

int cmd_predict(const ColumnFlags& cols, const std::string& model_path, const std::string& in,
                const std::string& times_text, const std::string& out_path) {
    const Model model = load_model(model_path);
    const auto times = parse_times(times_text);
    if (cols.delimiter.size() != 1) throw SchemaError("delimiter must be a single character");
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write '" + out_path + "'");
    if (const auto* km = std::get_if<KmCurve>(&model)) {
        out << "time,survival\n";
        for (double t : times) out << csv::format_double(t) << ',' << csv::format_double((*km)(t)) << '\n';
        return 0;
    }
    const auto schema = subject_schema(model);
    const auto table = load_feature_table(in, cols.resolve(in).id, schema, cols.delimiter[0]);
    const int K = std::visit(
        [](const auto& m) {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, KmCurve>) return 1;
            else return m.n_causes;
        },
        model);
    out << "id,time,survival,extrapolated";
    for (int k = 1; k <= K && K > 1; ++k) out << ",cif" << k;
    out << '\n';
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        const auto curve = std::holds_alternative<BoostedEnsemble>(model)
                               ? cif_curves(std::get<BoostedEnsemble>(model), table.rows[i])
                               : cif_curves(std::get<PemGlm>(model), table.rows[i]);
        for (double t : times) {
            out << table.ids[i] << ',' << csv::format_double(t) << ',' << csv::format_double(curve.survival(t))
                << ',' << (curve.extrapolated(t) ? 1 : 0);
            for (int k = 1; k <= K && K > 1; ++k) out << ',' << csv::format_double(curve.cif(k, t));
            out << '\n';
        }
    }
    return 0;
}

int cmd_evaluate(const ColumnFlags& cols, const std::string& model_path, const std::string& train_path,
                 const std::string& test_path, const std::string& out) {
    const Model model = load_model(model_path);
    const auto schema = subject_schema(model);
    const FeatureSchema* frozen = std::holds_alternative<KmCurve>(model) ? nullptr : &schema;
    ColumnMap train_cols = cols.resolve(train_path);
    ColumnMap test_cols = cols.resolve(test_path);
    if (frozen) train_cols.features = test_cols.features = schema.names();
    const auto train = load_csv(train_path, train_cols, frozen);
    const auto test = load_csv(test_path, test_cols, frozen);
    const auto report = evaluate_model(model, train, test);
    auto j = report_to_json(report);
    j["engine"] = engine_name(model);
    write_json(j, out);
    const auto labels = Horizons::labels();
    for (const auto& c : report.causes)
        for (std::size_t h = 0; h < 3; ++h)
            std::printf("cause %d %s: brier %.2f ibs %.2f cindex %.2f\n", c.cause, labels[h], 100 * c.brier[h],
                        100 * c.ibs[h], 100 * c.cindex[h]);
    return 0;
}

void print_summary(const BenchConfig& cfg, const BenchResult& r) {
    for (const auto& e : cfg.engines)
        for (const char* h : Horizons::labels())
            std::printf("%-4s %s  IBS %6.2f  Brier %6.2f  C %6.2f\n", e.c_str(), h,
                        mean_metric(r, e, h, &ResultRow::ibs), mean_metric(r, e, h, &ResultRow::brier),
                        mean_metric(r, e, h, &ResultRow::cindex));
    for (const auto& row : r.rows)
        if (!row.error.empty() && row.horizon == "Q25")
            std::fprintf(stderr, "replication %d, %s failed: %s\n", row.replication, row.engine.c_str(),
                         row.error.c_str());
}

int cmd_bench(const std::string& config, const std::string& manifest_path, const std::string& out, bool check,
              bool dump_models) {
    fs::create_directories(out);
    if (!manifest_path.empty()) {
        std::ifstream in(manifest_path);
        if (!in) throw Error("cannot open manifest '" + manifest_path + "'");
        const auto manifest = nlohmann::json::parse(in);
        const auto r = rerun_manifest(manifest);
        const auto diffs = compare_with_manifest(manifest, r);
        write_results_csv(r, (fs::path(out) / "results.csv").string());
        for (const auto& d : diffs) std::cerr << "mismatch: " << d << '\n';
        std::printf("%zu result rows re-computed, %zu differ from the manifest\n", r.rows.size(), diffs.size());
        return diffs.empty() ? 0 : 1;
    }
    const BenchConfig cfg = bench_config_from_json(load_config(config));
    const auto r = run_benchmark(cfg, {}, dump_models);
    write_results_csv(r, (fs::path(out) / "results.csv").string());
    write_json(bench_manifest(cfg, r), (fs::path(out) / "manifest.json").string());
    if (dump_models)
        for (const auto& rec : r.replications)
            for (const auto& m : rec.models)
                save_model(m, (fs::path(out) / ("rep" + std::to_string(rec.replication) + "_" + engine_name(m) +
                                                ".json"))
                                  .string());
    print_summary(cfg, r);
    if (!check) return 0;
    bool ok = true;
    for (const auto& c : evaluate_checks(cfg.checks, r)) {
        std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
        ok = ok && c.passed;
    }
    return ok ? 0 : 1;
}

int cmd_scaling(const std::string& config, const std::string& out, bool check) {
    ScalingConfig cfg;
    if (!config.empty()) cfg = scaling_config_from_json(load_config(config));
    const auto r = run_scaling(cfg);
    if (!out.empty()) write_json(scaling_to_json(cfg, r), out);
    for (const auto& c : r.cells)
        std::printf("n=%-5zu %-8s time %8.3fs  IBS %6.2f  intervals %7.1f  rows %10.0f\n", c.n, c.strategy.c_str(),
                    c.mean_seconds, c.mean_ibs, c.mean_intervals, c.mean_ped_rows);
    for (const auto& s : cfg.strategies) {
        std::printf("ratios %-8s", s.c_str());
        for (double x : r.ratios(s)) std::printf(" %.2f", x);
        std::printf("\n");
    }
    if (!check) return 0;
    // Sub-sampled cut-points scale about linearly and match the full grid.
    if (cfg.strategies.size() != 2) throw DomainError("--check needs exactly two strategies (full, sub-sample)");
    const auto full = r.ratios(cfg.strategies[0]);
    const auto sub = r.ratios(cfg.strategies[1]);
    bool ok = !sub.empty();
    for (double x : sub) ok = ok && x < 3.0;
    ok = ok && full.back() > sub.back();
    const std::size_t last = cfg.sizes.size() > 2 ? cfg.sizes[2] : cfg.sizes.back();
    const double gap = std::abs(r.cell(last, cfg.strategies[0]).mean_ibs - r.cell(last, cfg.strategies[1]).mean_ibs);
    ok = ok && gap <= 0.5;
    std::printf("[%s] scaling pattern (IBS gap at n=%zu: %.3f)\n", ok ? "PASS" : "FAIL", last, gap);
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Piece-wise exponential survival models with gradient boosted trees"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "generate synthetic survival data");
    std::string scenario = "tve", sim_out, truth, truth_times = "1,2,3,4,5";
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    double censoring = -1.0;
    int n_noise = -1;
    sim->add_option("--scenario", scenario, "tve or tve_cr");
    sim->add_option("--n", n, "number of subjects");
    sim->add_option("--seed", seed, "random seed");
    sim->add_option("--out", sim_out, "output CSV")->required();
    sim->add_option("--truth", truth, "write true S(t) (and F_k(t)) per subject");
    sim->add_option("--truth-times", truth_times, "times for --truth");
    sim->add_option("--censoring-rate", censoring, "target censoring fraction");
    sim->add_option("--n-noise", n_noise, "number of noise features");

    ColumnFlags cols;
    auto* tr = app.add_subcommand("transform", "build piece-wise exponential data");
    std::string tr_in, tr_out, cuts = "all";
    bool censor_last = false;
    tr->add_option("--in", tr_in, "subject-level CSV")->required();
    tr->add_option("--out", tr_out, "PED CSV")->required();
    tr->add_option("--cuts", cuts, "all | sub:N | file with cut-points | comma list");
    tr->add_option("--seed", seed, "seed of the cut-point sub-sample");
    tr->add_flag("--censor-at-last-cut", censor_last, "censor follow-up beyond the last cut-point");
    cols.add(tr);

    auto* fi = app.add_subcommand("fit", "fit a gbt, glm or km model");
    std::string engine = "gbt", params_path, train, valid, fit_out, coef_out;
    double ridge = 0.0;
    fi->add_option("--engine", engine, "gbt | glm | km");
    fi->add_option("--params", params_path, "boosting parameters (TOML or JSON)");
    fi->add_option("--train", train, "PED CSV (with .meta.json) or subject-level CSV")->required();
    fi->add_option("--valid", valid, "validation data for early stopping");
    fi->add_option("--out", fit_out, "model JSON")->required();
    fi->add_option("--coef-out", coef_out, "GLM coefficients CSV");
    fi->add_option("--cuts", cuts, "cut-points for subject-level training data");
    fi->add_option("--seed", seed, "seed of the cut-point sub-sample");
    fi->add_option("--ridge", ridge, "GLM ridge penalty");
    cols.add(fi);

    auto* pr = app.add_subcommand("predict", "predict survival and cumulative incidence");
    std::string model_path, pr_in, times = "1", pr_out;
    pr->add_option("--model", model_path, "model JSON")->required();
    pr->add_option("--in", pr_in, "subject features CSV");
    pr->add_option("--times", times, "comma separated evaluation times");
    pr->add_option("--out", pr_out, "predictions CSV")->required();
    cols.add(pr);

    auto* ev = app.add_subcommand("evaluate", "IPCW Brier, IBS and C-index at Q25/Q50/Q75");
    std::string ev_train, ev_test, ev_out;
    ev->add_option("--model", model_path, "model JSON")->required();
    ev->add_option("--train", ev_train, "training data (censoring distribution)")->required();
    ev->add_option("--test", ev_test, "test data")->required();
    ev->add_option("--out", ev_out, "report JSON")->required();
    cols.add(ev);

    auto* be = app.add_subcommand("bench", "benchmark km, glm and gbt with random search");
    std::string config, manifest, be_out = "results";
    bool check = false, dump_models = false;
    auto* cfg_opt = be->add_option("--config", config, "bench configuration (TOML or JSON)");
    be->add_option("--manifest", manifest, "re-run a manifest and compare")->excludes(cfg_opt);
    be->add_option("--out", be_out, "output directory");
    be->add_flag("--check", check, "exit non-zero when a configured check fails");
    be->add_flag("--dump-models", dump_models, "save every fitted model");

    auto* sc = app.add_subcommand("scaling", "cut-point scaling experiment");
    std::string sc_config, sc_out;
    bool sc_check = false;
    sc->add_option("--config", sc_config, "scaling configuration (TOML or JSON)");
    sc->add_option("--out", sc_out, "result JSON");
    sc->add_flag("--check", sc_check, "exit non-zero unless the sub-sample strategy scales as expected");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(scenario, n, seed, sim_out, truth, truth_times, censoring, n_noise);
        if (tr->parsed()) return cmd_transform(cols, tr_in, tr_out, cuts, seed, censor_last);
        if (fi->parsed()) return cmd_fit(cols, engine, params_path, train, valid, fit_out, coef_out, cuts, seed, ridge);
        if (pr->parsed()) return cmd_predict(cols, model_path, pr_in, times, pr_out);
        if (ev->parsed()) return cmd_evaluate(cols, model_path, ev_train, ev_test, ev_out);
        if (be->parsed()) {
            if (config.empty() && manifest.empty()) throw Error("bench needs --config or --manifest");
            return cmd_bench(config, manifest, be_out, check, dump_models);
        }
        if (sc->parsed()) return cmd_scaling(sc_config, sc_out, sc_check);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
