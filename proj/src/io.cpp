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

#include "pemsurv/io.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pemsurv/error.hpp"

namespace pemsurv {

using nlohmann::json;

std::string engine_name(const Model& model) {
    switch (model.index()) {
        case 0: return "gbt";
        case 1: return "glm";
        default: return "km";
    }
}

json schema_to_json(const FeatureSchema& schema) {
    json arr = json::array();
    for (const auto& f : schema.features) {
        json j{{"name", f.name}, {"kind", f.is_categorical() ? "categorical" : "numeric"}};
        if (f.is_categorical()) j["levels"] = f.levels;
        arr.push_back(std::move(j));
    }
    return arr;
}

FeatureSchema schema_from_json(const json& j) {
    FeatureSchema schema;
    for (const auto& f : j) {
        FeatureSpec spec;
        spec.name = f.at("name").get<std::string>();
        const auto kind = f.value("kind", std::string("numeric"));
        if (kind == "categorical") {
            spec.kind = FeatureKind::categorical;
            spec.levels = f.at("levels").get<std::vector<std::string>>();
        } else if (kind != "numeric") {
            throw SchemaError("unknown feature kind '" + kind + "'");
        }
        schema.features.push_back(std::move(spec));
    }
    return schema;
}

namespace {

std::string constraint_text(const SplitConstraint& c) {
    return c.depth == 0 ? c.feature : c.feature + "@" + std::to_string(c.depth);
}

SplitConstraint constraint_from_text(const std::string& text, SplitConstraint::Kind kind) {
    SplitConstraint c;
    c.kind = kind;
    const auto at = text.find('@');
    c.feature = text.substr(0, at);
    if (at != std::string::npos) {
        try {
            c.depth = std::stoi(text.substr(at + 1));
        } catch (const std::exception&) {
            throw SchemaError("invalid split constraint '" + text + "'");
        }
    }
    if (c.feature.empty()) throw SchemaError("invalid split constraint '" + text + "'");
    return c;
}

template <class T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid value for '") + key + "': " + e.what());
    }
}

}  // namespace

json params_to_json(const BoostParams& p) {
    json j{{"learning_rate", p.learning_rate},
           {"n_rounds", p.n_rounds},
           {"max_depth", p.max_depth},
           {"min_loss_reduction", p.min_loss_reduction},
           {"min_child_weight", p.min_child_weight},
           {"row_subsample", p.row_subsample},
           {"col_subsample", p.col_subsample},
           {"l2_lambda", p.l2_lambda},
           {"base_margin_init", p.base_margin_init},
           {"max_bins", p.max_bins},
           {"seed", p.seed}};
    if (p.early_stopping_rounds) j["early_stopping_rounds"] = *p.early_stopping_rounds;
    json ban = json::array();
    json force = json::array();
    for (const auto& c : p.split_constraints)
        (c.kind == SplitConstraint::Kind::ban ? ban : force).push_back(constraint_text(c));
    if (!ban.empty()) j["ban_splits"] = ban;
    if (!force.empty()) j["force_splits"] = force;
    return j;
}

BoostParams params_from_json(const json& j, BoostParams p) {
    static const std::set<std::string> known{
        "learning_rate",    "n_rounds",      "early_stopping_rounds", "max_depth",  "min_loss_reduction",
        "min_child_weight", "row_subsample", "col_subsample",         "l2_lambda",  "base_margin_init",
        "max_bins",         "seed",          "ban_splits",            "force_splits"};
    if (!j.is_object()) throw SchemaError("boosting parameters must be a table");
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw SchemaError("unknown boosting parameter '" + key + "'");
    if (j.contains("learning_rate")) p.learning_rate = get_as<double>(j, "learning_rate");
    if (j.contains("n_rounds")) p.n_rounds = get_as<int>(j, "n_rounds");
    if (j.contains("early_stopping_rounds")) {
        const int r = get_as<int>(j, "early_stopping_rounds");
        p.early_stopping_rounds = r > 0 ? std::optional<int>(r) : std::nullopt;
    }
    if (j.contains("max_depth")) p.max_depth = get_as<int>(j, "max_depth");
    if (j.contains("min_loss_reduction")) p.min_loss_reduction = get_as<double>(j, "min_loss_reduction");
    if (j.contains("min_child_weight")) p.min_child_weight = get_as<double>(j, "min_child_weight");
    if (j.contains("row_subsample")) p.row_subsample = get_as<double>(j, "row_subsample");
    if (j.contains("col_subsample")) p.col_subsample = get_as<double>(j, "col_subsample");
    if (j.contains("l2_lambda")) p.l2_lambda = get_as<double>(j, "l2_lambda");
    if (j.contains("base_margin_init")) p.base_margin_init = get_as<double>(j, "base_margin_init");
    if (j.contains("max_bins")) p.max_bins = get_as<int>(j, "max_bins");
    if (j.contains("seed")) p.seed = get_as<std::uint64_t>(j, "seed");
    if (j.contains("ban_splits") || j.contains("force_splits")) p.split_constraints.clear();
    if (j.contains("ban_splits"))
        for (const auto& s : get_as<std::vector<std::string>>(j, "ban_splits"))
            p.split_constraints.push_back(constraint_from_text(s, SplitConstraint::Kind::ban));
    if (j.contains("force_splits"))
        for (const auto& s : get_as<std::vector<std::string>>(j, "force_splits"))
            p.split_constraints.push_back(constraint_from_text(s, SplitConstraint::Kind::force));
    p.validate();
    return p;
}

namespace {

json tree_to_json(const RegressionTree& tree) {
    json feature = json::array(), threshold = json::array(), categorical = json::array();
    json left = json::array(), right = json::array(), weight = json::array(), gain = json::array(),
         cover = json::array();
    for (const auto& n : tree.nodes()) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        categorical.push_back(n.categorical);
        left.push_back(n.left);
        right.push_back(n.right);
        weight.push_back(n.weight);
        gain.push_back(n.gain);
        cover.push_back(n.cover);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"categorical", categorical}, {"left", left},
            {"right", right},     {"weight", weight},       {"gain", gain},               {"cover", cover}};
}

RegressionTree tree_from_json(const json& j) {
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto categorical = j.at("categorical").get<std::vector<bool>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto weight = j.at("weight").get<std::vector<double>>();
    const auto gain = j.at("gain").get<std::vector<double>>();
    const auto cover = j.at("cover").get<std::vector<double>>();
    const std::size_t n = feature.size();
    for (std::size_t len : {threshold.size(), categorical.size(), left.size(), right.size(), weight.size(),
                            gain.size(), cover.size()})
        if (len != n) throw SchemaError("tree arrays differ in length");
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i)
        nodes[i] = {feature[i], threshold[i], categorical[i], left[i], right[i], weight[i], gain[i], cover[i]};
    return RegressionTree(std::move(nodes));
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json model_to_json(const Model& model) {
    json j{{"format", "pemsurv-model"}, {"version", kModelFormatVersion}, {"engine", engine_name(model)}};
    if (const auto* m = std::get_if<BoostedEnsemble>(&model)) {
        j["params"] = params_to_json(m->params);
        j["schema"] = schema_to_json(m->schema);
        j["cutpoints"] = m->cutpoints.values();
        j["n_causes"] = m->n_causes;
        j["best_iteration"] = m->best_iteration;
        j["train_deviance"] = m->train_deviance;
        j["valid_deviance"] = m->valid_deviance;
        json trees = json::array();
        for (const auto& t : m->trees) trees.push_back(tree_to_json(t));
        j["trees"] = std::move(trees);
    } else if (const auto* g = std::get_if<PemGlm>(&model)) {
        j["schema"] = schema_to_json(g->schema);
        j["cutpoints"] = g->cutpoints.values();
        j["n_causes"] = g->n_causes;
        j["ridge"] = g->ridge;
        j["iterations"] = g->iterations;
        j["converged"] = g->converged;
        j["deviance"] = g->deviance;
        j["null_deviance"] = g->null_deviance;
        json baseline = json::array(), beta = json::array();
        for (const auto& b : g->baseline) baseline.push_back(vector_to_json(b));
        for (const auto& b : g->beta) beta.push_back(vector_to_json(b));
        j["baseline"] = std::move(baseline);
        j["beta"] = std::move(beta);
    } else {
        const auto& km = std::get<KmCurve>(model);
        j["times"] = km.times;
        j["survival"] = km.survival;
        j["at_risk"] = km.at_risk;
        j["events"] = km.events;
    }
    return j;
}

Model model_from_json(const json& j) {
    try {
        if (j.value("format", std::string()) != "pemsurv-model") throw SchemaError("not a pemsurv model document");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw SchemaError("unsupported model format version " + std::to_string(version));
        const auto engine = j.at("engine").get<std::string>();
        if (engine == "gbt") {
            BoostedEnsemble m;
            m.params = params_from_json(j.at("params"));
            m.schema = schema_from_json(j.at("schema"));
            m.cutpoints = CutPoints(j.at("cutpoints").get<std::vector<double>>());
            m.n_causes = j.at("n_causes").get<int>();
            m.best_iteration = j.at("best_iteration").get<int>();
            m.train_deviance = j.at("train_deviance").get<std::vector<double>>();
            m.valid_deviance = j.at("valid_deviance").get<std::vector<double>>();
            for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
            return m;
        }
        if (engine == "glm") {
            PemGlm g;
            g.schema = schema_from_json(j.at("schema"));
            g.cutpoints = CutPoints(j.at("cutpoints").get<std::vector<double>>());
            g.columns = glm_design_columns(g.schema);
            g.n_causes = j.at("n_causes").get<int>();
            g.ridge = j.at("ridge").get<double>();
            g.iterations = j.at("iterations").get<int>();
            g.converged = j.at("converged").get<bool>();
            g.deviance = j.at("deviance").get<double>();
            g.null_deviance = j.at("null_deviance").get<double>();
            for (const auto& b : j.at("baseline")) g.baseline.push_back(vector_from_json(b));
            for (const auto& b : j.at("beta")) g.beta.push_back(vector_from_json(b));
            if (g.baseline.size() != static_cast<std::size_t>(g.n_causes) || g.beta.size() != g.baseline.size())
                throw SchemaError("GLM coefficient blocks do not match n_causes");
            for (std::size_t k = 0; k < g.beta.size(); ++k)
                if (static_cast<std::size_t>(g.beta[k].size()) != g.columns.size() ||
                    static_cast<std::size_t>(g.baseline[k].size()) != g.cutpoints.n_intervals())
                    throw SchemaError("GLM coefficient lengths do not match the schema");
            return g;
        }
        if (engine == "km") {
            KmCurve km;
            km.times = j.at("times").get<std::vector<double>>();
            km.survival = j.at("survival").get<std::vector<double>>();
            km.at_risk = j.at("at_risk").get<std::vector<double>>();
            km.events = j.at("events").get<std::vector<double>>();
            if (km.survival.size() != km.times.size()) throw SchemaError("KM arrays differ in length");
            return km;
        }
        throw SchemaError("unknown engine '" + engine + "'");
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed model document: ") + e.what());
    }
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << model_to_json(model).dump(1) << '\n';
}

Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError("invalid JSON in '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

FeatureSchema subject_schema(const Model& model) {
    const FeatureSchema* s = nullptr;
    if (const auto* m = std::get_if<BoostedEnsemble>(&model)) s = &m->schema;
    if (const auto* g = std::get_if<PemGlm>(&model)) s = &g->schema;
    if (!s) return {};
    FeatureSchema out = *s;
    out.features.resize(out.size() - 2);
    return out;
}

std::string ped_meta_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

void write_ped_csv(const PedDataset& ped, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    const std::size_t p = ped.n_features() - 2;
    out << "id,j,tj,toff,label,k";
    for (std::size_t f = 0; f < p; ++f) out << ',' << ped.schema[f].name;
    out << '\n';
    for (Eigen::Index r = 0; r < ped.size(); ++r) {
        out << ped.subject_ids[static_cast<std::size_t>(ped.subject(r))] << ',' << ped.interval(r) << ','
            << csv::format_double(ped.tj(r)) << ',' << csv::format_double(ped.toff(r)) << ','
            << csv::format_double(ped.label(r)) << ',' << ped.transition(r);
        for (std::size_t f = 0; f < p; ++f) {
            const double v = ped.features(r, static_cast<Eigen::Index>(f));
            out << ',';
            if (ped.schema[f].is_categorical()) out << ped.schema[f].levels.at(static_cast<std::size_t>(v));
            else out << csv::format_double(v);
        }
        out << '\n';
    }
    FeatureSchema subject = ped.schema;
    subject.features.resize(p);
    json meta{{"format", "pemsurv-ped"},
              {"version", kModelFormatVersion},
              {"cutpoints", ped.cutpoints.values()},
              {"schema", schema_to_json(subject)},
              {"n_causes", ped.n_causes}};
    std::ofstream m(ped_meta_path(path));
    if (!m) throw Error("cannot write '" + ped_meta_path(path) + "'");
    m << meta.dump(1) << '\n';
}

PedDataset read_ped_csv(const std::string& path) {
    std::ifstream meta_in(ped_meta_path(path));
    if (!meta_in) throw Error("missing PED metadata '" + ped_meta_path(path) + "'");
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::exception& e) {
        throw SchemaError("invalid PED metadata: " + std::string(e.what()));
    }
    PedDataset ped;
    ped.cutpoints = CutPoints(meta.at("cutpoints").get<std::vector<double>>());
    ped.schema = ped_schema(schema_from_json(meta.at("schema")));
    ped.n_causes = meta.at("n_causes").get<int>();
    const std::size_t p = ped.n_features() - 2;

    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("PED file has no header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = csv::split(line, ',');
    std::vector<std::string> expected{"id", "j", "tj", "toff", "label", "k"};
    for (std::size_t f = 0; f < p; ++f) expected.push_back(ped.schema[f].name);
    if (header != expected) throw SchemaError("PED header does not match its metadata");

    std::map<std::string, int> index;
    std::vector<int> subject, interval, transition;
    std::vector<double> tj, toff, label, values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = csv::split(line, ',');
        if (cells.size() != expected.size()) throw RowError(row, "wrong number of columns");
        auto number = [&](std::size_t c) {
            const auto v = csv::parse_double(cells[c]);
            if (!v) throw RowError(row, "non-numeric value in column '" + expected[c] + "'");
            return *v;
        };
        auto [it, inserted] = index.try_emplace(cells[0], static_cast<int>(ped.subject_ids.size()));
        if (inserted) ped.subject_ids.push_back(cells[0]);
        subject.push_back(it->second);
        interval.push_back(static_cast<int>(number(1)));
        tj.push_back(number(2));
        toff.push_back(number(3));
        label.push_back(number(4));
        transition.push_back(static_cast<int>(number(5)));
        if (!(toff.back() > 0.0)) throw RowError(row, "toff must be positive");
        if (transition.back() < 1 || transition.back() > ped.n_causes) throw RowError(row, "k out of range");
        for (std::size_t f = 0; f < p; ++f) {
            const auto& spec = ped.schema[f];
            if (spec.is_categorical()) {
                const int code = spec.code_of(cells[6 + f]);
                if (code < 0) throw RowError(row, "unknown level '" + cells[6 + f] + "' of '" + spec.name + "'");
                values.push_back(code);
            } else {
                values.push_back(number(6 + f));
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(toff.size());
    ped.subject = Eigen::Map<const Eigen::VectorXi>(subject.data(), n);
    ped.interval = Eigen::Map<const Eigen::VectorXi>(interval.data(), n);
    ped.transition = Eigen::Map<const Eigen::VectorXi>(transition.data(), n);
    ped.tj = Eigen::Map<const Eigen::VectorXd>(tj.data(), n);
    ped.toff = Eigen::Map<const Eigen::VectorXd>(toff.data(), n);
    ped.label = Eigen::Map<const Eigen::VectorXd>(label.data(), n);
    ped.features.resize(n, static_cast<Eigen::Index>(p + 2));
    for (Eigen::Index r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < p; ++f)
            ped.features(r, static_cast<Eigen::Index>(f)) = values[static_cast<std::size_t>(r) * p + f];
        ped.features(r, static_cast<Eigen::Index>(p)) = ped.tj(r);
        ped.features(r, static_cast<Eigen::Index>(p + 1)) = ped.transition(r);
    }
    return ped;
}

void write_glm_coefficients(const PemGlm& model, std::ostream& out) {
    out << "k,term,estimate\n";
    for (int k = 1; k <= model.n_causes; ++k) {
        const auto& b0 = model.baseline[static_cast<std::size_t>(k - 1)];
        for (Eigen::Index j = 0; j < b0.size(); ++j)
            out << k << ",interval" << (j + 1) << ',' << csv::format_double(b0(j)) << '\n';
        const auto& beta = model.beta[static_cast<std::size_t>(k - 1)];
        for (std::size_t c = 0; c < model.columns.size(); ++c)
            out << k << ',' << model.columns[c].name << ','
                << csv::format_double(beta(static_cast<Eigen::Index>(c))) << '\n';
    }
}

json report_to_json(const MetricsReport& report) {
    const auto labels = Horizons::labels();
    const auto taus = report.horizons.values();
    json horizons = json::object();
    json g = json::object();
    for (std::size_t h = 0; h < 3; ++h) {
        horizons[labels[h]] = taus[h];
        g[labels[h]] = report.censoring_survival[h];
    }
    json causes = json::array();
    for (const auto& c : report.causes) {
        json entry{{"cause", c.cause}};
        for (std::size_t h = 0; h < 3; ++h)
            entry[labels[h]] = {{"brier", 100.0 * c.brier[h]}, {"ibs", 100.0 * c.ibs[h]}, {"cindex", 100.0 * c.cindex[h]}};
        causes.push_back(std::move(entry));
    }
    return {{"scale", "percent"},
            {"horizons", horizons},
            {"censoring_survival", g},
            {"test_censoring_fraction", report.test_censoring_fraction},
            {"causes", causes}};
}

}  // namespace pemsurv
