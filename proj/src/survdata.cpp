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

#include "pemsurv/survdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "pemsurv/error.hpp"

namespace pemsurv {

int FeatureSpec::code_of(std::string_view label) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == label) return static_cast<int>(i);
    return -1;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
        if (features[i].name == name) return i;
    return std::nullopt;
}

std::vector<std::string> FeatureSchema::names() const {
    std::vector<std::string> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.name);
    return out;
}

namespace csv {

std::vector<std::string> split(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

}  // namespace csv

std::vector<SubjectSpans> group_subjects(const SurvivalDataset& ds) {
    std::vector<SubjectSpans> out;
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < ds.spans.size(); ++i) {
        const auto& id = ds.spans[i].subject_id;
        auto [it, inserted] = pos.try_emplace(id, out.size());
        if (inserted) out.push_back({id, {}});
        out[it->second].spans.push_back(i);
    }
    for (auto& s : out) {
        std::stable_sort(s.spans.begin(), s.spans.end(), [&](std::size_t a, std::size_t b) {
            return ds.spans[a].t_start < ds.spans[b].t_start;
        });
    }
    return out;
}

std::vector<Outcome> outcomes(const SurvivalDataset& ds) {
    std::vector<Outcome> out;
    for (const auto& subj : group_subjects(ds)) {
        const auto& first = ds.spans[subj.spans.front()];
        const auto& last = ds.spans[subj.spans.back()];
        Outcome o;
        o.id = subj.id;
        o.entry = first.t_start;
        o.time = last.t_end;
        o.status = last.status;
        o.cause = last.status == 1 ? (last.cause > 0 ? last.cause : 1) : 0;
        out.push_back(std::move(o));
    }
    return out;
}

SurvivalDataset normalized(SurvivalDataset ds) {
    std::stable_sort(ds.spans.begin(), ds.spans.end(), [](const SubjectSpan& a, const SubjectSpan& b) {
        if (a.subject_id != b.subject_id) return a.subject_id < b.subject_id;
        return a.t_start < b.t_start;
    });
    return ds;
}

SurvivalDataset subset_subjects(const SurvivalDataset& ds, const std::vector<std::size_t>& subjects) {
    const auto groups = group_subjects(ds);
    SurvivalDataset out;
    out.schema = ds.schema;
    out.n_causes = ds.n_causes;
    out.transitions = ds.transitions;
    for (std::size_t s : subjects) {
        for (std::size_t i : groups.at(s).spans) out.spans.push_back(ds.spans[i]);
    }
    return out;
}

std::vector<Violation> validate(const SurvivalDataset& ds) {
    std::vector<Violation> out;
    auto add = [&](const std::string& id, const char* rule, std::string detail) {
        out.push_back({id, rule, std::move(detail)});
    };

    if (ds.n_causes < 1) add("", "n_causes", "n_causes must be >= 1");
    if (!ds.transitions.empty()) {
        if (static_cast<int>(ds.transitions.size()) != ds.n_causes)
            add("", "transition_labels_length", "transition labels must have length n_causes");
        std::set<std::pair<int, int>> seen;
        for (const auto& t : ds.transitions) {
            if (!seen.insert({t.from, t.to}).second)
                add("", "duplicate_transition",
                    std::to_string(t.from) + "->" + std::to_string(t.to));
        }
    }

    for (const auto& subj : group_subjects(ds)) {
        for (std::size_t n = 0; n < subj.spans.size(); ++n) {
            const auto& s = ds.spans[subj.spans[n]];
            if (s.features.size() != ds.schema.size())
                add(s.subject_id, "feature_length", "feature vector length differs from schema");
            if (!std::isfinite(s.t_start) || !std::isfinite(s.t_end))
                add(s.subject_id, "non_finite", "non-finite time");
            if (s.t_start < 0.0) add(s.subject_id, "negative_start", "t_start < 0");
            if (!(s.t_start < s.t_end)) add(s.subject_id, "nonpositive_length", "t_start >= t_end");
            if (s.status != 0 && s.status != 1) add(s.subject_id, "status_domain", "status not in {0,1}");
            if (s.cause != 0 && (s.cause < 1 || s.cause > ds.n_causes))
                add(s.subject_id, "cause_out_of_range", "cause outside 1..K");
            if (s.status == 1 && ds.n_causes > 1 && s.cause == 0)
                add(s.subject_id, "missing_cause", "event without cause while K > 1");
            for (std::size_t f = 0; f < s.features.size() && f < ds.schema.size(); ++f) {
                if (!std::isfinite(s.features[f])) add(s.subject_id, "non_finite", "non-finite feature");
                const auto& spec = ds.schema[f];
                if (spec.is_categorical()) {
                    const double v = s.features[f];
                    if (v < 0 || v != std::floor(v) || v >= static_cast<double>(spec.levels.size()))
                        add(s.subject_id, "categorical_code", "invalid code for " + spec.name);
                }
            }
            if (!ds.transitions.empty() && s.status == 1 && s.cause >= 1 && s.cause <= ds.n_causes) {
                const auto& tr = ds.transitions[s.cause - 1];
                if (tr.from != s.state) add(s.subject_id, "origin_mismatch", "transition origin differs from state");
            }
            if (n + 1 < subj.spans.size()) {
                const auto& next = ds.spans[subj.spans[n + 1]];
                if (next.t_start < s.t_end) add(s.subject_id, "overlap", "spans overlap");
                else if (next.t_start > s.t_end) add(s.subject_id, "gap", "spans are not contiguous");
                if (s.status == 1) {
                    if (next.state == s.state) {
                        add(s.subject_id, "status_not_last", "event on a non-terminal span");
                    } else if (!ds.transitions.empty() && s.cause >= 1 && s.cause <= ds.n_causes &&
                               ds.transitions[s.cause - 1].to != next.state) {
                        add(s.subject_id, "state_mismatch", "next state differs from transition target");
                    }
                }
            }
        }
    }
    return out;
}

namespace {

std::size_t require_column(const std::map<std::string, std::size_t>& header, const std::string& name,
                           const char* role) {
    auto it = header.find(name);
    if (it == header.end())
        throw SchemaError(std::string("missing ") + role + " column '" + name + "'");
    return it->second;
}

std::optional<std::size_t> optional_column(const std::map<std::string, std::size_t>& header,
                                           const std::string& name, const char* role) {
    if (name.empty()) return std::nullopt;
    return require_column(header, name, role);
}

std::map<std::string, std::size_t> read_header(std::istream& in, char delimiter) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty CSV: header row missing");
    std::map<std::string, std::size_t> header;
    auto names = csv::split(line, delimiter);
    for (std::size_t i = 0; i < names.size(); ++i) header.emplace(names[i], i);
    return header;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
    auto v = csv::parse_double(text);
    if (!v) throw RowError(row, "non-numeric value '" + text + "' in column '" + column + "'");
    return *v;
}

int parse_int(const std::string& text, std::size_t row, const std::string& column) {
    const double v = parse_number(text, row, column);
    if (v != std::floor(v)) throw RowError(row, "non-integer value in column '" + column + "'");
    return static_cast<int>(v);
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

SurvivalDataset read_csv(std::istream& in, const ColumnMap& columns, const FeatureSchema* frozen) {
    if (columns.time.empty()) throw SchemaError("no exit-time column configured");
    if (columns.status.empty()) throw SchemaError("no status column configured");
    const auto header = read_header(in, columns.delimiter);

    const auto id_col = optional_column(header, columns.id, "id");
    const auto time_col = require_column(header, columns.time, "time");
    const auto start_col = optional_column(header, columns.tstart, "tstart");
    const auto status_col = require_column(header, columns.status, "status");
    const auto cause_col = optional_column(header, columns.cause, "cause");
    const auto state_col = optional_column(header, columns.state, "state");

    SurvivalDataset ds;
    std::vector<std::size_t> feature_cols;
    for (const auto& name : columns.features) {
        feature_cols.push_back(require_column(header, name, "feature"));
        FeatureSpec spec;
        spec.name = name;
        if (frozen) {
            auto idx = frozen->index_of(name);
            if (!idx) throw SchemaError("feature '" + name + "' not in model schema");
            spec = (*frozen)[*idx];
        } else if (std::find(columns.categorical.begin(), columns.categorical.end(), name) !=
                   columns.categorical.end()) {
            spec.kind = FeatureKind::categorical;
        }
        ds.schema.features.push_back(std::move(spec));
    }
    for (const auto& name : columns.categorical) {
        if (!ds.schema.index_of(name))
            throw SchemaError("categorical column '" + name + "' is not a listed feature");
    }

    if (!columns.transitions.empty()) {
        ds.transitions = columns.transitions;
        ds.n_causes = static_cast<int>(columns.transitions.size());
        if (columns.n_causes != 0 && columns.n_causes != ds.n_causes)
            throw SchemaError("n_causes disagrees with the number of transitions");
    } else {
        ds.n_causes = columns.n_causes;
    }

    std::vector<std::size_t> source_row;
    std::string line;
    std::size_t row = 0;
    int max_cause = 0;
    while (std::getline(in, line)) {
        if (is_blank(line)) continue;
        ++row;
        auto fields = csv::split(line, columns.delimiter);
        auto field = [&](std::size_t col) -> const std::string& {
            if (col >= fields.size()) throw RowError(row, "too few fields");
            return fields[col];
        };
        SubjectSpan span;
        span.subject_id = id_col ? field(*id_col) : std::to_string(row);
        span.t_end = parse_number(field(time_col), row, columns.time);
        span.t_start = start_col ? parse_number(field(*start_col), row, columns.tstart) : 0.0;
        span.status = parse_int(field(status_col), row, columns.status);
        if (span.status != 0 && span.status != 1) throw RowError(row, "status outside {0,1}");
        if (span.t_start < 0.0) throw RowError(row, "negative start time");
        if (!(span.t_end > span.t_start)) {
            throw RowError(row, span.t_start == 0.0 ? "exit time must be > 0"
                                                    : "exit time must exceed start time");
        }
        if (cause_col && !is_blank(field(*cause_col))) {
            span.cause = parse_int(field(*cause_col), row, columns.cause);
            if (span.cause < 1 || (ds.n_causes > 0 && span.cause > ds.n_causes))
                throw RowError(row, "cause outside 1..K");
            if (span.status == 0) span.cause = 0;
        }
        if (state_col) span.state = parse_int(field(*state_col), row, columns.state);
        max_cause = std::max(max_cause, span.cause);
        span.features.reserve(feature_cols.size());
        for (std::size_t f = 0; f < feature_cols.size(); ++f) {
            const auto& text = field(feature_cols[f]);
            auto& spec = ds.schema.features[f];
            if (is_blank(text)) throw RowError(row, "missing value for feature '" + spec.name + "'");
            if (spec.is_categorical()) {
                int code = spec.code_of(text);
                if (code < 0) {
                    if (frozen)
                        throw RowError(row, "unknown category '" + text + "' for feature '" + spec.name + "'");
                    code = static_cast<int>(spec.levels.size());
                    spec.levels.push_back(text);
                }
                span.features.push_back(code);
            } else {
                span.features.push_back(parse_number(text, row, spec.name));
            }
        }
        ds.spans.push_back(std::move(span));
        source_row.push_back(row);
    }
    if (ds.n_causes == 0) ds.n_causes = std::max(1, max_cause);
    if (ds.n_causes > 1) {
        for (std::size_t i = 0; i < ds.spans.size(); ++i)
            if (ds.spans[i].status == 1 && ds.spans[i].cause == 0)
                throw RowError(source_row[i], "event without cause while K > 1");
    }

    // Structural checks reported against the offending source row.
    for (const auto& subj : group_subjects(ds)) {
        for (std::size_t n = 0; n + 1 < subj.spans.size(); ++n) {
            const auto& a = ds.spans[subj.spans[n]];
            const auto& b = ds.spans[subj.spans[n + 1]];
            const auto r = source_row[subj.spans[n + 1]];
            if (b.t_start < a.t_end) throw RowError(r, "overlapping spans for subject " + subj.id);
            if (b.t_start > a.t_end) throw RowError(r, "non-contiguous spans for subject " + subj.id);
            if (a.status == 1 && a.state == b.state)
                throw RowError(source_row[subj.spans[n]], "event on a non-terminal span of subject " + subj.id);
        }
    }
    auto violations = validate(ds);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw SchemaError("invalid dataset (" + v.rule + ") for subject " + v.subject_id + ": " + v.detail);
    }
    return ds;
}

SurvivalDataset load_csv(const std::string& path, const ColumnMap& columns, const FeatureSchema* frozen) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    return read_csv(in, columns, frozen);
}

ColumnMap written_columns(const SurvivalDataset& ds) {
    ColumnMap c;
    c.id = "id";
    c.tstart = "tstart";
    c.time = "tstop";
    c.status = "status";
    c.cause = "cause";
    c.state = "state";
    c.features = ds.schema.names();
    for (const auto& f : ds.schema.features)
        if (f.is_categorical()) c.categorical.push_back(f.name);
    c.n_causes = ds.n_causes;
    c.transitions = ds.transitions;
    return c;
}

namespace {
std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}
}  // namespace

void write_csv(const SurvivalDataset& ds, std::ostream& out) {
    out << "id,tstart,tstop,status,cause,state";
    for (const auto& f : ds.schema.features) out << ',' << quoted(f.name);
    out << '\n';
    for (const auto& s : ds.spans) {
        out << quoted(s.subject_id) << ',' << csv::format_double(s.t_start) << ','
            << csv::format_double(s.t_end) << ',' << s.status << ',';
        if (s.cause > 0) out << s.cause;
        out << ',' << s.state;
        for (std::size_t f = 0; f < s.features.size(); ++f) {
            out << ',';
            const auto& spec = ds.schema[f];
            if (spec.is_categorical()) out << quoted(spec.levels.at(static_cast<std::size_t>(s.features[f])));
            else out << csv::format_double(s.features[f]);
        }
        out << '\n';
    }
}

void write_csv(const SurvivalDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write '" + path + "'");
    write_csv(ds, out);
}

FeatureTable read_feature_table(std::istream& in, const std::string& id_column, const FeatureSchema& schema,
                                char delimiter) {
    const auto header = read_header(in, delimiter);
    const auto id_col = optional_column(header, id_column, "id");
    std::vector<std::size_t> cols;
    for (const auto& f : schema.features) cols.push_back(require_column(header, f.name, "feature"));

    FeatureTable table;
    std::set<std::string> seen;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (is_blank(line)) continue;
        ++row;
        auto fields = csv::split(line, delimiter);
        auto field = [&](std::size_t col) -> const std::string& {
            if (col >= fields.size()) throw RowError(row, "too few fields");
            return fields[col];
        };
        std::string id = id_col ? field(*id_col) : std::to_string(row);
        // First row of a subject defines its baseline features.
        if (!seen.insert(id).second) continue;
        std::vector<double> x;
        for (std::size_t f = 0; f < cols.size(); ++f) {
            const auto& text = field(cols[f]);
            const auto& spec = schema[f];
            if (is_blank(text)) throw RowError(row, "missing value for feature '" + spec.name + "'");
            if (spec.is_categorical()) {
                const int code = spec.code_of(text);
                if (code < 0) throw RowError(row, "unknown category '" + text + "' for feature '" + spec.name + "'");
                x.push_back(code);
            } else {
                x.push_back(parse_number(text, row, spec.name));
            }
        }
        table.ids.push_back(std::move(id));
        table.rows.push_back(std::move(x));
    }
    return table;
}

FeatureTable load_feature_table(const std::string& path, const std::string& id_column, const FeatureSchema& schema,
                                char delimiter) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open '" + path + "'");
    return read_feature_table(in, id_column, schema, delimiter);
}

}  // namespace pemsurv
