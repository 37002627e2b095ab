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
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pemsurv {

enum class FeatureKind { numeric, categorical };

/// One feature column. Categorical values are stored as integer codes
/// indexing `levels`; the dictionary is frozen once a model is trained.
struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    std::vector<std::string> levels;

    bool is_categorical() const { return kind == FeatureKind::categorical; }
    /// Code of `label`, or -1 when the label is not in the dictionary.
    int code_of(std::string_view label) const;

    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

struct FeatureSchema {
    std::vector<FeatureSpec> features;

    std::size_t size() const { return features.size(); }
    const FeatureSpec& operator[](std::size_t i) const { return features[i]; }
    /// Index of the named feature, or nullopt.
    std::optional<std::size_t> index_of(std::string_view name) const;
    std::vector<std::string> names() const;

    friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// A piece of one subject's follow-up with constant features on
/// (t_start, t_end]. `cause` is 0 when absent; `state` is the state occupied
/// on the span (0 for single-origin data).
struct SubjectSpan {
    std::string subject_id;
    double t_start = 0.0;
    double t_end = 0.0;
    int status = 0;
    int cause = 0;
    int state = 0;
    std::vector<double> features;

    friend bool operator==(const SubjectSpan&, const SubjectSpan&) = default;
};

/// Transition m -> m' between states.
struct Transition {
    int from = 0;
    int to = 1;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Subject-level survival data in start-stop format.
struct SurvivalDataset {
    std::vector<SubjectSpan> spans;
    FeatureSchema schema;
    int n_causes = 1;
    std::vector<Transition> transitions;

    friend bool operator==(const SurvivalDataset&, const SurvivalDataset&) = default;
};

/// Span indices of one subject, sorted by t_start.
struct SubjectSpans {
    std::string id;
    std::vector<std::size_t> spans;
};

/// Groups spans by subject in order of first appearance.
std::vector<SubjectSpans> group_subjects(const SurvivalDataset& ds);

/// Final observed outcome of a subject's trajectory.
struct Outcome {
    std::string id;
    double entry = 0.0;
    double time = 0.0;
    int status = 0;
    /// Cause of the event; 1 for single-event data, 0 when censored.
    int cause = 0;
};

std::vector<Outcome> outcomes(const SurvivalDataset& ds);

/// Sorts spans by (subject id, t_start). Two datasets describing the same
/// data compare equal after normalization.
SurvivalDataset normalized(SurvivalDataset ds);

/// Subset of subjects (by position in group_subjects order).
SurvivalDataset subset_subjects(const SurvivalDataset& ds, const std::vector<std::size_t>& subjects);

struct Violation {
    std::string subject_id;
    std::string rule;
    std::string detail;
};

/// Checks every dataset invariant; an empty result means the dataset is valid.
std::vector<Violation> validate(const SurvivalDataset& ds);

/// CSV column mapping. `time` is the exit time (alias: tstop); `tstart` is
/// optional and defaults every span to start at 0.
struct ColumnMap {
    std::string id;
    std::string time;
    std::string tstart;
    std::string status;
    std::string cause;
    std::string state;
    std::vector<std::string> features;
    std::vector<std::string> categorical;
    char delimiter = ',';
    /// 0 infers K from the data (or from `transitions` when given).
    int n_causes = 0;
    std::vector<Transition> transitions;
};

/// Reads and validates a survival CSV. When `frozen` is given, feature kinds
/// and categorical dictionaries are taken from it and unknown labels are
/// rejected.
SurvivalDataset load_csv(const std::string& path, const ColumnMap& columns,
                         const FeatureSchema* frozen = nullptr);
SurvivalDataset read_csv(std::istream& in, const ColumnMap& columns,
                         const FeatureSchema* frozen = nullptr);

/// Column map matching the layout written by write_csv.
ColumnMap written_columns(const SurvivalDataset& ds);
void write_csv(const SurvivalDataset& ds, std::ostream& out);
void write_csv(const SurvivalDataset& ds, const std::string& path);

/// Feature rows keyed by subject id, for prediction inputs without outcomes.
struct FeatureTable {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
};

FeatureTable load_feature_table(const std::string& path, const std::string& id_column,
                                const FeatureSchema& schema, char delimiter = ',');
FeatureTable read_feature_table(std::istream& in, const std::string& id_column,
                                const FeatureSchema& schema, char delimiter = ',');

namespace csv {
/// Splits one CSV record, honoring double quotes.
std::vector<std::string> split(std::string_view line, char delimiter);
/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);
}  // namespace csv

}  // namespace pemsurv
