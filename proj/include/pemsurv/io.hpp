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

#include <iosfwd>
#include <string>
#include <variant>

#include "json.hpp"
#include "pemsurv/baselines.hpp"
#include "pemsurv/boost.hpp"
#include "pemsurv/metrics.hpp"
#include "pemsurv/ped.hpp"

namespace pemsurv {

using Model = std::variant<BoostedEnsemble, PemGlm, KmCurve>;

inline constexpr int kModelFormatVersion = 1;

/// "gbt", "glm" or "km".
std::string engine_name(const Model& model);

nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(const BoostParams& params);
/// Missing keys keep the values of `defaults`; unknown keys are an error.
/// Split constraints are read from `ban_splits` / `force_splits`, lists of
/// "feature" or "feature@depth".
BoostParams params_from_json(const nlohmann::json& j, BoostParams defaults = {});

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

/// Features of the subject level (the PED schema without t_j and k).
FeatureSchema subject_schema(const Model& model);

/// PED CSV (id, j, tj, toff, label, k, features) plus `<path>.meta.json`
/// holding cut-points, subject feature schema and K.
void write_ped_csv(const PedDataset& ped, const std::string& path);
PedDataset read_ped_csv(const std::string& path);
std::string ped_meta_path(const std::string& csv_path);

/// One row per transition and design term: transition, term, estimate.
void write_glm_coefficients(const PemGlm& model, std::ostream& out);

/// Metric values scaled by 100.
nlohmann::json report_to_json(const MetricsReport& report);

}  // namespace pemsurv
