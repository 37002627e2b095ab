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

#include "json.hpp"

namespace pemsurv {

/// Parses the TOML subset used by the configuration files: [tables] and
/// [dotted.tables], key = value pairs with strings, integers, floats,
/// booleans and (possibly multi-line) arrays of those. Inline tables and
/// dates are rejected.
nlohmann::json parse_toml(std::istream& in);
nlohmann::json parse_toml(const std::string& text);

/// Reads a .json file as JSON and anything else as TOML.
nlohmann::json load_config(const std::string& path);

}  // namespace pemsurv
