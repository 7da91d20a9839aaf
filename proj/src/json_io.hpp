/*
* Copyright 2026 The catrl Authors.
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     https://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
* ============================================================================
*/

#ifndef CATRL_SRC_JSON_IO_HPP_
#define CATRL_SRC_JSON_IO_HPP_

// JSON conversions for configuration, model and report types. Private to the
// library and its tests.

#include <initializer_list>
#include <string>

#include "catrl/dtr.hpp"
#include "catrl/eval.hpp"
#include "catrl/forest.hpp"
#include "catrl/nuisance.hpp"
#include "catrl/policy_tree.hpp"
#include "catrl/propensity.hpp"
#include "catrl/simgen.hpp"
#include "json.hpp"

namespace catrl {

using nlohmann::json;

// Non-finite doubles are written as the strings "inf", "-inf", "nan".
json number_to_json(double v);
double number_from_json(const json& j, const std::string& where);

// Throws ConfigError naming the first key of `j` not in `allowed`.
void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where);

void to_json(json& j, const TreeHyperparams& hp);
void from_json(const json& j, TreeHyperparams& hp);
void to_json(json& j, const PolicyNode& n);
void from_json(const json& j, PolicyNode& n);
void to_json(json& j, const PolicyTree& t);
void from_json(const json& j, PolicyTree& t);

void to_json(json& j, const ForestParams& p);
void from_json(const json& j, ForestParams& p);
void to_json(json& j, const NuisanceSettings& s);
void from_json(const json& j, NuisanceSettings& s);
void to_json(json& j, const PropensitySpec& s);
void from_json(const json& j, PropensitySpec& s);
void to_json(json& j, const FitConfig& c);
void from_json(const json& j, FitConfig& c);
void to_json(json& j, const SchemaSpec& s);
void from_json(const json& j, SchemaSpec& s);
void to_json(json& j, const NuisanceDiagnostics& d);
void from_json(const json& j, NuisanceDiagnostics& d);
void to_json(json& j, const StageTrace& t);
void from_json(const json& j, StageTrace& t);

void to_json(json& j, const SurvivalForest& f);
SurvivalForest survival_forest_from_json(const json& j);
void to_json(json& j, const RegressionForest& f);
RegressionForest regression_forest_from_json(const json& j);
void to_json(json& j, const PropensityModel& m);
PropensityModel propensity_model_from_json(const json& j);

void to_json(json& j, const Estimate& e);
void to_json(json& j, const EvalReport& r);
void to_json(json& j, const BenchmarkConfig& c);
void from_json(const json& j, BenchmarkConfig& c);

namespace sim {
void to_json(json& j, const CensoringParams& p);
void from_json(const json& j, CensoringParams& p);
void to_json(json& j, const ScenarioConfig& c);
void from_json(const json& j, ScenarioConfig& c);
void to_json(json& j, const Oracle& o);
void from_json(const json& j, Oracle& o);
}  // namespace sim

// Parses a document, turning any JSON error into ConfigError.
json parse_json(const std::string& text, const std::string& what);

}  // namespace catrl

#endif  // CATRL_SRC_JSON_IO_HPP_
