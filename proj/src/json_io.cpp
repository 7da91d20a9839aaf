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

#include "json_io.hpp"

#include <cmath>
#include <limits>

#include "catrl/error.hpp"

namespace catrl {

json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError(where + ": expected a number");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("malformed " + what + ": " + e.what());
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      out = number_from_json(*it, where + "." + key);
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_unsigned() || it->get<long long>() >= 0) {
          out = it->get<T>();
        } else {
          throw ConfigError(where + "." + key + ": expected a non-negative integer");
        }
      } else {
        out = it->get<T>();
      }
    } else {
      out = it->get<T>();
    }
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void read_optional(const json& j, const char* key, std::optional<double>& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    out.reset();
    return;
  }
  out = number_from_json(*it, where + "." + key);
}

json optional_number(const std::optional<double>& v) { return v ? number_to_json(*v) : json(nullptr); }

}  // namespace

// ---------------------------------------------------------------- policy tree

void to_json(json& j, const TreeHyperparams& hp) {
  j = json{{"n0", hp.n0},
           {"lambda", optional_number(hp.lambda)},
           {"max_depth", hp.max_depth},
           {"threshold_grid", hp.threshold_grid}};
}

void from_json(const json& j, TreeHyperparams& hp) {
  const std::string w = "tree";
  check_keys(j, {"n0", "lambda", "max_depth", "threshold_grid"}, w);
  read(j, "n0", hp.n0, w);
  read_optional(j, "lambda", hp.lambda, w);
  read(j, "max_depth", hp.max_depth, w);
  read(j, "threshold_grid", hp.threshold_grid, w);
}

void to_json(json& j, const PolicyNode& n) {
  j = json{{"feature", n.feature},     {"threshold", number_to_json(n.threshold)},
           {"left", n.left},           {"right", n.right},
           {"arm", n.arm},             {"value", number_to_json(n.value)},
           {"count", n.count},         {"improvement", number_to_json(n.improvement)},
           {"depth", n.depth}};
}

void from_json(const json& j, PolicyNode& n) {
  const std::string w = "node";
  check_keys(j, {"feature", "threshold", "left", "right", "arm", "value", "count", "improvement", "depth"}, w);
  read(j, "feature", n.feature, w);
  read(j, "threshold", n.threshold, w);
  read(j, "left", n.left, w);
  read(j, "right", n.right, w);
  read(j, "arm", n.arm, w);
  read(j, "value", n.value, w);
  read(j, "count", n.count, w);
  read(j, "improvement", n.improvement, w);
  read(j, "depth", n.depth, w);
}

void to_json(json& j, const PolicyTree& t) {
  j = json{{"version", kPolicyTreeFormatVersion},
           {"lambda", number_to_json(t.lambda)},
           {"hyperparams", t.hyperparams},
           {"nodes", t.nodes}};
}

void from_json(const json& j, PolicyTree& t) {
  if (!j.is_object() || !j.contains("version")) throw ConfigError("policy tree: missing version");
  if (j.at("version") != kPolicyTreeFormatVersion) {
    throw ConfigError("policy tree: unsupported version " + j.at("version").dump());
  }
  check_keys(j, {"version", "lambda", "hyperparams", "nodes"}, "policy tree");
  t = PolicyTree{};
  read(j, "lambda", t.lambda, "policy tree");
  if (j.contains("hyperparams")) t.hyperparams = j.at("hyperparams").get<TreeHyperparams>();
  if (!j.contains("nodes") || !j.at("nodes").is_array() || j.at("nodes").empty()) {
    throw ConfigError("policy tree: no nodes");
  }
  t.nodes = j.at("nodes").get<std::vector<PolicyNode>>();
  const int n = static_cast<int>(t.nodes.size());
  for (const auto& node : t.nodes) {
    if (node.feature >= 0 && (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)) {
      throw ConfigError("policy tree: child index out of range");
    }
    if (node.arm < 0) throw ConfigError("policy tree: negative arm");
  }
}

// ---------------------------------------------------------------- nuisance

void to_json(json& j, const ForestParams& p) {
  j = json{{"n_trees", p.n_trees},
           {"leaf_min", p.leaf_min},
           {"mtry", p.mtry},
           {"split_candidates", p.split_candidates},
           {"seed", p.seed}};
}

void from_json(const json& j, ForestParams& p) {
  const std::string w = "forest";
  check_keys(j, {"n_trees", "leaf_min", "mtry", "split_candidates", "seed"}, w);
  read(j, "n_trees", p.n_trees, w);
  read(j, "leaf_min", p.leaf_min, w);
  read(j, "mtry", p.mtry, w);
  read(j, "split_candidates", p.split_candidates, w);
  read(j, "seed", p.seed, w);
}

void to_json(json& j, const NuisanceSettings& s) {
  j = json{{"ridge", number_to_json(s.ridge)},
           {"propensity_clip", json::array({s.clip.lo, s.clip.hi})},
           {"censoring_floor", number_to_json(s.censoring_floor)},
           {"censoring_model", s.censoring_model == CensoringModel::kForest ? "forest" : "kaplan_meier"},
           {"min_arm_size", s.min_arm_size},
           {"forest", s.forest}};
}

void from_json(const json& j, NuisanceSettings& s) {
  const std::string w = "nuisance";
  check_keys(j, {"ridge", "propensity_clip", "censoring_floor", "censoring_model", "min_arm_size", "forest"}, w);
  read(j, "ridge", s.ridge, w);
  if (j.contains("propensity_clip")) {
    const auto& c = j.at("propensity_clip");
    if (!c.is_array() || c.size() != 2) throw ConfigError("nuisance.propensity_clip: expected [lo, hi]");
    s.clip.lo = number_from_json(c[0], "nuisance.propensity_clip");
    s.clip.hi = number_from_json(c[1], "nuisance.propensity_clip");
  }
  read(j, "censoring_floor", s.censoring_floor, w);
  if (j.contains("censoring_model")) {
    std::string m;
    read(j, "censoring_model", m, w);
    if (m == "forest") {
      s.censoring_model = CensoringModel::kForest;
    } else if (m == "kaplan_meier" || m == "km") {
      s.censoring_model = CensoringModel::kKaplanMeier;
    } else {
      throw ConfigError("nuisance.censoring_model: expected 'forest' or 'kaplan_meier', got '" + m + "'");
    }
  }
  read(j, "min_arm_size", s.min_arm_size, w);
  if (j.contains("forest")) s.forest = j.at("forest").get<ForestParams>();
}

void to_json(json& j, const PropensitySpec& s) {
  switch (s.preset) {
    case PropensityPreset::kAll:
      j = "all";
      return;
    case PropensityPreset::kMisspecified:
      j = "misspecified";
      return;
    case PropensityPreset::kCustom:
      j = json{{"preset", "custom"}, {"features", s.features}};
      return;
  }
}

void from_json(const json& j, PropensitySpec& s) {
  s = PropensitySpec{};
  if (j.is_string()) {
    const auto v = j.get<std::string>();
    if (v == "all" || v == "true") {
      s.preset = PropensityPreset::kAll;
    } else if (v == "misspecified" || v == "false") {
      s.preset = PropensityPreset::kMisspecified;
    } else {
      throw ConfigError("propensity: expected 'all', 'misspecified' or a custom object, got '" + v + "'");
    }
    return;
  }
  check_keys(j, {"preset", "features"}, "propensity");
  std::string preset = "custom";
  read(j, "preset", preset, "propensity");
  if (preset != "custom") {
    from_json(json(preset), s);
    return;
  }
  s.preset = PropensityPreset::kCustom;
  read(j, "features", s.features, "propensity");
}

void to_json(json& j, const FitConfig& c) {
  j = json{{"trees", c.trees},
           {"nuisance", c.nuisance},
           {"propensity", c.propensity},
           {"tau", optional_number(c.tau)},
           {"seed", c.seed},
           {"censoring_weight_at",
            c.censoring_weight_at == CensoringWeightAt::kStageEnd ? "stage_end" : "pseudo_outcome"},
           {"censored_imputation",
            c.censored_imputation == CensoredImputation::kConditional ? "conditional" : "marginal"}};
}

void from_json(const json& j, FitConfig& c) {
  const std::string w = "fit";
  check_keys(j, {"trees", "nuisance", "propensity", "tau", "seed", "censoring_weight_at", "censored_imputation"}, w);
  c = FitConfig{};
  if (j.contains("trees")) {
    const auto& t = j.at("trees");
    if (t.is_array()) {
      c.trees = t.get<std::vector<TreeHyperparams>>();
    } else {
      c.trees = {t.get<TreeHyperparams>()};
    }
  }
  if (j.contains("nuisance")) c.nuisance = j.at("nuisance").get<NuisanceSettings>();
  if (j.contains("propensity")) c.propensity = j.at("propensity").get<PropensitySpec>();
  read_optional(j, "tau", c.tau, w);
  read(j, "seed", c.seed, w);
  if (j.contains("censoring_weight_at")) {
    std::string s;
    read(j, "censoring_weight_at", s, w);
    if (s == "stage_end") {
      c.censoring_weight_at = CensoringWeightAt::kStageEnd;
    } else if (s == "pseudo_outcome") {
      c.censoring_weight_at = CensoringWeightAt::kPseudoOutcome;
    } else {
      throw ConfigError("fit.censoring_weight_at: expected 'stage_end' or 'pseudo_outcome', got '" + s + "'");
    }
  }
  if (j.contains("censored_imputation")) {
    std::string s;
    read(j, "censored_imputation", s, w);
    if (s == "conditional") {
      c.censored_imputation = CensoredImputation::kConditional;
    } else if (s == "marginal") {
      c.censored_imputation = CensoredImputation::kMarginal;
    } else {
      throw ConfigError("fit.censored_imputation: expected 'conditional' or 'marginal', got '" + s + "'");
    }
  }
}

void to_json(json& j, const SchemaSpec& s) {
  j = json::array();
  for (std::size_t k = 0; k < s.covariates.size(); ++k) {
    j.push_back(json{{"covariates", s.covariates[k].names}, {"arity", s.arity[k]}});
  }
}

void from_json(const json& j, SchemaSpec& s) {
  if (!j.is_array() || j.empty()) throw ConfigError("schema: expected a non-empty array of stages");
  s = SchemaSpec{};
  for (const auto& stage : j) {
    check_keys(stage, {"covariates", "arity"}, "schema");
    s.covariates.push_back(CovariateSchema{stage.at("covariates").get<std::vector<std::string>>()});
    s.arity.push_back(stage.at("arity").get<int>());
  }
}

void to_json(json& j, const NuisanceDiagnostics& d) {
  j = json{{"n", d.n},
           {"propensity_iterations", d.propensity_iterations},
           {"propensity_gradient_norm", number_to_json(d.propensity_gradient_norm)},
           {"propensity_log_likelihood", number_to_json(d.propensity_log_likelihood)},
           {"censoring_model", d.censoring_model},
           {"mean_model", d.mean_model},
           {"pooled_arms", d.pooled_arms},
           {"mean_model_rows", d.mean_model_rows}};
}

void from_json(const json& j, NuisanceDiagnostics& d) {
  const std::string w = "nuisance diagnostics";
  read(j, "n", d.n, w);
  read(j, "propensity_iterations", d.propensity_iterations, w);
  read(j, "propensity_gradient_norm", d.propensity_gradient_norm, w);
  read(j, "propensity_log_likelihood", d.propensity_log_likelihood, w);
  read(j, "censoring_model", d.censoring_model, w);
  read(j, "mean_model", d.mean_model, w);
  read(j, "pooled_arms", d.pooled_arms, w);
  read(j, "mean_model_rows", d.mean_model_rows, w);
}

void to_json(json& j, const StageTrace& t) {
  json means = json::array();
  for (double m : t.column_means) means.push_back(number_to_json(m));
  j = json{{"stage", t.stage + 1},
           {"entrants", t.entrants},
           {"nuisance", t.nuisance},
           {"caipw_column_means", means},
           {"lambda", number_to_json(t.lambda)},
           {"depth", t.depth},
           {"leaves", t.leaves},
           {"rules", t.rules},
           {"pseudo_defined", t.pseudo_defined}};
}

void from_json(const json& j, StageTrace& t) {
  const std::string w = "trace";
  int stage = 1;
  read(j, "stage", stage, w);
  t.stage = stage - 1;
  read(j, "entrants", t.entrants, w);
  if (j.contains("nuisance")) t.nuisance = j.at("nuisance").get<NuisanceDiagnostics>();
  t.column_means.clear();
  if (j.contains("caipw_column_means")) {
    for (const auto& v : j.at("caipw_column_means")) t.column_means.push_back(number_from_json(v, w));
  }
  read(j, "lambda", t.lambda, w);
  read(j, "depth", t.depth, w);
  read(j, "leaves", t.leaves, w);
  read(j, "rules", t.rules, w);
  read(j, "pseudo_defined", t.pseudo_defined, w);
}

// ---------------------------------------------------------------- forests

namespace {

json nodes_to_json(const std::vector<TreeNode>& nodes) {
  json out = json::array();
  for (const auto& n : nodes) out.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.leaf}));
  return out;
}

std::vector<TreeNode> nodes_from_json(const json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j) {
    if (!n.is_array() || n.size() != 5) throw ConfigError("forest: malformed node");
    nodes.push_back(TreeNode{n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<int>()});
  }
  return nodes;
}

}  // namespace

void to_json(json& j, const SurvivalForest& f) {
  json trees = json::array();
  for (const auto& t : f.trees()) {
    json leaves = json::array();
    for (const auto& l : t.leaves) leaves.push_back(json{{"times", l.times}, {"hazard", l.hazard}});
    trees.push_back(json{{"nodes", nodes_to_json(t.nodes)}, {"leaves", leaves}, {"leaf_sizes", t.leaf_sizes}});
  }
  j = json{{"version", 1}, {"kind", "survival"}, {"n_features", f.n_features()}, {"params", f.params()}, {"trees", trees}};
}

SurvivalForest survival_forest_from_json(const json& j) {
  if (j.value("version", 0) != 1 || j.value("kind", "") != "survival") throw ConfigError("survival forest: bad header");
  std::vector<SurvivalTree> trees;
  for (const auto& t : j.at("trees")) {
    SurvivalTree tree;
    tree.nodes = nodes_from_json(t.at("nodes"));
    for (const auto& l : t.at("leaves")) {
      tree.leaves.push_back(
          CumulativeHazard{l.at("times").get<std::vector<double>>(), l.at("hazard").get<std::vector<double>>()});
    }
    tree.leaf_sizes = t.at("leaf_sizes").get<std::vector<int>>();
    trees.push_back(std::move(tree));
  }
  return SurvivalForest::from_parts(j.at("n_features").get<std::size_t>(), j.at("params").get<ForestParams>(),
                                    std::move(trees));
}

void to_json(json& j, const RegressionForest& f) {
  json trees = json::array();
  for (const auto& t : f.trees()) {
    trees.push_back(json{{"nodes", nodes_to_json(t.nodes)}, {"leaf_values", t.leaf_values}, {"leaf_sizes", t.leaf_sizes}});
  }
  j = json{{"version", 1}, {"kind", "regression"}, {"n_features", f.n_features()}, {"params", f.params()}, {"trees", trees}};
}

RegressionForest regression_forest_from_json(const json& j) {
  if (j.value("version", 0) != 1 || j.value("kind", "") != "regression") {
    throw ConfigError("regression forest: bad header");
  }
  std::vector<RegressionTree> trees;
  for (const auto& t : j.at("trees")) {
    trees.push_back(RegressionTree{nodes_from_json(t.at("nodes")), t.at("leaf_values").get<std::vector<double>>(),
                                   t.at("leaf_sizes").get<std::vector<int>>()});
  }
  return RegressionForest::from_parts(j.at("n_features").get<std::size_t>(), j.at("params").get<ForestParams>(),
                                      std::move(trees));
}

void to_json(json& j, const PropensityModel& m) {
  j = json{{"version", 1}, {"arity", m.arity()}, {"features", m.features()}, {"coefficients", m.coefficients()}};
}

PropensityModel propensity_model_from_json(const json& j) {
  if (j.value("version", 0) != 1) throw ConfigError("propensity model: unsupported version");
  return PropensityModel(j.at("arity").get<int>(), j.at("features").get<std::vector<std::size_t>>(),
                         j.at("coefficients").get<std::vector<std::vector<double>>>());
}

// ---------------------------------------------------------------- eval

void to_json(json& j, const Estimate& e) {
  j = json{{"value", number_to_json(e.value)}, {"std_error", number_to_json(e.std_error)}};
}

void to_json(json& j, const EvalReport& r) {
  j = json{{"policy", r.policy},
           {"tau", number_to_json(r.tau)},
           {"rmst", r.rmst},
           {"cdr1", r.cdr1},
           {"acdr", r.acdr},
           {"expected_survival", r.expected_survival},
           {"sampled_mean_survival", r.sampled_mean_survival},
           {"n_eval", r.n_eval}};
}

void to_json(json& j, const BenchmarkConfig& c) {
  json modes = json::array();
  for (auto m : c.propensity_modes) modes.push_back(std::string(sim::to_string(m)));
  json kinds = json::array();
  for (auto k : c.censoring_kinds) kinds.push_back(std::string(sim::to_string(k)));
  j = json{{"arities", c.arities},
           {"propensity_modes", modes},
           {"censoring_kinds", kinds},
           {"n_subjects", c.n_subjects},
           {"folds", c.folds},
           {"target_censor_rate", number_to_json(c.target_censor_rate)},
           {"noise_rate", number_to_json(c.noise_rate)},
           {"seed", c.seed},
           {"fit", c.fit}};
}

void from_json(const json& j, BenchmarkConfig& c) {
  const std::string w = "benchmark";
  check_keys(j,
             {"arities", "propensity_modes", "censoring_kinds", "n_subjects", "folds", "target_censor_rate",
              "noise_rate", "seed", "fit", "cache_dir"},
             w);
  c = BenchmarkConfig{};
  read(j, "arities", c.arities, w);
  if (j.contains("propensity_modes")) {
    c.propensity_modes.clear();
    for (const auto& m : j.at("propensity_modes")) c.propensity_modes.push_back(sim::parse_propensity_mode(m.get<std::string>()));
  }
  if (j.contains("censoring_kinds")) {
    c.censoring_kinds.clear();
    for (const auto& k : j.at("censoring_kinds")) c.censoring_kinds.push_back(sim::parse_censoring_kind(k.get<std::string>()));
  }
  read(j, "n_subjects", c.n_subjects, w);
  read(j, "folds", c.folds, w);
  read(j, "target_censor_rate", c.target_censor_rate, w);
  read(j, "noise_rate", c.noise_rate, w);
  read(j, "seed", c.seed, w);
  if (j.contains("fit")) c.fit = j.at("fit").get<FitConfig>();
  if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) c.cache_dir = j.at("cache_dir").get<std::string>();
}

// ---------------------------------------------------------------- scenario

namespace sim {

void to_json(json& j, const CensoringParams& p) {
  j = json{{"kind", std::string(to_string(p.kind))},
           {"c0", number_to_json(p.c0)},
           {"a", number_to_json(p.a)},
           {"b", number_to_json(p.b)}};
}

void from_json(const json& j, CensoringParams& p) {
  const std::string w = "censoring";
  check_keys(j, {"kind", "c0", "a", "b"}, w);
  p = CensoringParams{};
  std::string kind = "none";
  read(j, "kind", kind, w);
  p.kind = parse_censoring_kind(kind);
  read(j, "c0", p.c0, w);
  read(j, "a", p.a, w);
  read(j, "b", p.b, w);
}

void to_json(json& j, const ScenarioConfig& c) {
  j = json{{"n_subjects", c.n_subjects},
           {"arity", c.arity},
           {"propensity_mode", std::string(to_string(c.propensity_mode))},
           {"censoring_kind", std::string(to_string(c.censoring_kind))},
           {"target_censor_rate", number_to_json(c.target_censor_rate)},
           {"noise_rate", number_to_json(c.noise_rate)},
           {"seed", c.seed},
           {"tau", optional_number(c.tau)},
           {"censoring", c.censoring ? json(*c.censoring) : json(nullptr)},
           {"pilot_size", c.pilot_size},
           {"uniform_lower", number_to_json(c.uniform_lower)},
           {"covariate_model", std::string(to_string(c.covariate_model))}};
}

void from_json(const json& j, ScenarioConfig& c) {
  const std::string w = "scenario";
  check_keys(j,
             {"n_subjects", "arity", "propensity_mode", "censoring_kind", "target_censor_rate", "noise_rate", "seed",
              "tau", "censoring", "pilot_size", "uniform_lower", "covariate_model"},
             w);
  c = ScenarioConfig{};
  read(j, "n_subjects", c.n_subjects, w);
  read(j, "arity", c.arity, w);
  if (j.contains("propensity_mode")) {
    std::string m;
    read(j, "propensity_mode", m, w);
    c.propensity_mode = parse_propensity_mode(m);
  }
  if (j.contains("censoring_kind")) {
    std::string k;
    read(j, "censoring_kind", k, w);
    c.censoring_kind = parse_censoring_kind(k);
  }
  read(j, "target_censor_rate", c.target_censor_rate, w);
  read(j, "noise_rate", c.noise_rate, w);
  read(j, "seed", c.seed, w);
  read_optional(j, "tau", c.tau, w);
  if (j.contains("censoring") && !j.at("censoring").is_null()) c.censoring = j.at("censoring").get<CensoringParams>();
  read(j, "pilot_size", c.pilot_size, w);
  read(j, "uniform_lower", c.uniform_lower, w);
  if (j.contains("covariate_model")) {
    std::string m;
    read(j, "covariate_model", m, w);
    c.covariate_model = parse_covariate_model(m);
  }
}

void to_json(json& j, const Oracle& o) {
  json latents = json::array();
  for (const auto& l : o.latents) {
    latents.push_back(json{{"x2", l.x2}, {"a2", l.a2}, {"t1", l.t1}, {"t2", l.t2}, {"c", number_to_json(l.c)}});
  }
  j = json{{"format", "catrl-oracle"},
           {"version", 1},
           {"config", o.config},
           {"censoring", o.censoring},
           {"tau", number_to_json(o.tau)},
           {"latents", latents}};
  if (!o.population.empty()) {
    json rows = json::array();
    for (const auto& c : o.population) rows.push_back(json{{"x1", c.stage1}, {"x2", c.stage2}});
    j["population"] = rows;
  }
}

void from_json(const json& j, Oracle& o) {
  if (j.value("format", "") != "catrl-oracle") throw ConfigError("oracle manifest: wrong format tag");
  if (j.value("version", 0) != 1) throw ConfigError("oracle manifest: unsupported version");
  o = Oracle{};
  o.config = j.at("config").get<ScenarioConfig>();
  o.censoring = j.at("censoring").get<CensoringParams>();
  o.tau = number_from_json(j.at("tau"), "oracle.tau");
  if (j.contains("latents")) {
    for (const auto& l : j.at("latents")) {
      SubjectLatent s;
      s.x2 = l.at("x2").get<std::array<double, kStage2Count>>();
      s.a2 = l.at("a2").get<int>();
      s.t1 = l.at("t1").get<double>();
      s.t2 = l.at("t2").get<double>();
      s.c = number_from_json(l.at("c"), "oracle.latents.c");
      o.latents.push_back(s);
    }
  }
  if (j.contains("population")) {
    for (const auto& r : j.at("population")) {
      Covariates c;
      c.stage1 = r.at("x1").get<std::array<double, kStage1Count>>();
      c.stage2 = r.at("x2").get<std::array<double, kStage2Count>>();
      o.population.push_back(c);
    }
  }
}

}  // namespace sim

}  // namespace catrl
