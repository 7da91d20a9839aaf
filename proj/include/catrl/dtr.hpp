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

#ifndef CATRL_DTR_HPP_
#define CATRL_DTR_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "catrl/caipw.hpp"
#include "catrl/core.hpp"
#include "catrl/nuisance.hpp"
#include "catrl/policy_tree.hpp"

namespace catrl {

// Which history entries the propensity model may use.
//   all:          every history entry of the stage
//   misspecified: X1_Age at stage 1, X2_Sodium at stage 2 (intercept only
//                 at later stages)
//   custom:       explicit history names per stage
enum class PropensityPreset { kAll, kMisspecified, kCustom };

struct PropensitySpec {
  PropensityPreset preset = PropensityPreset::kAll;
  std::vector<std::vector<std::string>> features;  // custom only, per stage

  bool operator==(const PropensitySpec&) const = default;
};

std::vector<std::size_t> propensity_features(const PropensitySpec& spec, const SchemaSpec& schema, int stage);

// Pseudo-outcome of a subject censored during stage k+1: the model mean under
// the next rule (kMarginal), or that mean shifted by what is known from
// surviving to the censoring time (kConditional):
// mu_opt + E[min(T, tau) | T > C, A_obs] - mu_obs.
enum class CensoredImputation { kMarginal, kConditional };

struct FitConfig {
  // Per-stage tree hyperparameters; a single entry applies to every stage.
  std::vector<TreeHyperparams> trees{TreeHyperparams{}};
  NuisanceSettings nuisance;
  PropensitySpec propensity;
  std::optional<double> tau;  // nullopt: 0.9 quantile of the observed T
  std::uint64_t seed = 1;
  CensoringWeightAt censoring_weight_at = CensoringWeightAt::kStageEnd;
  CensoredImputation censored_imputation = CensoredImputation::kConditional;

  const TreeHyperparams& tree(int stage) const;
  void validate() const;
  void validate_for(const Dataset& dataset) const;
};

struct StageTrace {
  int stage = 0;  // 0-based
  std::size_t entrants = 0;
  NuisanceDiagnostics nuisance;
  std::vector<double> column_means;
  double lambda = 0.0;
  int depth = 0;
  std::size_t leaves = 0;
  std::string rules;
  std::size_t pseudo_defined = 0;  // subjects with a defined pseudo-outcome passed to the earlier stage
};

struct DTRPolicy {
  SchemaSpec schema;
  std::vector<PolicyTree> trees;  // index k serves stage k (0-based)
  FitConfig config;
  double tau = 0.0;
  std::vector<StageTrace> trace;  // in fitting order, last stage first
  std::string version;

  // Arm for stage k given a trajectory holding stages 0..k-1 plus the stage-k
  // covariates. Throws ConfigError on a malformed prefix.
  int recommend(const Trajectory& prefix, int k) const;
  int recommend_history(std::span<const double> h, int k) const;
};

// Replaces the fitted nuisance bundle of a stage, e.g. by the true functions.
using NuisanceProvider = std::function<std::shared_ptr<const StageNuisance>(const Dataset&, int stage)>;

struct FitHooks {
  NuisanceProvider nuisance;
  std::function<void(const CaipwMatrix&)> on_matrix;
  // Called with the pseudo-outcomes each stage is fitted against.
  std::function<void(const PseudoOutcomes&)> on_pseudo;
};

// Backward induction from the last stage to the first.
DTRPolicy fit(const Dataset& dataset, const FitConfig& config, const FitHooks& hooks = {});

// Rows of the stage-k entrants, their histories and outcome columns.
StageFitData stage_fit_data(const Dataset& dataset, int stage, const PseudoOutcomes& pseudo,
                            const std::vector<std::size_t>& propensity_features);
FeatureMatrix stage_histories(const Dataset& dataset, int stage);

inline constexpr int kPolicyFormatVersion = 1;
std::string serialize_policy(const DTRPolicy& policy);
DTRPolicy deserialize_policy(const std::string& doc);
void save_policy(const DTRPolicy& policy, const std::filesystem::path& path);
DTRPolicy load_policy(const std::filesystem::path& path);

struct GridEntry {
  std::size_t index = 0;
  std::optional<double> score;  // validation tau-RMST
  std::optional<double> std_error;
  double concordant_fraction = 0.0;
  std::string error;
};

struct GridResult {
  std::size_t best = 0;
  double tau = 0.0;
  std::vector<GridEntry> entries;
};

// Seeded subject-level split; each config is fitted on the training part and
// scored by the concordant-subgroup KM tau-RMST on the validation part. Ties
// go to the earlier config. Fit errors are recorded per entry; throws
// FitError only when every config fails.
GridResult grid_search(const Dataset& dataset, const std::vector<FitConfig>& grid, double validation_fraction,
                       std::uint64_t seed);

}  // namespace catrl

#endif  // CATRL_DTR_HPP_
