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

#ifndef CATRL_NUISANCE_HPP_
#define CATRL_NUISANCE_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catrl/forest.hpp"
#include "catrl/propensity.hpp"
#include "catrl/survival.hpp"

namespace catrl {

// The three nuisance functions of one stage. Times are on the total-time
// axis; `elapsed` is the time at which the subject entered the stage (the sum
// of earlier stage durations). `row`, when given, is the subject's position
// among the stage entrants the models were fitted on; fitted forests then
// predict out-of-bag.
class StageNuisance {
 public:
  using Row = std::optional<std::size_t>;
  virtual ~StageNuisance() = default;

  // Treatment probabilities given the history; entries sum to 1.
  virtual std::vector<double> propensity(std::span<const double> h) const = 0;
  // P(C > t | H) for t >= elapsed, unfloored.
  virtual double censoring_survival(std::span<const double> h, double elapsed, double t, Row row = {}) const = 0;
  // E[min(T, tau) | H, A = a], in [0, tau].
  virtual double mean_outcome(std::span<const double> h, double elapsed, int a, double tau, Row row = {}) const = 0;
  // E[min(T, tau) | H, A = a, T > survived] for survived >= elapsed. The
  // default only enforces the lower bound.
  virtual double mean_outcome_beyond(std::span<const double> h, double elapsed, int a, double tau, double survived,
                                     Row row = {}) const;
};

enum class CensoringModel { kForest, kKaplanMeier };

struct NuisanceSettings {
  double ridge = 1e-4;
  PropensityClip clip;
  double censoring_floor = 0.05;
  CensoringModel censoring_model = CensoringModel::kForest;
  ForestParams forest;
  // Arms with fewer training subjects share one pooled forest that sees the
  // treatment as an extra feature.
  std::size_t min_arm_size = 50;

  void validate() const;
};

// Per-arm conditional mean of the stage-onward outcome. At the final stage
// each arm has a survival forest and the mean is the restricted mean of its
// curve; at earlier stages the pseudo-outcome is regressed with a regression
// forest.
class ConditionalMeanModel {
 public:
  enum class Kind { kSurvival, kRegression };

  static ConditionalMeanModel fit_survival(const FeatureMatrix& h, std::span<const int> arms,
                                           std::span<const double> times, std::span<const int> events, int arity,
                                           const ForestParams& params, std::size_t min_arm_size);
  static ConditionalMeanModel fit_regression(const FeatureMatrix& h, std::span<const int> arms,
                                             std::span<const double> outcomes, int arity, const ForestParams& params,
                                             std::size_t min_arm_size, std::span<const double> weights = {});

  // Restricted mean of the stage-onward outcome over [0, horizon], in [0, horizon].
  // `row` is a training row of the fit; forests that saw it predict out-of-bag.
  double predict(std::span<const double> h, int a, double horizon, std::optional<std::size_t> row = {}) const;
  // Same, given the onward outcome exceeds `survived`; in [survived, horizon].
  // Regression models only apply the bound.
  double predict_beyond(std::span<const double> h, int a, double survived, double horizon,
                        std::optional<std::size_t> row = {}) const;

  Kind kind() const { return kind_; }
  int arity() const { return arity_; }
  // Arms served by the pooled forest.
  const std::vector<int>& pooled_arms() const { return pooled_arms_; }

 private:
  Kind kind_ = Kind::kSurvival;
  int arity_ = 2;
  std::vector<std::optional<SurvivalForest>> survival_;
  std::vector<std::optional<RegressionForest>> regression_;
  std::optional<SurvivalForest> pooled_survival_;
  std::optional<RegressionForest> pooled_regression_;
  std::vector<int> pooled_arms_;
  void index_rows(std::span<const int> arms, const std::vector<std::vector<std::size_t>>& rows);
  std::optional<std::size_t> oob_row(int a, std::optional<std::size_t> row) const;

  std::vector<int> train_arms_;
  std::vector<std::size_t> local_row_;  // training row -> row within its arm's forest
};

// Training rows of one stage: subjects with eta_k = 1.
struct StageFitData {
  FeatureMatrix history;
  std::vector<int> arms;
  std::vector<double> elapsed;
  std::vector<double> onward_time;  // T - elapsed
  std::vector<int> onward_event;    // overall outcome uncensored
  std::vector<double> pseudo;       // pseudo-outcome on the total axis; NaN where undefined
  std::vector<double> duration;     // observed R_k
  std::vector<int> stage_event;     // delta_k
  double tau = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> propensity_features;
  int arity = 2;
};

struct NuisanceDiagnostics {
  std::size_t n = 0;
  int propensity_iterations = 0;
  double propensity_gradient_norm = 0.0;
  double propensity_log_likelihood = 0.0;
  std::string censoring_model;
  std::string mean_model;
  std::vector<int> pooled_arms;
  std::size_t mean_model_rows = 0;
};

class FittedStageNuisance final : public StageNuisance {
 public:
  // Fits the propensity model, the censoring model on (onward_time,
  // 1 - onward_event) and the conditional mean model (survival forests when
  // final_stage, regression forests on pseudo - elapsed otherwise).
  static FittedStageNuisance fit(const StageFitData& data, const NuisanceSettings& settings, bool final_stage,
                                 std::uint64_t seed);

  std::vector<double> propensity(std::span<const double> h) const override;
  double censoring_survival(std::span<const double> h, double elapsed, double t, Row row = {}) const override;
  double mean_outcome(std::span<const double> h, double elapsed, int a, double tau, Row row = {}) const override;
  double mean_outcome_beyond(std::span<const double> h, double elapsed, int a, double tau, double survived,
                             Row row = {}) const override;

  const PropensityModel& propensity_model() const { return propensity_; }
  const NuisanceDiagnostics& diagnostics() const { return diagnostics_; }

 private:
  PropensityModel propensity_;
  PropensityClip clip_;
  std::optional<SurvivalForest> censoring_forest_;
  std::optional<SurvivalCurve> censoring_km_;
  std::optional<ConditionalMeanModel> mean_;
  static constexpr std::size_t kUnused = static_cast<std::size_t>(-1);
  Row mean_row(Row row) const;

  std::vector<std::size_t> mean_row_;  // stage row -> mean-model training row; empty means identity
  NuisanceDiagnostics diagnostics_;
};

}  // namespace catrl

#endif  // CATRL_NUISANCE_HPP_
