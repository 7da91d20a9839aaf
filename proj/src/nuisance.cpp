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

#include "catrl/nuisance.hpp"

#include <algorithm>
#include <cmath>

#include "catrl/error.hpp"
#include "catrl/rng.hpp"

namespace catrl {

void NuisanceSettings::validate() const {
  if (!(ridge >= 0.0)) throw ConfigError("nuisance.ridge must be >= 0");
  if (!(clip.lo > 0.0 && clip.lo < clip.hi && clip.hi < 1.0)) {
    throw ConfigError("nuisance.propensity_clip must satisfy 0 < lo < hi < 1");
  }
  if (!(censoring_floor > 0.0 && censoring_floor <= 1.0)) {
    throw ConfigError("nuisance.censoring_floor must be in (0, 1]");
  }
  if (min_arm_size < 1) throw ConfigError("nuisance.min_arm_size must be >= 1");
  forest.validate();
}

namespace {

struct ArmPartition {
  std::vector<std::vector<std::size_t>> rows;  // per arm
  std::vector<int> pooled;                     // arms too small for their own forest
};

ArmPartition partition_arms(std::span<const int> arms, int arity, std::size_t min_rows) {
  ArmPartition p;
  p.rows.resize(static_cast<std::size_t>(arity));
  for (std::size_t i = 0; i < arms.size(); ++i) p.rows[static_cast<std::size_t>(arms[i])].push_back(i);
  for (int a = 0; a < arity; ++a) {
    if (p.rows[static_cast<std::size_t>(a)].size() < min_rows) p.pooled.push_back(a);
  }
  return p;
}

FeatureMatrix select_rows(const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
  FeatureMatrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.set_row(i, x.row(rows[i]));
  return out;
}

// History with the treatment appended as the last column.
FeatureMatrix with_treatment(const FeatureMatrix& x, std::span<const int> arms) {
  FeatureMatrix out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
    out(i, x.cols()) = arms[i];
  }
  return out;
}

template <typename T>
std::vector<T> pick(std::span<const T> v, const std::vector<std::size_t>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

std::size_t min_rows_for(const ForestParams& params, std::size_t min_arm_size) {
  return std::max(min_arm_size, static_cast<std::size_t>(2 * params.leaf_min));
}

void check_inputs(const FeatureMatrix& h, std::span<const int> arms, std::size_t n_outcomes, int arity) {
  if (arms.size() != h.rows() || n_outcomes != h.rows()) throw ConfigError("mean model: input lengths differ");
  if (arity < 2) throw ConfigError("mean model: arity must be >= 2");
  for (int a : arms) {
    if (a < 0 || a >= arity) throw ConfigError("mean model: treatment out of range");
  }
}

ForestParams seeded(const ForestParams& params, std::uint64_t key) {
  ForestParams p = params;
  p.seed = derive_seed(params.seed, key);
  return p;
}

}  // namespace

ConditionalMeanModel ConditionalMeanModel::fit_survival(const FeatureMatrix& h, std::span<const int> arms,
                                                        std::span<const double> times, std::span<const int> events,
                                                        int arity, const ForestParams& params,
                                                        std::size_t min_arm_size) {
  check_inputs(h, arms, times.size(), arity);
  if (events.size() != times.size()) throw ConfigError("mean model: input lengths differ");
  ConditionalMeanModel m;
  m.kind_ = Kind::kSurvival;
  m.arity_ = arity;
  m.survival_.resize(static_cast<std::size_t>(arity));
  const auto part = partition_arms(arms, arity, min_rows_for(params, min_arm_size));
  m.index_rows(arms, part.rows);
  for (int a = 0; a < arity; ++a) {
    const auto& rows = part.rows[static_cast<std::size_t>(a)];
    if (std::find(part.pooled.begin(), part.pooled.end(), a) != part.pooled.end()) continue;
    m.survival_[static_cast<std::size_t>(a)] = SurvivalForest::fit(select_rows(h, rows), pick(times, rows),
                                                                   pick(events, rows),
                                                                   seeded(params, static_cast<std::uint64_t>(a)));
  }
  if (!part.pooled.empty()) {
    m.pooled_arms_ = part.pooled;
    m.pooled_survival_ = SurvivalForest::fit(with_treatment(h, arms), times, events, seeded(params, 1000));
  }
  return m;
}

ConditionalMeanModel ConditionalMeanModel::fit_regression(const FeatureMatrix& h, std::span<const int> arms,
                                                          std::span<const double> outcomes, int arity,
                                                          const ForestParams& params, std::size_t min_arm_size,
                                                          std::span<const double> weights) {
  check_inputs(h, arms, outcomes.size(), arity);
  ConditionalMeanModel m;
  m.kind_ = Kind::kRegression;
  m.arity_ = arity;
  m.regression_.resize(static_cast<std::size_t>(arity));
  const auto part = partition_arms(arms, arity, min_rows_for(params, min_arm_size));
  m.index_rows(arms, part.rows);
  for (int a = 0; a < arity; ++a) {
    const auto& rows = part.rows[static_cast<std::size_t>(a)];
    if (std::find(part.pooled.begin(), part.pooled.end(), a) != part.pooled.end()) continue;
    const std::vector<double> w = weights.empty() ? std::vector<double>{} : pick(weights, rows);
    m.regression_[static_cast<std::size_t>(a)] = RegressionForest::fit(
        select_rows(h, rows), pick(outcomes, rows), seeded(params, static_cast<std::uint64_t>(a)), w);
  }
  if (!part.pooled.empty()) {
    m.pooled_arms_ = part.pooled;
    m.pooled_regression_ = RegressionForest::fit(with_treatment(h, arms), outcomes, seeded(params, 1000), weights);
  }
  return m;
}

void ConditionalMeanModel::index_rows(std::span<const int> arms, const std::vector<std::vector<std::size_t>>& rows) {
  train_arms_.assign(arms.begin(), arms.end());
  local_row_.assign(arms.size(), 0);
  for (const auto& arm_rows : rows) {
    for (std::size_t j = 0; j < arm_rows.size(); ++j) local_row_[arm_rows[j]] = j;
  }
}

std::optional<std::size_t> ConditionalMeanModel::oob_row(int a, std::optional<std::size_t> row) const {
  if (!row || *row >= train_arms_.size()) return std::nullopt;
  const auto idx = static_cast<std::size_t>(a);
  const bool own_forest = kind_ == Kind::kSurvival ? survival_[idx].has_value() : regression_[idx].has_value();
  // The pooled forest saw every training row; an arm forest only its own.
  if (!own_forest) return row;
  if (train_arms_[*row] != a) return std::nullopt;
  return local_row_[*row];
}

double ConditionalMeanModel::predict_beyond(std::span<const double> h, int a, double survived, double horizon,
                                           std::optional<std::size_t> row) const {
  if (survived >= horizon) return std::max(horizon, 0.0);
  if (survived <= 0.0) return predict(h, a, horizon, row);
  if (kind_ == Kind::kRegression) return std::clamp(predict(h, a, horizon, row), survived, horizon);
  const auto idx = static_cast<std::size_t>(a);
  std::vector<double> xa;
  std::span<const double> x = h;
  const SurvivalForest* f = survival_[idx] ? &*survival_[idx] : &*pooled_survival_;
  if (!survival_[idx]) {
    xa.assign(h.begin(), h.end());
    xa.push_back(a);
    x = xa;
  }
  const auto oob = oob_row(a, row);
  const double s = f->survival(x, survived, oob);
  if (!(s > 1e-12)) return survived;
  const double tail = f->restricted_mean(x, horizon, oob) - f->restricted_mean(x, survived, oob);
  return std::clamp(survived + tail / s, survived, horizon);
}

double ConditionalMeanModel::predict(std::span<const double> h, int a, double horizon,
                                     std::optional<std::size_t> row) const {
  if (a < 0 || a >= arity_) throw ConfigError("mean model: arm out of range");
  if (!(horizon > 0.0)) return 0.0;
  const auto idx = static_cast<std::size_t>(a);
  const auto oob = oob_row(a, row);
  std::vector<double> xa;
  auto pooled_input = [&]() -> std::span<const double> {
    xa.assign(h.begin(), h.end());
    xa.push_back(a);
    return xa;
  };
  double v = 0.0;
  if (kind_ == Kind::kSurvival) {
    v = survival_[idx] ? survival_[idx]->restricted_mean(h, horizon, oob)
                       : pooled_survival_->restricted_mean(pooled_input(), horizon, oob);
  } else {
    v = regression_[idx] ? regression_[idx]->predict(h, oob) : pooled_regression_->predict(pooled_input(), oob);
  }
  return std::clamp(v, 0.0, horizon);
}

FittedStageNuisance FittedStageNuisance::fit(const StageFitData& data, const NuisanceSettings& settings,
                                             bool final_stage, std::uint64_t seed) {
  settings.validate();
  const std::size_t n = data.history.rows();
  if (n == 0) throw FitError("empty stage: no subjects entered");
  if (data.arms.size() != n || data.elapsed.size() != n || data.onward_time.size() != n ||
      data.onward_event.size() != n || data.pseudo.size() != n) {
    throw ConfigError("stage data: column lengths differ");
  }

  FittedStageNuisance out;
  out.clip_ = settings.clip;
  out.propensity_ =
      PropensityModel::fit(data.history, data.arms, data.arity, data.propensity_features, settings.ridge);
  out.diagnostics_.n = n;
  out.diagnostics_.propensity_iterations = out.propensity_.iterations();
  out.diagnostics_.propensity_gradient_norm = out.propensity_.gradient_norm();
  out.diagnostics_.propensity_log_likelihood = out.propensity_.log_likelihood();

  std::vector<int> censored(n);
  for (std::size_t i = 0; i < n; ++i) censored[i] = data.onward_event[i] ? 0 : 1;
  ForestParams forest = settings.forest;
  forest.seed = derive_seed(settings.forest.seed, seed);
  if (settings.censoring_model == CensoringModel::kForest) {
    if (n < static_cast<std::size_t>(2 * forest.leaf_min)) throw FitError("censoring forest: too few subjects");
    out.censoring_forest_ = SurvivalForest::fit(data.history, data.onward_time, censored, seeded(forest, 7));
    out.diagnostics_.censoring_model = "forest";
  } else {
    out.censoring_km_ = fit_km(data.onward_time, censored);
    out.diagnostics_.censoring_model = "kaplan_meier";
  }

  if (final_stage) {
    out.mean_ = ConditionalMeanModel::fit_survival(data.history, data.arms, data.onward_time, data.onward_event,
                                                   data.arity, seeded(forest, 11), settings.min_arm_size);
    out.diagnostics_.mean_model = "survival_forest";
    out.diagnostics_.mean_model_rows = n;
  } else {
    // Rows whose stage end (or tau) was seen, reweighted by the inverse
    // chance of seeing it.
    const bool aligned = data.duration.size() == n && data.stage_event.size() == n;
    std::vector<std::size_t> rows;
    std::vector<double> y;
    std::vector<double> w;
    std::vector<int> arms;
    for (std::size_t i = 0; i < n; ++i) {
      const double horizon = data.tau - data.elapsed[i];
      double seen = 0.0;
      if (!std::isnan(data.pseudo[i])) {
        y.push_back(std::clamp(data.pseudo[i] - data.elapsed[i], 0.0, std::max(horizon, 0.0)));
        seen = aligned ? std::min(data.duration[i], horizon) : 0.0;
      } else if (data.onward_time[i] >= horizon) {
        y.push_back(std::max(horizon, 0.0));
        seen = horizon;
      } else {
        continue;
      }
      rows.push_back(i);
      arms.push_back(data.arms[i]);
      const double s = seen > 0.0 ? out.censoring_survival(data.history.row(i), 0.0, seen, i) : 1.0;
      w.push_back(1.0 / std::max(s, settings.censoring_floor));
    }
    if (rows.size() < static_cast<std::size_t>(2 * forest.leaf_min)) {
      throw FitError("mean model: too few subjects with a defined pseudo-outcome");
    }
    out.mean_row_.assign(n, kUnused);
    for (std::size_t j = 0; j < rows.size(); ++j) out.mean_row_[rows[j]] = j;
    out.mean_ = ConditionalMeanModel::fit_regression(select_rows(data.history, rows), arms, y, data.arity,
                                                     seeded(forest, 11), settings.min_arm_size, w);
    out.diagnostics_.mean_model = "regression_forest";
    out.diagnostics_.mean_model_rows = rows.size();
  }
  out.diagnostics_.pooled_arms = out.mean_->pooled_arms();
  return out;
}

std::vector<double> FittedStageNuisance::propensity(std::span<const double> h) const {
  return propensity_.predict(h, clip_);
}

double FittedStageNuisance::censoring_survival(std::span<const double> h, double elapsed, double t, Row row) const {
  const double s = t - elapsed;
  if (censoring_forest_) return censoring_forest_->survival(h, s, row);
  return censoring_km_->at(s);
}

double StageNuisance::mean_outcome_beyond(std::span<const double> h, double elapsed, int a, double tau,
                                          double survived, Row row) const {
  return std::clamp(mean_outcome(h, elapsed, a, tau, row), std::min(survived, tau), tau);
}

StageNuisance::Row FittedStageNuisance::mean_row(Row row) const {
  if (!row) return std::nullopt;
  if (mean_row_.empty()) return row;
  if (*row >= mean_row_.size() || mean_row_[*row] == kUnused) return std::nullopt;
  return mean_row_[*row];
}

double FittedStageNuisance::mean_outcome_beyond(std::span<const double> h, double elapsed, int a, double tau,
                                                double survived, Row row) const {
  if (elapsed >= tau) return tau;
  return elapsed + mean_->predict_beyond(h, a, survived - elapsed, tau - elapsed, mean_row(row));
}

double FittedStageNuisance::mean_outcome(std::span<const double> h, double elapsed, int a, double tau,
                                         Row row) const {
  if (elapsed >= tau) return tau;
  return elapsed + mean_->predict(h, a, tau - elapsed, mean_row(row));
}

}  // namespace catrl
