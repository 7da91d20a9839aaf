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

#include "catrl/dtr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catrl/error.hpp"
#include "catrl/eval.hpp"
#include "catrl/parallel.hpp"
#include "catrl/rng.hpp"
#include "catrl/simgen.hpp"
#include "json_io.hpp"

namespace catrl {

std::vector<std::size_t> propensity_features(const PropensitySpec& spec, const SchemaSpec& schema, int stage) {
  const auto names = history_names(schema, stage);
  auto index_of = [&](const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw ConfigError("propensity: stage " + std::to_string(stage + 1) + " history has no entry '" + name + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
  };
  std::vector<std::size_t> out;
  switch (spec.preset) {
    case PropensityPreset::kAll:
      out.resize(names.size());
      std::iota(out.begin(), out.end(), std::size_t{0});
      break;
    case PropensityPreset::kMisspecified:
      if (stage == 0) out.push_back(index_of("X1_Age"));
      if (stage == 1) out.push_back(index_of("X2_Sodium"));
      break;
    case PropensityPreset::kCustom:
      if (static_cast<std::size_t>(stage) >= spec.features.size()) {
        throw ConfigError("propensity: no custom feature list for stage " + std::to_string(stage + 1));
      }
      for (const auto& n : spec.features[static_cast<std::size_t>(stage)]) out.push_back(index_of(n));
      break;
  }
  return out;
}

const TreeHyperparams& FitConfig::tree(int stage) const {
  if (trees.size() == 1) return trees.front();
  return trees.at(static_cast<std::size_t>(stage));
}

void FitConfig::validate() const {
  if (trees.empty()) throw ConfigError("fit.trees must not be empty");
  for (const auto& t : trees) t.validate();
  nuisance.validate();
  if (tau && !(*tau > 0.0 && std::isfinite(*tau))) throw ConfigError("fit.tau must be > 0");
}

void FitConfig::validate_for(const Dataset& dataset) const {
  validate();
  if (trees.size() != 1 && trees.size() != static_cast<std::size_t>(dataset.stages())) {
    throw ConfigError("fit.trees has " + std::to_string(trees.size()) + " entries for a " +
                      std::to_string(dataset.stages()) + "-stage dataset");
  }
  for (int k = 0; k < dataset.stages(); ++k) propensity_features(propensity, dataset.schema, k);
}

FeatureMatrix stage_histories(const Dataset& dataset, int stage) {
  FeatureMatrix x(0, history_length(dataset.schema, stage));
  for (const auto& traj : dataset.trajectories) {
    if (traj.stages[static_cast<std::size_t>(stage)].entered) x.append_row(build_history(traj, stage));
  }
  return x;
}

StageFitData stage_fit_data(const Dataset& dataset, int stage, const PseudoOutcomes& pseudo,
                            const std::vector<std::size_t>& features) {
  StageFitData d;
  d.history = stage_histories(dataset, stage);
  d.arity = dataset.arity(stage);
  d.propensity_features = features;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& traj = dataset.trajectories[i];
    const auto& rec = traj.stages[static_cast<std::size_t>(stage)];
    if (!rec.entered) continue;
    const double elapsed = traj.elapsed_before(stage);
    d.arms.push_back(*rec.treatment);
    d.elapsed.push_back(elapsed);
    // Summed stage by stage: T - elapsed cancels to 0 when R_k is tiny.
    double onward = 0.0;
    for (std::size_t j = static_cast<std::size_t>(stage); j < traj.stages.size() && traj.stages[j].entered; ++j) {
      onward += traj.stages[j].duration.value_or(0.0);
    }
    d.onward_time.push_back(onward);
    d.onward_event.push_back(traj.final_event() ? 1 : 0);
    d.pseudo.push_back(pseudo.values[i]);
    d.duration.push_back(rec.duration.value_or(0.0));
    d.stage_event.push_back(rec.event ? 1 : 0);
  }
  return d;
}

int DTRPolicy::recommend_history(std::span<const double> h, int k) const {
  if (k < 0 || static_cast<std::size_t>(k) >= trees.size()) throw ConfigError("recommend: stage out of range");
  if (h.size() != history_length(schema, k)) {
    throw ConfigError("recommend: history length " + std::to_string(h.size()) + " does not match stage " +
                      std::to_string(k + 1) + " layout (" + std::to_string(history_length(schema, k)) + ")");
  }
  return trees[static_cast<std::size_t>(k)].predict(h);
}

int DTRPolicy::recommend(const Trajectory& prefix, int k) const {
  if (k < 0 || k >= schema.stages()) throw ConfigError("recommend: stage out of range");
  if (prefix.stages.size() <= static_cast<std::size_t>(k)) throw ConfigError("recommend: prefix lacks stage " + std::to_string(k + 1));
  for (int j = 0; j <= k; ++j) {
    const auto& rec = prefix.stages[static_cast<std::size_t>(j)];
    if (!rec.entered || rec.covariates.size() != schema.covariates[static_cast<std::size_t>(j)].size()) {
      throw ConfigError("recommend: prefix is missing the stage " + std::to_string(j + 1) + " covariates");
    }
  }
  return recommend_history(build_history(prefix, k), k);
}

namespace {

double resolve_tau(const Dataset& dataset, const FitConfig& config) {
  if (config.tau) return *config.tau;
  std::vector<double> times;
  times.reserve(dataset.size());
  for (const auto& t : dataset.trajectories) times.push_back(t.total_time);
  return sim::quantile(std::move(times), 0.9);
}

void check_stage_arms(const Dataset& dataset, int k) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(dataset.arity(k)), 0);
  std::size_t entrants = 0;
  for (const auto& traj : dataset.trajectories) {
    const auto& rec = traj.stages[static_cast<std::size_t>(k)];
    if (!rec.entered) continue;
    ++entrants;
    ++counts[static_cast<std::size_t>(*rec.treatment)];
  }
  if (entrants == 0) throw FitError("empty stage: no subject entered stage " + std::to_string(k + 1));
  for (std::size_t a = 0; a < counts.size(); ++a) {
    if (counts[a] == 0) {
      throw FitError("positivity violated in sample: arm " + std::to_string(a) + " never observed at stage " +
                     std::to_string(k + 1));
    }
  }
}

}  // namespace

DTRPolicy fit(const Dataset& dataset, const FitConfig& config, const FitHooks& hooks) {
  config.validate_for(dataset);
  if (const auto v = validate(dataset); !v.empty()) {
    throw ConfigError("invalid dataset: subject " + std::to_string(v.front().subject) + ": " + v.front().message);
  }
  const int K = dataset.stages();
  for (int k = 0; k < K; ++k) check_stage_arms(dataset, k);

  DTRPolicy policy;
  policy.schema = dataset.schema;
  policy.config = config;
  policy.tau = resolve_tau(dataset, config);
  policy.version = CATRL_VERSION;
  policy.trees.resize(static_cast<std::size_t>(K));
  const double tau = policy.tau;
  if (!(tau > 0.0)) throw FitError("tau resolved to a non-positive value");

  PseudoOutcomes pseudo = final_pseudo_outcomes(dataset);
  for (int k = K - 1; k >= 0; --k) {
    const auto features = propensity_features(config.propensity, dataset.schema, k);
    StageTrace trace;
    trace.stage = k;

    if (hooks.on_pseudo) hooks.on_pseudo(pseudo);
    std::shared_ptr<const StageNuisance> models;
    if (hooks.nuisance) {
      models = hooks.nuisance(dataset, k);
      trace.nuisance.mean_model = "provided";
      trace.nuisance.censoring_model = "provided";
    }
    if (!models) {
      StageFitData data = stage_fit_data(dataset, k, pseudo, features);
      data.tau = tau;
      auto fitted = std::make_shared<FittedStageNuisance>(FittedStageNuisance::fit(
          data, config.nuisance, k == K - 1, derive_seed(config.seed, static_cast<std::uint64_t>(k))));
      trace.nuisance = fitted->diagnostics();
      models = std::move(fitted);
    }

    const CaipwMatrix matrix =
        caipw_matrix(dataset, k, *models, pseudo,
                     CaipwOptions{tau, config.nuisance.censoring_floor, config.censoring_weight_at});
    if (hooks.on_matrix) hooks.on_matrix(matrix);
    const FeatureMatrix histories = stage_histories(dataset, k);
    std::vector<std::size_t> rows(matrix.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    PolicyTree tree = grow(rows, histories, matrix, config.tree(k));

    trace.entrants = matrix.rows();
    trace.column_means = matrix.column_means();
    trace.lambda = tree.lambda;
    trace.depth = tree.depth();
    trace.leaves = tree.leaf_count();
    trace.rules = render_rules(tree, history_names(dataset.schema, k));

    if (k > 0) {
      // R-bar for stage k-1 under the just-fitted rule at stage k.
      PseudoOutcomes prev;
      prev.stage = k - 1;
      prev.values.assign(dataset.size(), std::nan(""));
      std::vector<std::size_t> entrant_row(dataset.size(), 0);
      for (std::size_t r = 0; r < matrix.rows(); ++r) entrant_row[matrix.subjects[r]] = r;
      parallel_for(dataset.size(), [&](std::size_t i) {
        const auto& traj = dataset.trajectories[i];
        const auto& before = traj.stages[static_cast<std::size_t>(k - 1)];
        const auto& rec = traj.stages[static_cast<std::size_t>(k)];
        if (!before.entered) return;
        if (!rec.entered) {
          if (before.event) prev.values[i] = std::min(traj.total_time, tau);
          return;
        }
        const History h = build_history(traj, k);
        const double elapsed = traj.elapsed_before(k);
        const int g = tree.predict(h);
        const std::size_t row = entrant_row[i];
        const double mu_opt = models->mean_outcome(h, elapsed, g, tau, row);
        const double mu_obs = models->mean_outcome(h, elapsed, *rec.treatment, tau, row);
        const double next = std::isnan(pseudo.values[i]) ? 0.0 : std::min(pseudo.values[i], tau);
        const bool delta = rec.event && !std::isnan(pseudo.values[i]);
        double shift = 0.0;
        if (!delta && config.censored_imputation == CensoredImputation::kConditional) {
          shift = models->mean_outcome_beyond(h, elapsed, *rec.treatment, tau, traj.total_time, row) - mu_obs;
        }
        prev.values[i] = pseudo_outcome(delta, next, mu_opt + shift, mu_obs, tau);
      });
      trace.pseudo_defined = static_cast<std::size_t>(
          std::count_if(prev.values.begin(), prev.values.end(), [](double v) { return !std::isnan(v); }));
      pseudo = std::move(prev);
    }
    policy.trees[static_cast<std::size_t>(k)] = std::move(tree);
    policy.trace.push_back(std::move(trace));
  }
  return policy;
}

std::string serialize_policy(const DTRPolicy& policy) {
  json trees = json::array();
  for (const auto& t : policy.trees) trees.push_back(t);
  const json doc{{"format", "catrl-policy"},
                 {"version", kPolicyFormatVersion},
                 {"library_version", policy.version},
                 {"schema", policy.schema},
                 {"tau", number_to_json(policy.tau)},
                 {"seed", policy.config.seed},
                 {"config", policy.config},
                 {"trees", trees},
                 {"fit_log", policy.trace}};
  return doc.dump(2) + "\n";
}

DTRPolicy deserialize_policy(const std::string& text) {
  const json doc = parse_json(text, "policy document");
  try {
    if (!doc.is_object() || doc.value("format", "") != "catrl-policy") throw ConfigError("policy: wrong format tag");
    if (doc.value("version", 0) != kPolicyFormatVersion) {
      throw ConfigError("policy: unsupported version " + doc.value("version", json(nullptr)).dump());
    }
    DTRPolicy p;
    p.version = doc.value("library_version", "");
    p.schema = doc.at("schema").get<SchemaSpec>();
    p.tau = number_from_json(doc.at("tau"), "policy.tau");
    p.config = doc.at("config").get<FitConfig>();
    for (const auto& t : doc.at("trees")) p.trees.push_back(t.get<PolicyTree>());
    if (p.trees.size() != static_cast<std::size_t>(p.schema.stages())) {
      throw ConfigError("policy: tree count does not match the schema");
    }
    if (doc.contains("fit_log")) p.trace = doc.at("fit_log").get<std::vector<StageTrace>>();
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed policy document: ") + e.what());
  }
}

void save_policy(const DTRPolicy& policy, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_policy(policy));
}

DTRPolicy load_policy(const std::filesystem::path& path) { return deserialize_policy(read_file(path)); }

GridResult grid_search(const Dataset& dataset, const std::vector<FitConfig>& grid, double validation_fraction,
                       std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("grid search: empty grid");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("grid search: validation_fraction must be in (0, 1)");
  }
  for (const auto& c : grid) c.validate_for(dataset);

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(seed, 0, StreamTag::kSplit);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val == n) throw ConfigError("grid search: split leaves an empty part");
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  const Dataset train_ds = dataset.subset(train);
  const Dataset val_ds = dataset.subset(val);

  GridResult result;
  result.tau = resolve_tau(dataset, grid.front());
  result.entries.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    GridEntry& e = result.entries[i];
    e.index = i;
    try {
      FitConfig cfg = grid[i];
      if (!cfg.tau) cfg.tau = result.tau;
      auto policy = std::make_shared<const DTRPolicy>(fit(train_ds, cfg));
      const auto v = observational_value(PolicySpec::fitted(policy), val_ds, result.tau);
      e.concordant_fraction = v.concordant_fraction;
      if (v.rmst) {
        e.score = v.rmst->value;
        e.std_error = v.rmst->std_error;
      } else {
        e.error = "no validation subject follows the policy";
      }
    } catch (const Error& err) {
      e.error = err.what();
    }
  });

  bool any = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& e = result.entries[i];
    if (!e.score) continue;
    if (!any || *e.score > *result.entries[result.best].score) result.best = i;
    any = true;
  }
  if (!any) throw FitError("grid search: every config failed (first error: " + result.entries.front().error + ")");
  return result;
}

}  // namespace catrl
