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

#ifndef CATRL_EVAL_HPP_
#define CATRL_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "catrl/core.hpp"
#include "catrl/dtr.hpp"
#include "catrl/simgen.hpp"
#include "catrl/survival.hpp"

namespace catrl {

enum class PolicyKind {
  kFitted,    // a DTRPolicy
  kFixed,     // the same arm at every stage
  kRandom,    // uniform over arms, independently per stage
  kOptimal,   // the scenario's true rules (scenario schema only)
  kObserved,  // replays the observed treatments (observational value only)
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::kFixed;
  std::shared_ptr<const DTRPolicy> policy;
  int arm = 0;
  std::string name;

  static PolicySpec fitted(std::shared_ptr<const DTRPolicy> p, std::string name = "CA-TRL");
  static PolicySpec fixed(int arm);
  static PolicySpec random();
  static PolicySpec optimal();
  static PolicySpec observed();
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct EvalReport {
  std::string policy;
  double tau = 0.0;
  Estimate rmst;
  Estimate cdr1;
  Estimate acdr;
  // Mean of T*(g) with every eps at zero, the systematic survival of each
  // subject. The plain sample mean under fresh eps has no finite
  // expectation (T2 grows like exp(0.2 T1)) and is kept for reference only.
  Estimate expected_survival;
  Estimate sampled_mean_survival;
  std::size_t n_eval = 0;
};

struct CounterfactualOptions {
  std::size_t n_mc = 10000;
  std::optional<double> tau;  // default: the oracle's tau
  std::uint64_t seed = 1;
  // Noise-free stage times instead of fresh eps draws.
  bool zero_noise = false;
  // Evaluate on these covariates instead of fresh draws from the sampler;
  // n_mc is then ignored. Without it, an oracle built on user covariates
  // cycles through those rows.
  std::shared_ptr<const std::vector<sim::Covariates>> population;
};

// Pushes subjects through the true generative model with the policy's
// treatments, without censoring. The noise draws of subject i depend only on
// (seed, i), so every policy sees the same eps. ACDR counts a subject as
// correct when every stage decision agrees with the true rule.
EvalReport counterfactual_eval(const PolicySpec& policy, const sim::Oracle& oracle, const CounterfactualOptions& options);

struct ObservationalValue {
  std::optional<RmstEstimate> rmst;  // absent when no subject is concordant
  std::size_t concordant = 0;
  double concordant_fraction = 0.0;
  bool small_sample = false;  // fewer than 10 concordant subjects
};

// KM tau-RMST among subjects whose observed treatment agrees with the policy
// at every stage they entered.
ObservationalValue observational_value(const PolicySpec& policy, const Dataset& dataset, double tau,
                                       std::uint64_t seed = 1);

// Arm the policy assigns at stage k for a subject with history h. `stream`
// supplies the draws of the random policy.
int policy_arm(const PolicySpec& policy, std::span<const double> h, int k, int arity, RngStream& stream);

struct BenchmarkConfig {
  std::vector<int> arities{2, 3};
  std::vector<sim::PropensityMode> propensity_modes{sim::PropensityMode::kTrue, sim::PropensityMode::kMisspecified};
  std::vector<sim::CensoringKind> censoring_kinds{sim::CensoringKind::kExponential, sim::CensoringKind::kConditional,
                                                  sim::CensoringKind::kUniform};
  std::size_t n_subjects = 10000;  // per cell, split into `folds` folds
  int folds = 5;
  double target_censor_rate = 0.62;
  double noise_rate = 2.0;
  std::uint64_t seed = 1;
  FitConfig fit;  // the propensity preset is set per cell from the mode
  std::optional<std::filesystem::path> cache_dir;

  void validate() const;
};

struct MethodSummary {
  std::string method;
  std::vector<EvalReport> folds;
  Estimate rmst;  // mean and sd across folds
  Estimate cdr1;
  Estimate acdr;
  Estimate expected_survival;
};

struct CellResult {
  int arity = 2;
  sim::PropensityMode propensity_mode = sim::PropensityMode::kTrue;
  sim::CensoringKind censoring_kind = sim::CensoringKind::kExponential;
  double censoring_rate = 0.0;
  double tau = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<std::string> errors;  // per-fold failures
  std::string key;                  // content hash of the cell inputs
};

struct BenchmarkReport {
  std::vector<CellResult> cells;
  std::size_t failed_cells = 0;

  std::string to_csv() const;
  std::string to_json() const;
  std::string to_text() const;
};

// Methods per cell: CA-TRL, fixed g = 0..M-1, Random, and the true rules as a
// reference row. Each fold trains on one fold and evaluates on the rest.
BenchmarkReport benchmark(const BenchmarkConfig& config);

// FNV-1a of a string, as 16 hex digits.
std::string content_hash(const std::string& text);

}  // namespace catrl

#endif  // CATRL_EVAL_HPP_
