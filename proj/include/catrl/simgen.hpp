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

#ifndef CATRL_SIMGEN_HPP_
#define CATRL_SIMGEN_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catrl/core.hpp"
#include "catrl/rng.hpp"

// Semi-synthetic two-stage scenario generator. Stage 1 targets renal/anemia
// management, stage 2 glycemic control. Fitting code only ever sees the
// emitted Dataset; the Oracle keeps the latent times and the true rules for
// evaluation.
namespace catrl::sim {

// Stage-1 covariate layout.
enum Stage1Cov : std::size_t {
  kAge = 0,
  kCreatinine,
  kHemoglobin,
  kPotassium,
  kSodium,
  kGlucose,
  kPlateletCount,
  kHematocrit,
  kWbc,
  kStage1Count,
};

// Stage-2 covariate layout (labs re-measured at the start of stage 2).
enum Stage2Cov : std::size_t {
  kCreatinine2 = 0,
  kHemoglobin2,
  kPotassium2,
  kSodium2,
  kGlucose2,
  kPlateletCount2,
  kHematocrit2,
  kWbc2,
  kStage2Count,
};

const std::vector<std::string>& stage1_names();
const std::vector<std::string>& stage2_names();
SchemaSpec scenario_schema(int arity);

enum class PropensityMode { kTrue, kMisspecified };
enum class CensoringKind { kNone, kExponential, kConditional, kUniform };
// kCoupled draws hemoglobin given creatinine; kIndependent draws every
// covariate on its own.
enum class CovariateModel { kCoupled, kIndependent };

std::string_view to_string(PropensityMode m);
std::string_view to_string(CensoringKind k);
PropensityMode parse_propensity_mode(std::string_view s);
CensoringKind parse_censoring_kind(std::string_view s);
std::string_view to_string(CovariateModel m);
CovariateModel parse_covariate_model(std::string_view s);

// For exponential and conditional kinds c0 is the scale (mean) of the base
// exponential draw. Uniform draws from [a, b).
struct CensoringParams {
  CensoringKind kind = CensoringKind::kNone;
  double c0 = 1.0;
  double a = 0.0;
  double b = 1.0;

  void validate() const;
  bool operator==(const CensoringParams&) const = default;
};

struct ScenarioConfig {
  std::size_t n_subjects = 1000;
  int arity = 2;
  PropensityMode propensity_mode = PropensityMode::kTrue;
  CensoringKind censoring_kind = CensoringKind::kExponential;
  double target_censor_rate = 0.62;
  double noise_rate = 2.0;  // rate of eps ~ Exp(noise_rate)
  std::uint64_t seed = 1;
  std::optional<double> tau;  // nullopt: 0.9 quantile of observed T
  // When set, calibration is skipped and these parameters are used.
  std::optional<CensoringParams> censoring;
  std::size_t pilot_size = 10000;
  double uniform_lower = 0.0;
  CovariateModel covariate_model = CovariateModel::kCoupled;

  // Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};

struct Covariates {
  std::array<double, kStage1Count> stage1{};
  std::array<double, kStage2Count> stage2{};
};

// Draws from the fixed clinical sampler (see README for the distributions).
// Deterministic in (seed, subject, model).
Covariates sample_subject_covariates(std::uint64_t seed, std::uint64_t subject,
                                     CovariateModel model = CovariateModel::kCoupled);
std::vector<Covariates> sample_covariates(std::size_t n, std::uint64_t seed,
                                          CovariateModel model = CovariateModel::kCoupled);
// User covariates: columns X1_<name> and X2_<name> for every stage-1 and
// stage-2 covariate name; other columns are ignored.
std::vector<Covariates> load_covariates_csv(const std::filesystem::path& path);

// Treatment probabilities. Reference arm 0 has unnormalized weight 1.
std::vector<double> stage1_propensity(std::span<const double> x1, int arity);
std::vector<double> stage2_propensity(std::span<const double> x2, double t1, int arity);

int g1_opt(std::span<const double> x1, int arity);
// Binary rule I(G > 140) + I(T1 < 3) is clamped to 1.
int g2_opt(double glucose, double t1, int arity);

// Stage durations given the noise draw eps.
double stage1_time(std::span<const double> x1, int a1, int arity, double eps);
double stage2_time(std::span<const double> x2, double t1, int a2, int arity, double eps);

struct StageTimes {
  double t1;
  double t2;
};
StageTimes gen_stage_times(std::span<const double> x1, std::span<const double> x2, int a1, int a2, int arity,
                           double noise_rate, RngStream& noise1, RngStream& noise2);

// Covariate factor of conditional censoring: exp(0.3 Cr + 0.2 |K - 4|).
double conditional_censoring_factor(std::span<const double> x1);
double sample_censoring(const CensoringParams& params, std::span<const double> x1, RngStream& rng);
// True P(C > t | x1).
double censoring_survival(const CensoringParams& params, std::span<const double> x1, double t);

struct Observed {
  bool eta;        // entered stage 2
  double total;    // T
  double r1;
  std::optional<double> r2;
  bool delta1;
  bool delta2;     // meaningful only when eta
};
Observed assemble_observed(double t1, double t2, double c);

// Latent quantities needed to recompute a subject's censoring status for any
// censoring parameters.
struct PilotSubject {
  double t1;
  double t2;
  double censor_factor;  // conditional factor
};

// Censoring fraction over the pilot for the given parameters, reusing the
// pilot's base censoring draws so the rate is monotone in the scale.
double pilot_censoring_rate(const CensoringParams& params, std::span<const PilotSubject> pilot,
                            std::span<const double> base_draws);
// Bisection on c0 (exponential, conditional) or b with a = uniform_lower
// (uniform). Throws CalibrationError when no bracket is found or the achieved
// rate is more than 0.02 from the target.
CensoringParams calibrate_censoring(CensoringKind kind, double target_rate, std::span<const PilotSubject> pilot,
                                    std::span<const double> base_draws, double uniform_lower = 0.0);
std::vector<PilotSubject> simulate_pilot(const ScenarioConfig& config, std::vector<double>* base_draws,
                                         std::span<const Covariates> population = {});

struct SubjectLatent {
  std::array<double, kStage2Count> x2{};  // drawn for every subject, observed only if eta
  int a2 = 0;                             // assigned even if stage 2 is never entered
  double t1 = 0.0;
  double t2 = 0.0;
  double c = 0.0;
};

struct Oracle {
  ScenarioConfig config;
  CensoringParams censoring;
  double tau = 0.0;
  std::vector<SubjectLatent> latents;
  // User-supplied covariates replacing the sampler; empty when sampled.
  std::vector<Covariates> population;

  int g1(std::span<const double> x1) const { return g1_opt(x1, config.arity); }
  int g2(double glucose, double t1) const { return g2_opt(glucose, t1, config.arity); }
};

struct Generated {
  Dataset dataset;
  Oracle oracle;
};

// Full scenario: covariates, treatments, stage times, calibrated censoring,
// observed data. Deterministic in config.seed.
// With a non-empty `population`, subject i takes row i mod its size in place
// of a sampler draw; the pilot used for calibration does the same.
Generated generate(const ScenarioConfig& config, std::span<const Covariates> population = {});

// E[min(T1(a), tau) | x1] under eps ~ Exp(noise_rate), in closed form.
double restricted_stage1_mean(std::span<const double> x1, int a, int arity, double noise_rate, double tau);

// Type-7 empirical quantile.
double quantile(std::vector<double> values, double p);

}  // namespace catrl::sim

#endif  // CATRL_SIMGEN_HPP_
