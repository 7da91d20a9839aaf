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

#include "catrl/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

#include "catrl/error.hpp"
#include "catrl/parallel.hpp"

namespace catrl::sim {

namespace {

std::vector<double> softmax_with_reference(std::span<const double> logits) {
  // logits excludes the reference arm, whose logit is 0.
  double max_logit = 0.0;
  for (double l : logits) max_logit = std::max(max_logit, l);
  std::vector<double> p(logits.size() + 1);
  p[0] = std::exp(-max_logit);
  double sum = p[0];
  for (std::size_t a = 0; a < logits.size(); ++a) {
    p[a + 1] = std::exp(logits[a] - max_logit);
    sum += p[a + 1];
  }
  for (double& v : p) v /= sum;
  return p;
}

void check_arity(int arity) {
  if (arity != 2 && arity != 3) throw ConfigError("arity must be 2 or 3, got " + std::to_string(arity));
}

double censoring_from_uniform(const CensoringParams& params, std::span<const double> x1, double u) {
  switch (params.kind) {
    case CensoringKind::kNone:
      return std::numeric_limits<double>::infinity();
    case CensoringKind::kExponential:
      return params.c0 * -std::log(u);
    case CensoringKind::kConditional:
      return params.c0 * -std::log(u) * conditional_censoring_factor(x1);
    case CensoringKind::kUniform:
      return params.a + (params.b - params.a) * u;
  }
  return std::numeric_limits<double>::infinity();
}

bool is_censored(double t1, double t2, double c) { return !(t1 < c && t1 + t2 <= c); }

struct SubjectDraw {
  Covariates cov;
  int a1 = 0;
  SubjectLatent latent;
};

// Draws everything except the censoring time.
SubjectDraw draw_subject(const ScenarioConfig& config, std::uint64_t seed, std::uint64_t i,
                         std::span<const Covariates> population) {
  SubjectDraw d;
  d.cov = population.empty() ? sample_subject_covariates(seed, i, config.covariate_model)
                             : population[i % population.size()];
  const auto& x1 = d.cov.stage1;
  const auto& x2 = d.cov.stage2;
  RngStream treat1(seed, i, StreamTag::kTreatment1);
  RngStream treat2(seed, i, StreamTag::kTreatment2);
  RngStream noise1(seed, i, StreamTag::kNoise1);
  RngStream noise2(seed, i, StreamTag::kNoise2);
  d.a1 = treat1.categorical(stage1_propensity(x1, config.arity));
  d.latent.t1 = stage1_time(x1, d.a1, config.arity, noise1.exponential(config.noise_rate));
  d.latent.a2 = treat2.categorical(stage2_propensity(x2, d.latent.t1, config.arity));
  d.latent.t2 = stage2_time(x2, d.latent.t1, d.latent.a2, config.arity, noise2.exponential(config.noise_rate));
  d.latent.x2 = x2;
  return d;
}

}  // namespace

const std::vector<std::string>& stage1_names() {
  static const std::vector<std::string> names = {"Age",      "Creatinine",    "Hemoglobin", "Potassium", "Sodium",
                                                 "Glucose",  "PlateletCount", "Hematocrit", "WBC"};
  return names;
}

const std::vector<std::string>& stage2_names() {
  static const std::vector<std::string> names = {"Creatinine", "Hemoglobin",    "Potassium",  "Sodium",
                                                 "Glucose",    "PlateletCount", "Hematocrit", "WBC"};
  return names;
}

SchemaSpec scenario_schema(int arity) {
  return SchemaSpec{{CovariateSchema{stage1_names()}, CovariateSchema{stage2_names()}}, {arity, arity}};
}

std::string_view to_string(PropensityMode m) { return m == PropensityMode::kTrue ? "true" : "misspecified"; }

std::string_view to_string(CensoringKind k) {
  switch (k) {
    case CensoringKind::kNone:
      return "none";
    case CensoringKind::kExponential:
      return "exponential";
    case CensoringKind::kConditional:
      return "conditional";
    case CensoringKind::kUniform:
      return "uniform";
  }
  return "none";
}

std::string_view to_string(CovariateModel m) { return m == CovariateModel::kCoupled ? "coupled" : "independent"; }

CovariateModel parse_covariate_model(std::string_view s) {
  if (s == "coupled") return CovariateModel::kCoupled;
  if (s == "independent") return CovariateModel::kIndependent;
  throw ConfigError("covariate_model: expected 'coupled' or 'independent', got '" + std::string(s) + "'");
}

PropensityMode parse_propensity_mode(std::string_view s) {
  if (s == "true") return PropensityMode::kTrue;
  if (s == "misspecified" || s == "false") return PropensityMode::kMisspecified;
  throw ConfigError("propensity_mode: expected 'true' or 'misspecified', got '" + std::string(s) + "'");
}

CensoringKind parse_censoring_kind(std::string_view s) {
  if (s == "none") return CensoringKind::kNone;
  if (s == "exponential") return CensoringKind::kExponential;
  if (s == "conditional") return CensoringKind::kConditional;
  if (s == "uniform") return CensoringKind::kUniform;
  throw ConfigError("censoring_kind: expected none|exponential|conditional|uniform, got '" + std::string(s) + "'");
}

void CensoringParams::validate() const {
  if ((kind == CensoringKind::kExponential || kind == CensoringKind::kConditional) && !(c0 > 0)) {
    throw ConfigError("censoring.c0 must be > 0");
  }
  if (kind == CensoringKind::kUniform && !(a < b)) throw ConfigError("censoring: uniform bounds need a < b");
}

void ScenarioConfig::validate() const {
  if (n_subjects < 1) throw ConfigError("n_subjects must be >= 1");
  if (arity != 2 && arity != 3) throw ConfigError("arity must be 2 or 3");
  if (!(target_censor_rate >= 0.0 && target_censor_rate < 1.0)) {
    throw ConfigError("target_censor_rate must be in [0, 1), got " + std::to_string(target_censor_rate));
  }
  if (!(noise_rate > 0.0)) throw ConfigError("noise_rate must be > 0");
  if (tau && !(*tau > 0.0)) throw ConfigError("tau must be > 0");
  if (censoring) {
    censoring->validate();
    if (censoring->kind != censoring_kind) throw ConfigError("censoring.kind does not match censoring_kind");
  } else if (censoring_kind != CensoringKind::kNone) {
    if (!(target_censor_rate > 0.0)) throw ConfigError("target_censor_rate must be > 0 when censoring is calibrated");
    if (pilot_size < 100) throw ConfigError("pilot_size must be >= 100");
  }
  if (!(uniform_lower >= 0.0)) throw ConfigError("uniform_lower must be >= 0");
}

namespace {

// Creatinine then hemoglobin. Under the coupled law anemia tracks renal
// function, Hb = 15.2 - 3 Cr + N(0, 1).
std::pair<double, double> renal_pair(RngStream& r, CovariateModel model) {
  if (model == CovariateModel::kIndependent) {
    const double cr = r.lognormal(std::log(1.1), 0.4);
    return {cr, std::clamp(r.normal(12.5, 2.0), 6.0, 18.0)};
  }
  const double cr = r.lognormal(std::log(1.07), 0.4);
  return {cr, std::clamp(15.2 - 3.0 * cr + r.normal(0.0, 1.0), 6.0, 18.0)};
}

}  // namespace

Covariates sample_subject_covariates(std::uint64_t seed, std::uint64_t subject, CovariateModel model) {
  Covariates c;
  RngStream r1(seed, subject, StreamTag::kCovariates1);
  auto& x1 = c.stage1;
  x1[kAge] = r1.uniform(40.0, 90.0);
  std::tie(x1[kCreatinine], x1[kHemoglobin]) = renal_pair(r1, model);
  x1[kPotassium] = r1.normal(4.2, 0.5);
  x1[kSodium] = r1.normal(139.0, 4.0);
  x1[kGlucose] = r1.lognormal(std::log(120.0), 0.3);
  x1[kPlateletCount] = std::max(r1.normal(230.0, 60.0), 1.0);
  x1[kHematocrit] = r1.normal(38.0, 5.0);
  x1[kWbc] = r1.lognormal(std::log(8.0), 0.35);

  RngStream r2(seed, subject, StreamTag::kCovariates2);
  auto& x2 = c.stage2;
  std::tie(x2[kCreatinine2], x2[kHemoglobin2]) = renal_pair(r2, model);
  x2[kPotassium2] = r2.normal(4.2, 0.5);
  x2[kSodium2] = r2.normal(139.0, 4.0);
  x2[kGlucose2] = r2.lognormal(std::log(120.0), 0.3);
  x2[kPlateletCount2] = std::max(r2.normal(230.0, 60.0), 1.0);
  x2[kHematocrit2] = r2.normal(38.0, 5.0);
  x2[kWbc2] = r2.lognormal(std::log(8.0), 0.35);
  return c;
}

std::vector<Covariates> load_covariates_csv(const std::filesystem::path& path) {
  std::vector<std::string> columns;
  for (const auto& name : stage1_names()) columns.push_back("X1_" + name);
  for (const auto& name : stage2_names()) columns.push_back("X2_" + name);
  const auto rows = load_csv_columns(path, columns);
  std::vector<Covariates> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(rows[i].begin(), kStage1Count, out[i].stage1.begin());
    std::copy_n(rows[i].begin() + kStage1Count, kStage2Count, out[i].stage2.begin());
  }
  return out;
}

std::vector<Covariates> sample_covariates(std::size_t n, std::uint64_t seed, CovariateModel model) {
  if (n == 0) throw ConfigError("sample_covariates: n must be >= 1");
  std::vector<Covariates> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sample_subject_covariates(seed, i, model);
  return out;
}

std::vector<double> stage1_propensity(std::span<const double> x1, int arity) {
  check_arity(arity);
  if (arity == 2) {
    const double l1 = 0.2 * x1[kCreatinine] + 0.2 * x1[kHemoglobin];
    return softmax_with_reference(std::array{l1});
  }
  const double l1 = 0.2 * x1[kCreatinine] + 0.1 * x1[kPotassium];
  const double l2 = 0.2 * x1[kHemoglobin] - 0.02 * x1[kAge];
  return softmax_with_reference(std::array{l1, l2});
}

std::vector<double> stage2_propensity(std::span<const double> x2, double t1, int arity) {
  check_arity(arity);
  if (arity == 2) {
    const double l1 = 0.002 * x2[kGlucose2] + 0.005 * t1;
    return softmax_with_reference(std::array{l1});
  }
  const double l1 = 0.002 * x2[kGlucose2] + 0.002 * x2[kSodium2];
  const double l2 = 0.005 * x2[kPlateletCount2] + 0.005 * t1;
  return softmax_with_reference(std::array{l1, l2});
}

int g1_opt(std::span<const double> x1, int arity) {
  check_arity(arity);
  const int high_cr = x1[kCreatinine] > 1.5 ? 1 : 0;
  if (arity == 2) return high_cr * (x1[kHemoglobin] <= 12.0 ? 1 : 0);
  return high_cr * (1 + (x1[kHemoglobin] <= 10.0 ? 1 : 0));
}

int g2_opt(double glucose, double t1, int arity) {
  check_arity(arity);
  const int high_glucose = glucose > 140.0 ? 1 : 0;
  if (arity == 2) return std::min(high_glucose + (t1 < 3.0 ? 1 : 0), 1);
  return high_glucose * ((t1 > 0.5 ? 1 : 0) + (t1 > 3.0 ? 1 : 0));
}

double stage1_time(std::span<const double> x1, int a1, int arity, double eps) {
  const double miss = static_cast<double>(a1 - g1_opt(x1, arity));
  return std::exp(1.5 + 0.3 * x1[kPotassium] - std::abs(1.5 * x1[kCreatinine] - 2.0) * miss * miss + eps);
}

double stage2_time(std::span<const double> x2, double t1, int a2, int arity, double eps) {
  const double miss = static_cast<double>(a2 - g2_opt(x2[kGlucose2], t1, arity));
  return std::exp(1.18 + 0.2 * t1 - std::abs(0.5 * x2[kGlucose2] + 2.0) * miss * miss + eps);
}

StageTimes gen_stage_times(std::span<const double> x1, std::span<const double> x2, int a1, int a2, int arity,
                           double noise_rate, RngStream& noise1, RngStream& noise2) {
  if (!(noise_rate > 0.0)) throw ConfigError("noise_rate must be > 0");
  const double t1 = stage1_time(x1, a1, arity, noise1.exponential(noise_rate));
  const double t2 = stage2_time(x2, t1, a2, arity, noise2.exponential(noise_rate));
  return {t1, t2};
}

double conditional_censoring_factor(std::span<const double> x1) {
  return std::exp(0.3 * x1[kCreatinine] + 0.2 * std::abs(x1[kPotassium] - 4.0));
}

double sample_censoring(const CensoringParams& params, std::span<const double> x1, RngStream& rng) {
  return censoring_from_uniform(params, x1, rng.uniform());
}

double censoring_survival(const CensoringParams& params, std::span<const double> x1, double t) {
  if (t <= 0.0) return 1.0;
  switch (params.kind) {
    case CensoringKind::kNone:
      return 1.0;
    case CensoringKind::kExponential:
      return std::exp(-t / params.c0);
    case CensoringKind::kConditional:
      return std::exp(-t / (params.c0 * conditional_censoring_factor(x1)));
    case CensoringKind::kUniform:
      if (t < params.a) return 1.0;
      return std::clamp((params.b - t) / (params.b - params.a), 0.0, 1.0);
  }
  return 1.0;
}

Observed assemble_observed(double t1, double t2, double c) {
  Observed o;
  o.eta = t1 < c;
  const double unobserved = t1 + (o.eta ? t2 : 0.0);
  o.total = std::min(unobserved, c);
  o.r1 = o.total < t1 ? o.total : t1;
  if (o.eta) o.r2 = o.total >= t1 ? o.total - t1 : 0.0;
  o.delta1 = o.eta;
  o.delta2 = o.eta && unobserved <= c;
  return o;
}

double pilot_censoring_rate(const CensoringParams& params, std::span<const PilotSubject> pilot,
                            std::span<const double> base_draws) {
  if (pilot.empty()) return 0.0;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < pilot.size(); ++i) {
    const double u = base_draws[i];
    double c = 0.0;
    switch (params.kind) {
      case CensoringKind::kNone:
        continue;
      case CensoringKind::kExponential:
        c = params.c0 * -std::log(u);
        break;
      case CensoringKind::kConditional:
        c = params.c0 * -std::log(u) * pilot[i].censor_factor;
        break;
      case CensoringKind::kUniform:
        c = params.a + (params.b - params.a) * u;
        break;
    }
    censored += is_censored(pilot[i].t1, pilot[i].t2, c) ? 1 : 0;
  }
  return static_cast<double>(censored) / static_cast<double>(pilot.size());
}

CensoringParams calibrate_censoring(CensoringKind kind, double target_rate, std::span<const PilotSubject> pilot,
                                    std::span<const double> base_draws, double uniform_lower) {
  if (kind == CensoringKind::kNone) return CensoringParams{};
  if (!(target_rate > 0.0 && target_rate < 1.0)) throw ConfigError("calibration target must be in (0, 1)");
  if (pilot.empty() || base_draws.size() != pilot.size()) throw ConfigError("calibration needs a non-empty pilot");

  // Larger scale means later censoring, so the rate is non-increasing in it.
  auto params_at = [&](double scale) {
    CensoringParams p;
    p.kind = kind;
    if (kind == CensoringKind::kUniform) {
      p.a = uniform_lower;
      p.b = uniform_lower + scale;
    } else {
      p.c0 = scale;
    }
    return p;
  };
  auto rate_at = [&](double scale) { return pilot_censoring_rate(params_at(scale), pilot, base_draws); };

  double lo = 1.0;
  double hi = 1.0;
  int expansions = 0;
  constexpr int kMaxExpansions = 80;
  while (rate_at(lo) < target_rate) {
    lo /= 4.0;
    if (++expansions > kMaxExpansions) throw CalibrationError("censoring calibration: no lower bracket for target rate");
  }
  expansions = 0;
  while (rate_at(hi) > target_rate) {
    hi *= 4.0;
    if (++expansions > kMaxExpansions) throw CalibrationError("censoring calibration: no upper bracket for target rate");
  }

  double best_scale = lo;
  double best_err = std::abs(rate_at(lo) - target_rate);
  for (int iter = 0; iter < 200 && hi / lo > 1.0 + 1e-13; ++iter) {
    const double mid = std::sqrt(lo * hi);
    const double r = rate_at(mid);
    const double err = std::abs(r - target_rate);
    if (err < best_err) {
      best_err = err;
      best_scale = mid;
    }
    if (r > target_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (best_err > 0.02) {
    throw CalibrationError("censoring calibration reached rate error " + std::to_string(best_err) + " > 0.02");
  }
  return params_at(best_scale);
}

std::vector<PilotSubject> simulate_pilot(const ScenarioConfig& config, std::vector<double>* base_draws,
                                         std::span<const Covariates> population) {
  const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(StreamTag::kPilot));
  std::vector<PilotSubject> pilot(config.pilot_size);
  if (base_draws) base_draws->assign(config.pilot_size, 0.0);
  parallel_for(config.pilot_size, [&](std::size_t i) {
    const SubjectDraw d = draw_subject(config, seed, i, population);
    pilot[i] = {d.latent.t1, d.latent.t2, conditional_censoring_factor(d.cov.stage1)};
    if (base_draws) (*base_draws)[i] = RngStream(seed, i, StreamTag::kCensoring).uniform();
  });
  return pilot;
}

Generated generate(const ScenarioConfig& config, std::span<const Covariates> population) {
  config.validate();
  Generated out;
  out.oracle.config = config;
  out.oracle.population.assign(population.begin(), population.end());
  if (config.censoring) {
    out.oracle.censoring = *config.censoring;
  } else if (config.censoring_kind == CensoringKind::kNone) {
    out.oracle.censoring = CensoringParams{};
  } else {
    std::vector<double> draws;
    const auto pilot = simulate_pilot(config, &draws, population);
    out.oracle.censoring =
        calibrate_censoring(config.censoring_kind, config.target_censor_rate, pilot, draws, config.uniform_lower);
  }
  const CensoringParams& params = out.oracle.censoring;

  const std::size_t n = config.n_subjects;
  out.dataset.schema = scenario_schema(config.arity);
  out.dataset.trajectories.resize(n);
  out.oracle.latents.resize(n);
  parallel_for(n, [&](std::size_t i) {
    SubjectDraw d = draw_subject(config, config.seed, i, population);
    RngStream cens(config.seed, i, StreamTag::kCensoring);
    d.latent.c = sample_censoring(params, d.cov.stage1, cens);
    const Observed obs = assemble_observed(d.latent.t1, d.latent.t2, d.latent.c);

    Trajectory traj;
    traj.stages.resize(2);
    auto& s1 = traj.stages[0];
    s1.entered = true;
    s1.covariates.assign(d.cov.stage1.begin(), d.cov.stage1.end());
    s1.treatment = d.a1;
    s1.duration = obs.r1;
    s1.event = obs.delta1;
    if (obs.eta) {
      auto& s2 = traj.stages[1];
      s2.entered = true;
      s2.covariates.assign(d.cov.stage2.begin(), d.cov.stage2.end());
      s2.treatment = d.latent.a2;
      s2.duration = obs.r2;
      s2.event = obs.delta2;
    }
    traj.total_time = obs.total;
    out.dataset.trajectories[i] = std::move(traj);
    out.oracle.latents[i] = d.latent;
  });

  if (config.tau) {
    out.oracle.tau = *config.tau;
  } else {
    std::vector<double> times;
    times.reserve(n);
    for (const auto& t : out.dataset.trajectories) times.push_back(t.total_time);
    out.oracle.tau = quantile(std::move(times), 0.9);
  }
  return out;
}

double restricted_stage1_mean(std::span<const double> x1, int a, int arity, double noise_rate, double tau) {
  if (tau <= 0.0) return 0.0;
  // T1 = m * exp(eps) with m the noise-free time; P(T1 > t) = (t / m)^-rate for t >= m.
  const double m = stage1_time(x1, a, arity, 0.0);
  if (m >= tau) return tau;
  const double r = noise_rate;
  if (std::abs(r - 1.0) < 1e-12) return m + m * std::log(tau / m);
  return m + std::pow(m, r) * (std::pow(tau, 1.0 - r) - std::pow(m, 1.0 - r)) / (1.0 - r);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace catrl::sim
