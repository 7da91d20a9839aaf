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

#include "catrl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "catrl/error.hpp"
#include "catrl/parallel.hpp"
#include "catrl/rng.hpp"
#include "json_io.hpp"

namespace catrl {

PolicySpec PolicySpec::fitted(std::shared_ptr<const DTRPolicy> p, std::string name) {
  if (!p) throw ConfigError("fitted policy spec needs a policy");
  return PolicySpec{PolicyKind::kFitted, std::move(p), 0, std::move(name)};
}

PolicySpec PolicySpec::fixed(int arm) {
  if (arm < 0) throw ConfigError("fixed policy arm must be >= 0");
  return PolicySpec{PolicyKind::kFixed, nullptr, arm, "g=" + std::to_string(arm)};
}

PolicySpec PolicySpec::random() { return PolicySpec{PolicyKind::kRandom, nullptr, 0, "Random"}; }
PolicySpec PolicySpec::optimal() { return PolicySpec{PolicyKind::kOptimal, nullptr, 0, "Optimal"}; }
PolicySpec PolicySpec::observed() { return PolicySpec{PolicyKind::kObserved, nullptr, 0, "Observed"}; }

namespace {

constexpr std::size_t kStage2Offset = sim::kStage1Count + 2;

int optimal_arm(std::span<const double> h, int k, int arity) {
  if (k == 0) {
    if (h.size() < sim::kStage1Count) throw ConfigError("optimal policy: history too short for stage 1");
    return sim::g1_opt(h.first(sim::kStage1Count), arity);
  }
  if (k == 1) {
    if (h.size() != kStage2Offset + sim::kStage2Count) throw ConfigError("optimal policy: not a scenario history");
    return sim::g2_opt(h[kStage2Offset + sim::kGlucose2], h[sim::kStage1Count + 1], arity);
  }
  throw ConfigError("optimal policy: the scenario has two stages");
}

Estimate mean_and_se(std::span<const double> v) {
  Estimate e;
  if (v.empty()) return e;
  const double n = static_cast<double>(v.size());
  e.value = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - e.value) * (x - e.value);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

Estimate mean_and_sd(std::span<const double> v) {
  Estimate e = mean_and_se(v);
  e.std_error *= std::sqrt(static_cast<double>(v.size()));
  return e;
}

}  // namespace

int policy_arm(const PolicySpec& policy, std::span<const double> h, int k, int arity, RngStream& stream) {
  switch (policy.kind) {
    case PolicyKind::kFitted:
      return policy.policy->recommend_history(h, k);
    case PolicyKind::kFixed:
      if (policy.arm >= arity) {
        throw ConfigError("fixed policy arm " + std::to_string(policy.arm) + " exceeds the arity " + std::to_string(arity));
      }
      return policy.arm;
    case PolicyKind::kRandom:
      return static_cast<int>(stream.below(static_cast<std::uint64_t>(arity)));
    case PolicyKind::kOptimal:
      return optimal_arm(h, k, arity);
    case PolicyKind::kObserved:
      break;
  }
  throw ConfigError("the observed-treatment policy has no counterfactual recommendation");
}

EvalReport counterfactual_eval(const PolicySpec& policy, const sim::Oracle& oracle, const CounterfactualOptions& options) {
  const int arity = oracle.config.arity;
  const double rate = oracle.config.noise_rate;
  const double tau = options.tau ? *options.tau : oracle.tau;
  if (!(tau > 0.0)) throw ConfigError("evaluation tau must be > 0");
  if (policy.kind == PolicyKind::kFitted) {
    if (policy.policy->schema != sim::scenario_schema(arity)) {
      throw ConfigError("policy schema does not match the scenario schema");
    }
  }
  const std::size_t n = options.population ? options.population->size() : options.n_mc;
  if (n == 0) throw ConfigError("counterfactual evaluation needs at least one subject");

  std::vector<double> total(n);
  std::vector<double> noise_free(n);
  std::vector<double> restricted(n);
  std::vector<double> first(n);
  std::vector<double> all(n);
  parallel_for(n, [&](std::size_t i) {
    sim::Covariates cov;
    if (options.population) {
      cov = (*options.population)[i];
    } else if (!oracle.population.empty()) {
      cov = oracle.population[i % oracle.population.size()];
    } else {
      cov = sim::sample_subject_covariates(options.seed, i, oracle.config.covariate_model);
    }
    RngStream noise1(options.seed, i, StreamTag::kNoise1);
    RngStream noise2(options.seed, i, StreamTag::kNoise2);
    const double eps1 = options.zero_noise ? 0.0 : noise1.exponential(rate);
    const double eps2 = options.zero_noise ? 0.0 : noise2.exponential(rate);

    // Both passes replay the same random-policy draws.
    auto run = [&](double e1, double e2, int& a1, int& a2, double& t1) {
      RngStream choice(options.seed, i, StreamTag::kRandomPolicy);
      std::vector<double> h(cov.stage1.begin(), cov.stage1.end());
      a1 = policy_arm(policy, h, 0, arity, choice);
      t1 = sim::stage1_time(cov.stage1, a1, arity, e1);
      h.push_back(a1);
      h.push_back(t1);
      h.insert(h.end(), cov.stage2.begin(), cov.stage2.end());
      a2 = policy_arm(policy, h, 1, arity, choice);
      return t1 + sim::stage2_time(cov.stage2, t1, a2, arity, e2);
    };
    int a1 = 0, a2 = 0, b1 = 0, b2 = 0;
    double t1 = 0.0, u1 = 0.0;
    const double t = run(eps1, eps2, a1, a2, t1);
    noise_free[i] = run(0.0, 0.0, b1, b2, u1);

    const bool ok1 = a1 == sim::g1_opt(cov.stage1, arity);
    const bool ok2 = a2 == sim::g2_opt(cov.stage2[sim::kGlucose2], t1, arity);
    total[i] = t;
    restricted[i] = std::min(t, tau);
    first[i] = ok1 ? 1.0 : 0.0;
    all[i] = ok1 && ok2 ? 1.0 : 0.0;
  });

  EvalReport r;
  r.policy = policy.name;
  r.tau = tau;
  r.n_eval = n;
  r.rmst = mean_and_se(restricted);
  r.cdr1 = mean_and_se(first);
  r.acdr = mean_and_se(all);
  r.expected_survival = mean_and_se(noise_free);
  r.sampled_mean_survival = mean_and_se(total);
  return r;
}

ObservationalValue observational_value(const PolicySpec& policy, const Dataset& dataset, double tau,
                                       std::uint64_t seed) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (dataset.size() == 0) throw ConfigError("observational value of an empty dataset");
  if (policy.kind == PolicyKind::kFitted && policy.policy->schema != dataset.schema) {
    throw ConfigError("policy schema does not match the dataset schema");
  }
  std::vector<std::uint8_t> match(dataset.size(), 0);
  parallel_for(dataset.size(), [&](std::size_t i) {
    const auto& traj = dataset.trajectories[i];
    RngStream choice(seed, i, StreamTag::kRandomPolicy);
    bool ok = true;
    for (int k = 0; k < dataset.stages() && ok; ++k) {
      const auto& rec = traj.stages[static_cast<std::size_t>(k)];
      if (!rec.entered) break;
      if (policy.kind == PolicyKind::kObserved) continue;
      const History h = build_history(traj, k);
      ok = policy_arm(policy, h, k, dataset.arity(k), choice) == *rec.treatment;
    }
    match[i] = ok ? 1 : 0;
  });

  std::vector<double> times;
  std::vector<int> events;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!match[i]) continue;
    times.push_back(dataset.trajectories[i].total_time);
    events.push_back(dataset.trajectories[i].final_event() ? 1 : 0);
  }
  ObservationalValue v;
  v.concordant = times.size();
  v.concordant_fraction = static_cast<double>(times.size()) / static_cast<double>(dataset.size());
  v.small_sample = times.size() < 10;
  if (!times.empty()) v.rmst = rmst_km_with_se(times, events, tau);
  return v;
}

// ---------------------------------------------------------------- benchmark

void BenchmarkConfig::validate() const {
  if (arities.empty() || propensity_modes.empty() || censoring_kinds.empty()) {
    throw ConfigError("benchmark: empty scenario grid");
  }
  for (int a : arities) {
    if (a != 2 && a != 3) throw ConfigError("benchmark.arities: only 2 and 3 are supported");
  }
  if (folds < 2) throw ConfigError("benchmark.folds must be >= 2");
  if (n_subjects < static_cast<std::size_t>(folds) * 20) throw ConfigError("benchmark.n_subjects too small for the folds");
  if (!(target_censor_rate >= 0.0 && target_censor_rate < 1.0)) {
    throw ConfigError("benchmark.target_censor_rate must be in [0, 1)");
  }
  if (!(noise_rate > 0.0)) throw ConfigError("benchmark.noise_rate must be > 0");
  fit.validate();
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

Estimate estimate_from_json(const json& j) {
  return Estimate{number_from_json(j.at("value"), "estimate"), number_from_json(j.at("std_error"), "estimate")};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.policy = j.at("policy").get<std::string>();
  r.tau = number_from_json(j.at("tau"), "report.tau");
  r.rmst = estimate_from_json(j.at("rmst"));
  r.cdr1 = estimate_from_json(j.at("cdr1"));
  r.acdr = estimate_from_json(j.at("acdr"));
  r.expected_survival = estimate_from_json(j.at("expected_survival"));
  r.sampled_mean_survival = estimate_from_json(j.at("sampled_mean_survival"));
  r.n_eval = j.at("n_eval").get<std::size_t>();
  return r;
}

json cell_to_json(const CellResult& c) {
  json methods = json::array();
  for (const auto& m : c.methods) {
    methods.push_back(json{{"method", m.method},
                           {"rmst", m.rmst},
                           {"cdr1", m.cdr1},
                           {"acdr", m.acdr},
                           {"expected_survival", m.expected_survival},
                           {"folds", m.folds}});
  }
  return json{{"key", c.key},
              {"arity", c.arity},
              {"propensity_mode", std::string(sim::to_string(c.propensity_mode))},
              {"censoring_kind", std::string(sim::to_string(c.censoring_kind))},
              {"censoring_rate", number_to_json(c.censoring_rate)},
              {"tau", number_to_json(c.tau)},
              {"methods", methods},
              {"errors", c.errors}};
}

CellResult cell_from_json(const json& j) {
  CellResult c;
  c.key = j.at("key").get<std::string>();
  c.arity = j.at("arity").get<int>();
  c.propensity_mode = sim::parse_propensity_mode(j.at("propensity_mode").get<std::string>());
  c.censoring_kind = sim::parse_censoring_kind(j.at("censoring_kind").get<std::string>());
  c.censoring_rate = number_from_json(j.at("censoring_rate"), "cell");
  c.tau = number_from_json(j.at("tau"), "cell");
  for (const auto& m : j.at("methods")) {
    MethodSummary s;
    s.method = m.at("method").get<std::string>();
    s.rmst = estimate_from_json(m.at("rmst"));
    s.cdr1 = estimate_from_json(m.at("cdr1"));
    s.acdr = estimate_from_json(m.at("acdr"));
    s.expected_survival = estimate_from_json(m.at("expected_survival"));
    for (const auto& f : m.at("folds")) s.folds.push_back(report_from_json(f));
    c.methods.push_back(std::move(s));
  }
  c.errors = j.at("errors").get<std::vector<std::string>>();
  return c;
}

struct CellSpec {
  int arity;
  sim::PropensityMode mode;
  sim::CensoringKind kind;
};

CellResult run_cell(const BenchmarkConfig& config, const CellSpec& spec, const std::string& key) {
  CellResult cell;
  cell.arity = spec.arity;
  cell.propensity_mode = spec.mode;
  cell.censoring_kind = spec.kind;
  cell.key = key;

  // The data depend on arity and censoring only, so both propensity presets
  // are fitted to the same samples.
  sim::ScenarioConfig sc;
  sc.n_subjects = config.n_subjects;
  sc.arity = spec.arity;
  sc.propensity_mode = spec.mode;
  sc.censoring_kind = spec.kind;
  sc.target_censor_rate = config.target_censor_rate;
  sc.noise_rate = config.noise_rate;
  sc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(spec.arity), static_cast<std::uint64_t>(spec.kind));
  const sim::Generated gen = sim::generate(sc);
  cell.censoring_rate = gen.dataset.censoring_rate();
  cell.tau = gen.oracle.tau;

  const std::size_t n = gen.dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(sc.seed, 0, StreamTag::kSplit);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<PolicySpec> baselines;
  for (int a = 0; a < spec.arity; ++a) baselines.push_back(PolicySpec::fixed(a));
  baselines.push_back(PolicySpec::random());
  baselines.push_back(PolicySpec::optimal());

  std::vector<std::string> names{"CA-TRL"};
  for (const auto& b : baselines) names.push_back(b.name);
  std::vector<std::vector<EvalReport>> per_method(names.size());

  for (int f = 0; f < config.folds; ++f) {
    const std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(config.folds);
    const std::size_t hi = n * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(config.folds);
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                   order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::vector<std::size_t> held;
    held.insert(held.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lo));
    held.insert(held.end(), order.begin() + static_cast<std::ptrdiff_t>(hi), order.end());
    std::sort(train.begin(), train.end());
    std::sort(held.begin(), held.end());

    auto population = std::make_shared<std::vector<sim::Covariates>>(held.size());
    for (std::size_t i = 0; i < held.size(); ++i) {
      const auto& x1 = gen.dataset.trajectories[held[i]].stages[0].covariates;
      std::copy(x1.begin(), x1.end(), (*population)[i].stage1.begin());
      (*population)[i].stage2 = gen.oracle.latents[held[i]].x2;
    }
    CounterfactualOptions eval;
    eval.tau = gen.oracle.tau;
    eval.seed = derive_seed(sc.seed, static_cast<std::uint64_t>(f), 0xe7a1ULL);
    eval.population = population;

    try {
      FitConfig fc = config.fit;
      fc.propensity.preset =
          spec.mode == sim::PropensityMode::kTrue ? PropensityPreset::kAll : PropensityPreset::kMisspecified;
      fc.tau = gen.oracle.tau;
      fc.seed = derive_seed(config.fit.seed, sc.seed, static_cast<std::uint64_t>(f));
      auto policy = std::make_shared<const DTRPolicy>(fit(gen.dataset.subset(train), fc));
      per_method[0].push_back(counterfactual_eval(PolicySpec::fitted(policy), gen.oracle, eval));
      for (std::size_t b = 0; b < baselines.size(); ++b) {
        per_method[b + 1].push_back(counterfactual_eval(baselines[b], gen.oracle, eval));
      }
    } catch (const Error& e) {
      cell.errors.push_back("fold " + std::to_string(f + 1) + ": " + e.what());
    }
  }

  for (std::size_t m = 0; m < names.size(); ++m) {
    MethodSummary s;
    s.method = names[m];
    s.folds = per_method[m];
    std::vector<double> rmst, cdr1, acdr, es;
    for (const auto& r : s.folds) {
      rmst.push_back(r.rmst.value);
      cdr1.push_back(r.cdr1.value);
      acdr.push_back(r.acdr.value);
      es.push_back(r.expected_survival.value);
    }
    s.rmst = mean_and_sd(rmst);
    s.cdr1 = mean_and_sd(cdr1);
    s.acdr = mean_and_sd(acdr);
    s.expected_survival = mean_and_sd(es);
    cell.methods.push_back(std::move(s));
  }
  return cell;
}

// Index of the best non-reference method by tau-RMST.
std::size_t best_method(const CellResult& c) {
  std::size_t best = 0;
  for (std::size_t m = 0; m < c.methods.size(); ++m) {
    if (c.methods[m].method == "Optimal") continue;
    if (c.methods[m].rmst.value > c.methods[best].rmst.value) best = m;
  }
  return best;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

BenchmarkReport benchmark(const BenchmarkConfig& config) {
  config.validate();
  std::vector<CellSpec> specs;
  for (int a : config.arities) {
    for (auto m : config.propensity_modes) {
      for (auto k : config.censoring_kinds) specs.push_back({a, m, k});
    }
  }

  BenchmarkReport report;
  report.cells.resize(specs.size());
  parallel_for(specs.size(), [&](std::size_t c) {
    const auto& spec = specs[c];
    json key_doc = config;
    key_doc.erase("arities");
    key_doc.erase("propensity_modes");
    key_doc.erase("censoring_kinds");
    key_doc["cell"] = json{{"arity", spec.arity},
                           {"propensity_mode", std::string(sim::to_string(spec.mode))},
                           {"censoring_kind", std::string(sim::to_string(spec.kind))}};
    key_doc["library_version"] = CATRL_VERSION;
    const std::string key = content_hash(key_doc.dump());

    std::filesystem::path cache_file;
    if (config.cache_dir) {
      cache_file = *config.cache_dir / ("cell-" + key + ".json");
      if (std::filesystem::exists(cache_file)) {
        try {
          report.cells[c] = cell_from_json(parse_json(read_file(cache_file), "cached cell"));
          if (report.cells[c].key == key) return;
        } catch (const std::exception&) {
          // Unreadable cache entries are recomputed.
        }
      }
    }
    CellResult cell;
    try {
      cell = run_cell(config, spec, key);
    } catch (const Error& e) {
      cell.arity = spec.arity;
      cell.propensity_mode = spec.mode;
      cell.censoring_kind = spec.kind;
      cell.key = key;
      cell.errors.push_back(e.what());
    }
    if (config.cache_dir) {
      std::filesystem::create_directories(*config.cache_dir);
      write_file_atomic(cache_file, cell_to_json(cell).dump(1) + "\n");
    }
    report.cells[c] = std::move(cell);
  });

  for (const auto& c : report.cells) {
    const bool failed = c.methods.empty() || c.methods.front().folds.empty();
    if (failed) ++report.failed_cells;
  }
  return report;
}

std::string BenchmarkReport::to_csv() const {
  std::string out =
      "arity,propensity_model,censoring,method,rmst_mean,rmst_sd,cdr1_mean,cdr1_sd,acdr_mean,acdr_sd,"
      "expected_survival_mean,expected_survival_sd,n_folds,best\n";
  for (const auto& c : cells) {
    const std::size_t best = c.methods.empty() ? 0 : best_method(c);
    for (std::size_t m = 0; m < c.methods.size(); ++m) {
      const auto& s = c.methods[m];
      out += std::to_string(c.arity) + ',' + std::string(sim::to_string(c.propensity_mode)) + ',' +
             std::string(sim::to_string(c.censoring_kind)) + ',' + s.method + ',' + format_double(s.rmst.value) + ',' +
             format_double(s.rmst.std_error) + ',' + format_double(s.cdr1.value) + ',' +
             format_double(s.cdr1.std_error) + ',' + format_double(s.acdr.value) + ',' +
             format_double(s.acdr.std_error) + ',' + format_double(s.expected_survival.value) + ',' +
             format_double(s.expected_survival.std_error) + ',' + std::to_string(s.folds.size()) + ',' +
             (m == best ? "1" : "0") + '\n';
    }
  }
  return out;
}

std::string BenchmarkReport::to_json() const {
  json cells_json = json::array();
  for (const auto& c : cells) cells_json.push_back(cell_to_json(c));
  return json{{"cells", cells_json}, {"failed_cells", failed_cells}}.dump(1) + "\n";
}

std::string BenchmarkReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : cells) {
    out << "M=" << c.arity << "  propensity=" << sim::to_string(c.propensity_mode)
        << "  censoring=" << sim::to_string(c.censoring_kind) << "  censored=" << fixed(100.0 * c.censoring_rate, 2)
        << "%  tau=" << fixed(c.tau, 2) << '\n';
    out << "  " << std::string(10, ' ') << "  tau-RMST          CDR1 (%)        ACDR (%)        E[T*g]\n";
    const std::size_t best = c.methods.empty() ? 0 : best_method(c);
    for (std::size_t m = 0; m < c.methods.size(); ++m) {
      const auto& s = c.methods[m];
      char line[256];
      std::snprintf(line, sizeof line, "%s %-10s  %7.2f+-%-7.2f  %6.2f+-%-6.2f  %6.2f+-%-6.2f  %9.2f+-%-8.2f\n",
                    m == best ? "*" : " ", s.method.c_str(), s.rmst.value, s.rmst.std_error, 100.0 * s.cdr1.value,
                    100.0 * s.cdr1.std_error, 100.0 * s.acdr.value, 100.0 * s.acdr.std_error,
                    s.expected_survival.value, s.expected_survival.std_error);
      out << line;
    }
    for (const auto& e : c.errors) out << "  error: " << e << '\n';
    out << '\n';
  }
  out << "* best tau-RMST in the cell (Optimal is a reference row and is not ranked)\n";
  return out.str();
}

}  // namespace catrl
