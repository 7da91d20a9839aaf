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

// Acceptance run: one PASS/FAIL line per criterion.
//
//   catrl_acceptance [--cli PATH] [--cache DIR] [criterion ...]
//
// With no criterion numbers every criterion runs. --cli points at the catrl
// executable (needed by the determinism check); --cache lets the benchmark
// criteria share cells between invocations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "catrl/caipw.hpp"
#include "catrl/core.hpp"
#include "catrl/dtr.hpp"
#include "catrl/error.hpp"
#include "catrl/eval.hpp"
#include "catrl/policy_tree.hpp"
#include "catrl/propensity.hpp"
#include "catrl/simgen.hpp"
#include "catrl/survival.hpp"
#include "true_nuisance.hpp"

namespace sim = catrl::sim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  std::string cli;
  std::optional<fs::path> cache;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ------------------------------------------------------------ 1 bookkeeping

Outcome bookkeeping(const Context&) {
  const auto t0 = Clock::now();
  std::size_t checked = 0, bad = 0;
  for (auto kind : {sim::CensoringKind::kExponential, sim::CensoringKind::kConditional, sim::CensoringKind::kUniform}) {
    sim::ScenarioConfig sc;
    sc.n_subjects = 100000;
    sc.censoring_kind = kind;
    sc.seed = 101;
    const auto g = sim::generate(sc);
    for (std::size_t i = 0; i < g.dataset.size(); ++i) {
      const auto& t = g.dataset.trajectories[i];
      const auto& l = g.oracle.latents[i];
      const double T = t.total_time;
      const bool eta = l.t1 < l.c;
      const double r1 = T < l.t1 ? T : l.t1;
      bool ok = t.stages[1].entered == eta && *t.stages[0].duration == r1 && t.stages[0].event == eta;
      if (eta) {
        const double r2 = *t.stages[1].duration;
        ok = ok && std::abs(T - (r1 + r2)) <= 1e-9 * std::max(1.0, T) && r2 >= 0.0 &&
             std::abs(r2 - (std::min(l.t1 + l.t2, l.c) - l.t1)) <= 1e-9 * std::max(1.0, T) &&
             t.stages[1].event == (l.t1 + l.t2 <= l.c);
      } else {
        ok = ok && T == r1 && T == l.c;
      }
      ok = ok && T == std::min(l.t1 + l.t2, l.c);
      ++checked;
      if (!ok) ++bad;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0,
          std::to_string(checked - bad) + "/" + std::to_string(checked) + " subjects consistent, " + fmt("%.1f s", secs)};
}

// ------------------------------------------------------------ 2 calibration

Outcome calibration(const Context&) {
  std::string detail;
  bool pass = true;
  for (auto kind : {sim::CensoringKind::kExponential, sim::CensoringKind::kConditional, sim::CensoringKind::kUniform}) {
    const auto t0 = Clock::now();
    sim::ScenarioConfig sc;
    sc.censoring_kind = kind;
    sc.pilot_size = 10000;
    sc.seed = 202;
    std::vector<double> base;
    const auto pilot = sim::simulate_pilot(sc, &base);
    const auto params = sim::calibrate_censoring(kind, 0.62, pilot, base);
    const double rate = sim::pilot_censoring_rate(params, pilot, base);
    const double secs = seconds_since(t0);
    pass = pass && std::abs(rate - 0.62) <= 0.02 && secs < 60.0;
    detail += std::string(sim::to_string(kind)) + " " + fmt("%.4f", rate) + " (" + fmt("%.2f s", secs) + ") ";
  }
  return {pass, detail};
}

// ------------------------------------------------------------ 3 KM oracle

Outcome km_oracle(const Context&) {
  struct Case {
    std::vector<double> t;
    std::vector<int> e;
    std::vector<std::pair<double, double>> s;
  };
  const std::vector<Case> cases = {
      {{1, 2, 3}, {1, 0, 1}, {{1, 2.0 / 3.0}, {2, 2.0 / 3.0}, {3, 0.0}}},
      {{2, 2, 2, 4, 5}, {1, 1, 0, 1, 0}, {{2, 0.6}, {4, 0.3}, {5, 0.3}}},
      {{1, 4, 6}, {0, 0, 0}, {{1, 1.0}, {6, 1.0}}},
      {{5}, {1}, {{4.999, 1.0}, {5, 0.0}}},
      {{3, 3, 3}, {1, 1, 1}, {{2.9, 1.0}, {3, 0.0}}},
      {{1, 2, 2, 3}, {0, 1, 1, 1}, {{1, 1.0}, {2, 1.0 / 3.0}, {3, 0.0}}},
      {{5, 1, 3, 2, 4}, {1, 1, 0, 1, 0}, {{1, 0.8}, {2, 0.6}, {4, 0.6}, {5, 0.0}}},
  };
  double worst = 0.0;
  for (const auto& c : cases) {
    const auto km = catrl::fit_km(c.t, c.e);
    for (const auto& [t, s] : c.s) worst = std::max(worst, std::abs(km.at(t) - s));
  }
  return {worst <= 1e-12, std::to_string(cases.size()) + " cases, max error " + fmt("%.1e", worst)};
}

// ------------------------------------------------------------ 4, 5 CAIPW

// One-stage world: stage-1 covariates, treatment and duration of the
// scenario, exponential censoring. Outcomes are restricted at kTau.
constexpr double kTau = 30.0;
constexpr double kNoise = 2.0;
const sim::CensoringParams kCensoring{sim::CensoringKind::kExponential, 60.0, 0.0, 1.0};

catrl::Dataset one_stage_sample(std::size_t n, std::uint64_t seed) {
  catrl::Dataset ds;
  ds.schema = {{{sim::stage1_names()}}, {2}};
  const auto cov = sim::sample_covariates(n, seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> x(cov[i].stage1.begin(), cov[i].stage1.end());
    catrl::RngStream treat(seed, i, catrl::StreamTag::kTreatment1);
    catrl::RngStream noise(seed, i, catrl::StreamTag::kNoise1);
    catrl::RngStream cens(seed, i, catrl::StreamTag::kCensoring);
    const int a = treat.categorical(sim::stage1_propensity(x, 2));
    const double t = sim::stage1_time(x, a, 2, noise.exponential(kNoise));
    const double c = sim::sample_censoring(kCensoring, x, cens);
    catrl::Trajectory traj;
    traj.stages = {catrl::StageRecord{true, x, a, std::min(t, c), t <= c}};
    traj.total_time = std::min(t, c);
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

class OneStageNuisance : public catrl::StageNuisance {
 public:
  // `propensity_model` replaces the true propensity; `zero_mean` replaces the
  // true conditional mean by 0.
  OneStageNuisance(std::optional<catrl::PropensityModel> propensity_model, bool zero_mean)
      : model_(std::move(propensity_model)), zero_mean_(zero_mean) {}
  std::vector<double> propensity(std::span<const double> h) const override {
    return model_ ? model_->predict(h) : sim::stage1_propensity(h, 2);
  }
  double censoring_survival(std::span<const double> h, double elapsed, double t, Row) const override {
    return sim::censoring_survival(kCensoring, h, t) / sim::censoring_survival(kCensoring, h, elapsed);
  }
  double mean_outcome(std::span<const double> h, double, int a, double, Row) const override {
    if (zero_mean_) return 0.0;
    return catrl::testing::restricted_exp_mean(std::log(sim::stage1_time(h, a, 2, 0.0)), kNoise, kTau);
  }

 private:
  std::optional<catrl::PropensityModel> model_;
  bool zero_mean_;
};

struct Truth {
  double mean[2];
  double se[2];
};

// E[min(T*(a), tau)] by brute force over 10^6 fresh subjects.
const Truth& brute_force_truth() {
  static const Truth truth = [] {
    Truth t{};
    const std::size_t n = 1000000;
    for (int a = 0; a < 2; ++a) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto c = sim::sample_subject_covariates(909, i);
        catrl::RngStream noise(909 + a, i, catrl::StreamTag::kNoise1);
        const double v = std::min(sim::stage1_time(c.stage1, a, 2, noise.exponential(kNoise)), kTau);
        s += v;
        s2 += v * v;
      }
      t.mean[a] = s / n;
      t.se[a] = std::sqrt((s2 / n - t.mean[a] * t.mean[a]) / n);
    }
    return t;
  }();
  return truth;
}

enum class Variant { kTrue, kMisspecifiedPropensity, kZeroMean };

// Per-arm replication mean of the CAIPW column means and its z-score against
// the brute-force truth.
Outcome caipw_bias(Variant variant) {
  const auto t0 = Clock::now();
  const Truth& truth = brute_force_truth();
  const int reps = 50;
  const std::size_t n = 5000;
  std::vector<double> means[2];
  for (int r = 0; r < reps; ++r) {
    const auto ds = one_stage_sample(n, 4000 + r);
    std::optional<catrl::PropensityModel> model;
    if (variant == Variant::kMisspecifiedPropensity) {
      catrl::FeatureMatrix h(n, sim::kStage1Count);
      std::vector<int> arms(n);
      for (std::size_t i = 0; i < n; ++i) {
        h.set_row(i, ds.trajectories[i].stages[0].covariates);
        arms[i] = *ds.trajectories[i].stages[0].treatment;
      }
      model = catrl::PropensityModel::fit(h, arms, 2, {sim::kAge}, 1e-4);
    }
    const OneStageNuisance nuisance(model, variant == Variant::kZeroMean);
    catrl::CaipwOptions o;
    o.tau = kTau;
    const auto m = catrl::caipw_matrix(ds, 0, nuisance, catrl::final_pseudo_outcomes(ds), o);
    const auto cm = m.column_means();
    means[0].push_back(cm[0]);
    means[1].push_back(cm[1]);
  }
  bool pass = true;
  std::string detail;
  for (int a = 0; a < 2; ++a) {
    const double mean = std::accumulate(means[a].begin(), means[a].end(), 0.0) / reps;
    double ss = 0.0;
    for (double v : means[a]) ss += (v - mean) * (v - mean);
    const double se_rep = std::sqrt(ss / (reps - 1) / reps);
    const double se = std::sqrt(se_rep * se_rep + truth.se[a] * truth.se[a]);
    const double z = (mean - truth.mean[a]) / se;
    pass = pass && std::abs(z) <= 3.0;
    detail += "arm " + std::to_string(a) + ": " + fmt("%.3f", mean) + " vs " + fmt("%.3f", truth.mean[a]) + " (z " +
              fmt("%+.2f", z) + ") ";
  }
  detail += fmt("%.1f s", seconds_since(t0));
  return {pass, detail};
}

Outcome unbiasedness(const Context&) {
  const auto t0 = Clock::now();
  auto o = caipw_bias(Variant::kTrue);
  const double secs = seconds_since(t0);
  o.pass = o.pass && secs < 300.0;
  return o;
}

Outcome double_robustness(const Context&) {
  const auto t0 = Clock::now();
  const auto a = caipw_bias(Variant::kMisspecifiedPropensity);
  const auto b = caipw_bias(Variant::kZeroMean);
  const double secs = seconds_since(t0);
  return {a.pass && b.pass && secs < 600.0,
          "(a) age-only propensity: " + a.detail + " | (b) zero mean: " + b.detail};
}

// ------------------------------------------------------------ 6 rule recovery

Outcome rule_recovery(const Context&) {
  const auto t0 = Clock::now();
  sim::ScenarioConfig sc;
  sc.n_subjects = 2000;
  sc.censoring_kind = sim::CensoringKind::kNone;
  sc.target_censor_rate = 0.0;
  sc.noise_rate = 10.0;
  sc.seed = 1;
  const auto g = sim::generate(sc);
  catrl::FitConfig fc;
  fc.tau = g.oracle.tau;
  const auto policy = std::make_shared<const catrl::DTRPolicy>(catrl::fit(g.dataset, fc));
  catrl::CounterfactualOptions o;
  o.n_mc = 10000;
  o.seed = 606;
  const auto r = catrl::counterfactual_eval(catrl::PolicySpec::fitted(policy), g.oracle, o);
  const double secs = seconds_since(t0);
  return {r.cdr1.value >= 0.90 && r.acdr.value >= 0.85 && secs < 180.0,
          "CDR1 " + fmt("%.4f", r.cdr1.value) + ", ACDR " + fmt("%.4f", r.acdr.value) + ", " + fmt("%.1f s", secs)};
}

// ------------------------------------------------------------ 7, 8 benchmark

const catrl::BenchmarkReport& default_benchmark(const Context& ctx, double* secs) {
  static std::optional<catrl::BenchmarkReport> report;
  static double elapsed = 0.0;
  if (!report) {
    const auto t0 = Clock::now();
    catrl::BenchmarkConfig c;
    c.cache_dir = ctx.cache;
    report = catrl::benchmark(c);
    elapsed = seconds_since(t0);
    std::fputs(report->to_text().c_str(), stdout);
    std::fflush(stdout);
  }
  if (secs) *secs = elapsed;
  return *report;
}

const catrl::MethodSummary* method(const catrl::CellResult& cell, const std::string& name) {
  for (const auto& m : cell.methods) {
    if (m.method == name) return &m;
  }
  return nullptr;
}

std::string cell_name(const catrl::CellResult& c) {
  return "M=" + std::to_string(c.arity) + "/" + std::string(sim::to_string(c.propensity_mode)) + "/" +
         std::string(sim::to_string(c.censoring_kind));
}

Outcome table_ordering(const Context& ctx) {
  double secs = 0.0;
  const auto& report = default_benchmark(ctx, &secs);
  std::size_t ok_cells = 0;
  std::map<std::string, int> misses;  // metric -> cells where CA-TRL does not lead
  int acdr_violations = 0;
  for (const auto& cell : report.cells) {
    const auto* ca = method(cell, "CA-TRL");
    if (!ca || !cell.errors.empty()) {
      misses["fit error"]++;
      continue;
    }
    bool ok = true;
    for (const auto& m : cell.methods) {
      if (m.method == "CA-TRL" || m.method == "Optimal") continue;
      auto lead = [&](const char* metric, double mine, double theirs) {
        if (!(mine > theirs)) {
          ok = false;
          misses[std::string(metric) + " vs " + m.method]++;
        }
      };
      lead("rmst", ca->rmst.value, m.rmst.value);
      lead("cdr1", ca->cdr1.value, m.cdr1.value);
      lead("expected survival", ca->expected_survival.value, m.expected_survival.value);
    }
    for (const auto& m : cell.methods) {
      for (const auto& f : m.folds) {
        if (f.acdr.value > f.cdr1.value) {
          ok = false;
          ++acdr_violations;
        }
      }
    }
    if (ok) ++ok_cells;
  }
  std::string detail = std::to_string(ok_cells) + "/" + std::to_string(report.cells.size()) + " cells ordered";
  for (const auto& [what, count] : misses) detail += "; " + what + " in " + std::to_string(count) + " cells";
  detail += "; ACDR>CDR1 folds " + std::to_string(acdr_violations) + "; " + fmt("%.0f s", secs);
  return {ok_cells == report.cells.size() && secs < 1800.0, detail};
}

Outcome misspecification(const Context& ctx) {
  const auto& report = default_benchmark(ctx, nullptr);
  bool pass = true;
  std::string detail;
  for (const auto& cell : report.cells) {
    if (cell.propensity_mode != sim::PropensityMode::kTrue) continue;
    for (const auto& other : report.cells) {
      if (other.propensity_mode != sim::PropensityMode::kMisspecified || other.arity != cell.arity ||
          other.censoring_kind != cell.censoring_kind) {
        continue;
      }
      const auto* a = method(cell, "CA-TRL");
      const auto* b = method(other, "CA-TRL");
      if (!a || !b) {
        pass = false;
        continue;
      }
      const double gap = 100.0 * std::abs(a->cdr1.value - b->cdr1.value);
      pass = pass && gap <= 10.0;
      detail += "M=" + std::to_string(cell.arity) + "/" + std::string(sim::to_string(cell.censoring_kind)) + " " +
                fmt("%.1f", gap) + "pp; ";
    }
  }
  return {pass, detail};
}

// ------------------------------------------------------------ 9 split search

Outcome split_equivalence(const Context&) {
  catrl::RngStream r(909);
  int agree = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = 2 + r.below(11);
    const std::size_t p = 1 + r.below(3);
    const int arity = 2 + static_cast<int>(r.below(2));
    catrl::FeatureMatrix x(n, p);
    catrl::CaipwMatrix m;
    m.arity = arity;
    for (std::size_t i = 0; i < n; ++i) {
      m.subjects.push_back(i);
      for (std::size_t f = 0; f < p; ++f) x(i, f) = r.below(2) ? static_cast<double>(r.below(4)) : r.normal();
      for (int a = 0; a < arity; ++a) m.values.push_back(r.normal(0.0, 5.0));
    }
    catrl::TreeHyperparams hp;
    hp.n0 = 1 + static_cast<int>(r.below(3));
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});

    std::optional<double> best;
    for (std::size_t f = 0; f < p; ++f) {
      for (std::size_t pivot = 0; pivot < n; ++pivot) {
        std::vector<std::size_t> left, right;
        for (auto i : rows) (x(i, f) <= x(pivot, f) ? left : right).push_back(i);
        if (left.size() < static_cast<std::size_t>(hp.n0) || right.size() < static_cast<std::size_t>(hp.n0)) continue;
        const double imp = catrl::purity_improvement(rows, left, right, m);
        if (!best || imp > *best) best = imp;
      }
    }
    const auto got = catrl::best_split(rows, x, m, hp, -std::numeric_limits<double>::infinity());
    if (got.has_value() == best.has_value() && (!got || got->improvement == *best)) ++agree;
  }
  return {agree == trials, std::to_string(agree) + "/" + std::to_string(trials) + " instances identical"};
}

// ------------------------------------------------------------ 10 determinism

Outcome determinism(const Context& ctx) {
  if (ctx.cli.empty() || !fs::exists(ctx.cli)) return {false, "catrl executable not found (pass --cli)"};
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / ("catrl_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto cfg = dir / "bench.json";
  std::ofstream(cfg) << R"({"n_subjects": 1000, "seed": 2026})";
  auto run = [&](const std::string& threads, const std::string& out) {
    const std::string cmd = "\"" + ctx.cli + "\" -q --threads " + threads + " benchmark -c \"" + cfg.string() +
                            "\" -o \"" + (dir / out).string() + "\"";
    return std::system(cmd.c_str()) == 0;
  };
  bool ran = run("1", "serial_a") && run("1", "serial_b") && run("8", "parallel");
  int same = 0, total = 0;
  for (const char* f : {"benchmark.json", "benchmark.csv", "benchmark.txt"}) {
    const auto a = catrl::read_file(dir / "serial_a" / f);
    for (const char* other : {"serial_b", "parallel"}) {
      ++total;
      if (catrl::read_file(dir / other / f) == a && !a.empty()) ++same;
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  return {ran && same == total, std::to_string(same) + "/" + std::to_string(total) +
                                    " report files byte-identical (rerun, --threads 8 vs 1), " +
                                    fmt("%.1f s", seconds_since(t0))};
}

// ------------------------------------------------------------ 11 stopping rules

// Re-derives node membership by routing the stage histories, then checks
// counts, sizes, improvements and depth of every node.
int audit_tree(const catrl::PolicyTree& tree, const catrl::FeatureMatrix& h, const catrl::CaipwMatrix& m,
               std::string* why) {
  const auto& hp = tree.hyperparams;
  const auto n0 = static_cast<std::size_t>(hp.n0);
  std::vector<std::vector<std::size_t>> members(tree.nodes.size());
  std::function<void(int, std::vector<std::size_t>)> walk = [&](int idx, std::vector<std::size_t> rows) {
    const auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    members[static_cast<std::size_t>(idx)] = rows;
    if (node.feature < 0) return;
    std::vector<std::size_t> l, r;
    for (auto i : rows) (h(i, static_cast<std::size_t>(node.feature)) <= node.threshold ? l : r).push_back(i);
    walk(node.left, l);
    walk(node.right, r);
  };
  std::vector<std::size_t> all(m.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  walk(0, all);
  int bad = 0;
  auto fail = [&](const std::string& s) {
    ++bad;
    if (why->empty()) *why = s;
  };
  for (std::size_t j = 0; j < tree.nodes.size(); ++j) {
    const auto& node = tree.nodes[j];
    const auto& rows = members[j];
    if (rows.size() != node.count) fail("node count differs from routed rows");
    if (node.depth > hp.max_depth) fail("depth above max_depth");
    if (node.feature < 0) {
      if (rows.size() < n0) fail("leaf below n0");
      continue;
    }
    if (rows.size() < 2 * n0) fail("split of a node below 2 n0");
    if (!(node.improvement > tree.lambda)) fail("improvement not above lambda");
    const auto& l = members[static_cast<std::size_t>(node.left)];
    const auto& r = members[static_cast<std::size_t>(node.right)];
    if (l.empty() || r.empty()) {
      fail("empty child");
      continue;
    }
    if (catrl::purity_improvement(rows, l, r, m) != node.improvement) fail("stored improvement differs");
  }
  return bad;
}

Outcome stopping_rules(const Context&) {
  const auto t0 = Clock::now();
  std::vector<std::pair<sim::ScenarioConfig, catrl::FitConfig>> runs;
  for (int arity : {2, 3}) {
    for (auto kind : {sim::CensoringKind::kExponential, sim::CensoringKind::kConditional, sim::CensoringKind::kUniform}) {
      for (auto mode : {catrl::PropensityPreset::kAll, catrl::PropensityPreset::kMisspecified}) {
        sim::ScenarioConfig sc;
        sc.n_subjects = 2000;
        sc.arity = arity;
        sc.censoring_kind = kind;
        sc.seed = 1100 + runs.size();
        catrl::FitConfig fc;
        fc.propensity.preset = mode;
        fc.nuisance.forest.n_trees = 60;
        runs.emplace_back(sc, fc);
      }
    }
  }
  // Hyperparameter sweep on one scenario.
  for (auto [n0, lambda, depth] : std::vector<std::tuple<int, double, int>>{
           {1, 0.0, 6}, {5, 0.0, 5}, {50, 0.0, 4}, {200, 0.0, 3}, {20, 0.5, 4}, {20, 2.0, 3}, {10, -1.0, 1}}) {
    sim::ScenarioConfig sc;
    sc.n_subjects = 2000;
    sc.seed = 1200;
    catrl::FitConfig fc;
    fc.nuisance.forest.n_trees = 60;
    fc.trees[0].n0 = n0;
    fc.trees[0].max_depth = depth;
    if (lambda >= 0.0) fc.trees[0].lambda = lambda;
    runs.emplace_back(sc, fc);
  }

  int trees = 0, nodes = 0, bad = 0;
  std::string why;
  for (const auto& [sc, fc] : runs) {
    const auto g = sim::generate(sc);
    std::map<int, catrl::CaipwMatrix> matrices;
    catrl::FitHooks hooks;
    hooks.on_matrix = [&](const catrl::CaipwMatrix& m) { matrices[m.stage] = m; };
    const auto policy = catrl::fit(g.dataset, fc, hooks);
    for (int k = 0; k < g.dataset.stages(); ++k) {
      const auto& tree = policy.trees[static_cast<std::size_t>(k)];
      bad += audit_tree(tree, catrl::stage_histories(g.dataset, k), matrices.at(k), &why);
      ++trees;
      nodes += static_cast<int>(tree.nodes.size());
    }
  }
  return {bad == 0, std::to_string(trees) + " trees, " + std::to_string(nodes) + " nodes audited, " +
                        std::to_string(bad) + " violations" + (why.empty() ? "" : " (" + why + ")") + ", " +
                        fmt("%.0f s", seconds_since(t0))};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)(const Context&);
};

const std::vector<Criterion> kCriteria = {
    {1, "bookkeeping exactness", bookkeeping},
    {2, "censoring calibration", calibration},
    {3, "product-limit oracle", km_oracle},
    {4, "CAIPW unbiasedness", unbiasedness},
    {5, "double robustness", double_robustness},
    {6, "oracle rule recovery", rule_recovery},
    {7, "benchmark ordering", table_ordering},
    {8, "misspecification robustness", misspecification},
    {9, "split search equals enumeration", split_equivalence},
    {10, "determinism", determinism},
    {11, "stopping rules", stopping_rules},
};

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      ctx.cli = argv[++i];
    } else if (a == "--cache" && i + 1 < argc) {
      ctx.cache = argv[++i];
    } else {
      wanted.push_back(std::atoi(a.c_str()));
    }
  }
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
