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

#include "catrl/caipw.hpp"

#include <algorithm>
#include <cmath>

#include "catrl/error.hpp"
#include "catrl/parallel.hpp"

namespace catrl {

double caipw_value(const CaipwTerm& t) {
  const double ind = t.treated ? 1.0 : 0.0;
  const double weighted = (t.treated && t.uncensored) ? t.outcome / (t.propensity * t.censoring) : 0.0;
  return weighted + (1.0 - ind / t.propensity) * t.mean;
}

double caipw_final(const CaipwTerm& t) { return caipw_value(t); }

double caipw_intermediate(const CaipwTerm& t) { return caipw_value(t); }

double pseudo_outcome(bool delta_next, double r_bar_next, double mu_opt, double mu_observed, double upper) {
  const double v = delta_next ? r_bar_next + mu_opt - mu_observed : mu_opt;
  return std::clamp(v, 0.0, upper);
}

PseudoOutcomes final_pseudo_outcomes(const Dataset& dataset) {
  PseudoOutcomes p;
  p.stage = dataset.stages() - 1;
  p.values.assign(dataset.size(), std::nan(""));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& traj = dataset.trajectories[i];
    if (traj.stages[static_cast<std::size_t>(p.stage)].entered) p.values[i] = traj.total_time;
  }
  return p;
}

std::vector<double> CaipwMatrix::column_means() const {
  std::vector<double> means(static_cast<std::size_t>(arity), 0.0);
  if (subjects.empty()) return means;
  for (std::size_t i = 0; i < rows(); ++i) {
    for (int a = 0; a < arity; ++a) means[static_cast<std::size_t>(a)] += at(i, a);
  }
  for (double& m : means) m /= static_cast<double>(rows());
  return means;
}

std::string CaipwMatrix::to_csv() const {
  std::string out = "subject";
  for (int a = 0; a < arity; ++a) out += ",arm" + std::to_string(a);
  out += '\n';
  for (std::size_t i = 0; i < rows(); ++i) {
    out += std::to_string(subjects[i]);
    for (int a = 0; a < arity; ++a) out += ',' + format_double(at(i, a));
    out += '\n';
  }
  return out;
}

CaipwMatrix caipw_matrix(const Dataset& dataset, int stage, const StageNuisance& models,
                         const PseudoOutcomes& pseudo, const CaipwOptions& options) {
  if (stage < 0 || stage >= dataset.stages()) throw ConfigError("caipw: stage out of range");
  if (pseudo.stage != stage || pseudo.values.size() != dataset.size()) {
    throw ConfigError("caipw: pseudo-outcomes misaligned with the dataset");
  }
  if (!(options.tau > 0.0)) throw ConfigError("caipw: tau must be > 0");
  const auto k = static_cast<std::size_t>(stage);

  CaipwMatrix m;
  m.stage = stage;
  m.arity = dataset.arity(stage);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& rec = dataset.trajectories[i].stages[k];
    if (!rec.entered) continue;
    if (rec.event && std::isnan(pseudo.values[i])) {
      throw ConfigError("caipw: pseudo-outcome missing for uncensored subject " + std::to_string(i));
    }
    m.subjects.push_back(i);
  }
  m.values.assign(m.rows() * static_cast<std::size_t>(m.arity), 0.0);

  parallel_for(m.rows(), [&](std::size_t r) {
    const std::size_t i = m.subjects[r];
    const auto& traj = dataset.trajectories[i];
    const auto& rec = traj.stages[k];
    const History h = build_history(traj, stage);
    const double elapsed = traj.elapsed_before(stage);

    double y = 0.0;
    bool uncensored = false;
    if (!std::isnan(pseudo.values[i])) {
      y = std::min(pseudo.values[i], options.tau);
      uncensored = rec.event || pseudo.values[i] >= options.tau;
    } else if (traj.total_time >= options.tau) {
      y = options.tau;
      uncensored = true;
    }
    double sc = 1.0;
    if (uncensored && rec.treatment) {
      double at = y;
      if (options.weight_at == CensoringWeightAt::kStageEnd) {
        at = rec.duration ? std::min(elapsed + *rec.duration, options.tau) : options.tau;
      }
      sc = std::max(models.censoring_survival(h, elapsed, std::max(at, elapsed), r), options.censoring_floor);
    }
    const auto pi = models.propensity(h);
    for (int a = 0; a < m.arity; ++a) {
      CaipwTerm t;
      t.treated = rec.treatment && *rec.treatment == a;
      t.uncensored = uncensored;
      t.propensity = pi[static_cast<std::size_t>(a)];
      t.censoring = sc;
      t.outcome = y;
      t.mean = models.mean_outcome(h, elapsed, a, options.tau, r);
      m.at(r, a) = stage == dataset.stages() - 1 ? caipw_final(t) : caipw_intermediate(t);
    }
  });
  return m;
}

}  // namespace catrl
