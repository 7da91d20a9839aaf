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

#ifndef CATRL_CAIPW_HPP_
#define CATRL_CAIPW_HPP_

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "catrl/core.hpp"
#include "catrl/nuisance.hpp"

namespace catrl {

// Inputs of one per-subject, per-arm censoring-adjusted AIPW term.
struct CaipwTerm {
  bool treated = false;      // observed arm equals the evaluated arm
  bool uncensored = false;   // delta
  double propensity = 1.0;   // pi-hat of the evaluated arm
  double censoring = 1.0;    // S_c-hat at the outcome, already floored
  double outcome = 0.0;      // T at the final stage, R-bar otherwise
  double mean = 0.0;         // mu-hat of the evaluated arm
};

// I(A=a) delta / (pi S_c) * y + (1 - I(A=a) / pi) * mu.
double caipw_value(const CaipwTerm& t);
// Same estimator at the final stage (outcome T) and at earlier stages
// (outcome R-bar, S_c evaluated at R-bar).
double caipw_final(const CaipwTerm& t);
double caipw_intermediate(const CaipwTerm& t);

// delta_next (r_bar_next + mu_opt - mu_observed) + (1 - delta_next) mu_opt,
// clamped to [0, upper].
double pseudo_outcome(bool delta_next, double r_bar_next, double mu_opt, double mu_observed,
                      double upper = std::numeric_limits<double>::infinity());

// Pseudo-outcomes of one stage on the total-time axis, aligned with the
// dataset's subjects; NaN where undefined (censored before the value is
// known, or the stage never entered).
struct PseudoOutcomes {
  int stage = 0;  // 0-based
  std::vector<double> values;
};

// Stage K: R-bar = T for every entrant.
PseudoOutcomes final_pseudo_outcomes(const Dataset& dataset);

struct CaipwMatrix {
  int stage = 0;
  int arity = 2;
  std::vector<std::size_t> subjects;  // dataset rows with eta_k = 1
  std::vector<double> values;         // row-major subjects x arity

  std::size_t rows() const { return subjects.size(); }
  double at(std::size_t i, int a) const { return values[i * static_cast<std::size_t>(arity) + static_cast<std::size_t>(a)]; }
  double& at(std::size_t i, int a) { return values[i * static_cast<std::size_t>(arity) + static_cast<std::size_t>(a)]; }
  std::vector<double> column_means() const;
  std::string to_csv() const;
};

// Where S_c is read for an uncensored subject: at the truncated pseudo-outcome
// y, or at the end of the current stage (min(elapsed + R_k, tau)).
enum class CensoringWeightAt { kPseudoOutcome, kStageEnd };

struct CaipwOptions {
  // Outcomes are truncated at tau: y = min(R-bar, tau), and a subject known
  // to survive past tau counts as uncensored with S_c evaluated at tau.
  double tau = std::numeric_limits<double>::infinity();
  double censoring_floor = 0.05;
  CensoringWeightAt weight_at = CensoringWeightAt::kStageEnd;
};

// Matrix over the stage-k entrants. A subject whose delta_k is 0 and whose
// pseudo-outcome is undefined contributes only its augmentation term, unless
// its observed T already reaches tau (then y = tau is known).
// Throws ConfigError if pseudo is misaligned with the dataset or undefined for
// an uncensored entrant.
CaipwMatrix caipw_matrix(const Dataset& dataset, int stage, const StageNuisance& models,
                         const PseudoOutcomes& pseudo, const CaipwOptions& options);

}  // namespace catrl

#endif  // CATRL_CAIPW_HPP_
