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

#ifndef CATRL_SURVIVAL_HPP_
#define CATRL_SURVIVAL_HPP_

#include <span>
#include <vector>

namespace catrl {

// Right-continuous step function S(t) = P(T > t). `times` are the strictly
// increasing jump points and `values[j]` is S on [times[j], times[j+1]).
// S is 1 before the first jump and values are non-increasing in [0, 1].
class SurvivalCurve {
 public:
  SurvivalCurve() = default;
  SurvivalCurve(std::vector<double> times, std::vector<double> values);

  // S(t); 1 for t <= 0 by convention, last value carried forward past the
  // final jump.
  double at(double t) const;
  // Exact integral of S over [0, tau].
  double restricted_mean(double tau) const;

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

// Product-limit estimator. At tied times, deaths are processed before
// censorings, so subjects censored at t are still at risk at t.
SurvivalCurve fit_km(std::span<const double> times, std::span<const int> events);

// Kaplan-Meier restricted mean over [0, tau].
double rmst_km(std::span<const double> times, std::span<const int> events, double tau);

struct RmstEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
// As rmst_km, with the Greenwood-type standard error of the restricted mean.
RmstEstimate rmst_km_with_se(std::span<const double> times, std::span<const int> events, double tau);

// Nelson-Aalen cumulative hazard. `times` are the distinct event times and
// `hazard[j]` is H on [times[j], times[j+1]).
struct CumulativeHazard {
  std::vector<double> times;
  std::vector<double> hazard;

  double at(double t) const;
  // Integral of exp(-H(t)) over [0, tau].
  double restricted_mean(double tau) const;
};
// Ties are split: d deaths among Y at risk add 1/Y + 1/(Y-1) + ... + 1/(Y-d+1).
CumulativeHazard fit_nelson_aalen(std::span<const double> times, std::span<const int> events);

// Harrell's concordance index for predicted survival scores (higher score
// means longer expected survival). Pairs with tied scores count 1/2.
double concordance_index(std::span<const double> times, std::span<const int> events, std::span<const double> scores);

}  // namespace catrl

#endif  // CATRL_SURVIVAL_HPP_
