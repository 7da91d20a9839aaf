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

#include "catrl/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catrl/error.hpp"

namespace catrl {

namespace {

struct RiskTable {
  std::vector<double> times;  // distinct event times
  std::vector<double> deaths;
  std::vector<double> at_risk;
};

RiskTable risk_table(std::span<const double> times, std::span<const int> events) {
  if (times.size() != events.size()) throw ConfigError("times and events differ in length");
  if (times.empty()) throw ConfigError("survival estimate of empty sample");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  RiskTable table;
  double n = static_cast<double>(times.size());
  for (std::size_t i = 0; i < order.size();) {
    const double t = times[order[i]];
    if (t < 0 || !std::isfinite(t)) throw ConfigError("survival times must be finite and >= 0");
    double d = 0.0;
    double c = 0.0;
    std::size_t j = i;
    for (; j < order.size() && times[order[j]] == t; ++j) {
      if (events[order[j]]) {
        d += 1.0;
      } else {
        c += 1.0;
      }
    }
    if (d > 0) {
      table.times.push_back(t);
      table.deaths.push_back(d);
      table.at_risk.push_back(n);
    }
    n -= d + c;
    i = j;
  }
  return table;
}

// Integral over [0, tau] of a step function equal to 1 before times[0] and
// values[j] on [times[j], times[j+1]).
double integrate_steps(const std::vector<double>& times, const std::vector<double>& values, double tau) {
  if (tau <= 0.0) return 0.0;
  double area = 0.0;
  double prev_t = 0.0;
  double prev_v = 1.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double t = std::max(times[j], 0.0);
    if (t >= tau) break;
    area += prev_v * (t - prev_t);
    prev_t = t;
    prev_v = values[j];
  }
  return area + prev_v * (tau - prev_t);
}

}  // namespace

SurvivalCurve::SurvivalCurve(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.size() != values_.size()) throw ConfigError("survival curve: times and values differ in length");
}

double SurvivalCurve::at(double t) const {
  if (t <= 0.0) return 1.0;
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 1.0;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double SurvivalCurve::restricted_mean(double tau) const { return integrate_steps(times_, values_, tau); }

SurvivalCurve fit_km(std::span<const double> times, std::span<const int> events) {
  const RiskTable table = risk_table(times, events);
  std::vector<double> values(table.times.size());
  double s = 1.0;
  for (std::size_t j = 0; j < table.times.size(); ++j) {
    s *= 1.0 - table.deaths[j] / table.at_risk[j];
    values[j] = s;
  }
  return SurvivalCurve(table.times, std::move(values));
}

double rmst_km(std::span<const double> times, std::span<const int> events, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  return fit_km(times, events).restricted_mean(tau);
}

RmstEstimate rmst_km_with_se(std::span<const double> times, std::span<const int> events, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  const RiskTable table = risk_table(times, events);
  const SurvivalCurve km = fit_km(times, events);
  RmstEstimate est;
  est.value = km.restricted_mean(tau);
  double var = 0.0;
  for (std::size_t j = 0; j < table.times.size() && table.times[j] <= tau; ++j) {
    const double n = table.at_risk[j];
    const double d = table.deaths[j];
    if (n - d <= 0.0) continue;
    const double tail = est.value - km.restricted_mean(table.times[j]);
    var += tail * tail * d / (n * (n - d));
  }
  est.std_error = std::sqrt(var);
  return est;
}

double CumulativeHazard::at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return hazard[static_cast<std::size_t>(it - times.begin()) - 1];
}

double CumulativeHazard::restricted_mean(double tau) const {
  if (tau <= 0.0) return 0.0;
  double area = 0.0;
  double prev_t = 0.0;
  double prev_s = 1.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double t = std::max(times[j], 0.0);
    if (t >= tau) break;
    area += prev_s * (t - prev_t);
    prev_t = t;
    prev_s = std::exp(-hazard[j]);
  }
  return area + prev_s * (tau - prev_t);
}

CumulativeHazard fit_nelson_aalen(std::span<const double> times, std::span<const int> events) {
  const RiskTable table = risk_table(times, events);
  CumulativeHazard h;
  h.times = table.times;
  h.hazard.resize(table.times.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < table.times.size(); ++j) {
    // Tied deaths enter one at a time, so a group that dies out together
    // has a hazard near log(n) rather than 1.
    const auto d = static_cast<long>(std::lround(table.deaths[j]));
    for (long l = 0; l < d; ++l) acc += 1.0 / (table.at_risk[j] - static_cast<double>(l));
    h.hazard[j] = acc;
  }
  return h;
}

double concordance_index(std::span<const double> times, std::span<const int> events, std::span<const double> scores) {
  if (times.size() != events.size() || times.size() != scores.size()) throw ConfigError("concordance: length mismatch");
  double concordant = 0.0;
  double comparable = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!events[i]) continue;
    for (std::size_t j = 0; j < times.size(); ++j) {
      if (i == j) continue;
      const bool usable = times[i] < times[j] || (times[i] == times[j] && !events[j]);
      if (!usable) continue;
      comparable += 1.0;
      if (scores[i] < scores[j]) {
        concordant += 1.0;
      } else if (scores[i] == scores[j]) {
        concordant += 0.5;
      }
    }
  }
  return comparable > 0 ? concordant / comparable : 0.5;
}

}  // namespace catrl
