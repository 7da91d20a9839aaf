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

#include <cmath>
#include <vector>

#include "catrl/error.hpp"
#include "catrl/survival.hpp"
#include "doctest.h"

using catrl::SurvivalCurve;

namespace {

struct KmCase {
  std::vector<double> times;
  std::vector<int> events;
  std::vector<std::pair<double, double>> expect;  // (t, S(t))
};

// Hand product-limit values.
std::vector<KmCase> km_cases() {
  return {
      {{1, 2, 3}, {1, 0, 1}, {{0.5, 1.0}, {1, 2.0 / 3.0}, {2, 2.0 / 3.0}, {2.5, 2.0 / 3.0}, {3, 0.0}}},
      // Deaths before censorings at a tie.
      {{2, 2, 2, 4, 5}, {1, 1, 0, 1, 0}, {{1.9, 1.0}, {2, 0.6}, {4, 0.3}, {5, 0.3}, {9, 0.3}}},
      {{1, 4, 6}, {0, 0, 0}, {{0, 1.0}, {1, 1.0}, {6, 1.0}, {7, 1.0}}},
      {{5}, {1}, {{4.999, 1.0}, {5, 0.0}, {6, 0.0}}},
      {{3, 3, 3}, {1, 1, 1}, {{2.9, 1.0}, {3, 0.0}}},
      {{1, 2, 2, 3}, {0, 1, 1, 1}, {{1, 1.0}, {2, 1.0 / 3.0}, {3, 0.0}}},
      {{5, 1, 3, 2, 4}, {1, 1, 0, 1, 0}, {{1, 0.8}, {2, 0.6}, {3, 0.6}, {4, 0.6}, {5, 0.0}}},
  };
}

}  // namespace

TEST_SUITE("survival") {
  TEST_CASE("product-limit edge cases") {
    for (const auto& c : km_cases()) {
      const auto km = catrl::fit_km(c.times, c.events);
      for (const auto& [t, s] : c.expect) {
        CAPTURE(t);
        CHECK(std::abs(km.at(t) - s) <= 1e-12);
      }
    }
  }

  TEST_CASE("curve conventions") {
    const auto km = catrl::fit_km(std::vector<double>{1, 2, 3}, std::vector<int>{1, 0, 1});
    CHECK(km.at(0.0) == 1.0);
    CHECK(km.at(-1.0) == 1.0);
    for (std::size_t j = 1; j < km.values().size(); ++j) CHECK(km.values()[j] <= km.values()[j - 1]);
    const auto censored = catrl::fit_km(std::vector<double>{1, 2}, std::vector<int>{1, 0});
    CHECK(censored.at(100.0) == 0.5);
    CHECK_THROWS_AS(catrl::fit_km(std::vector<double>{}, std::vector<int>{}), catrl::ConfigError);
    CHECK_THROWS_AS(catrl::fit_km(std::vector<double>{-1}, std::vector<int>{1}), catrl::ConfigError);
  }

  TEST_CASE("restricted mean") {
    const SurvivalCurve step({1.0, 3.0}, {2.0 / 3.0, 0.0});
    CHECK(step.restricted_mean(3.0) == doctest::Approx(7.0 / 3.0));
    const auto km = catrl::fit_km(std::vector<double>{1, 2, 3}, std::vector<int>{1, 0, 1});
    CHECK(km.restricted_mean(3.0) == doctest::Approx(7.0 / 3.0));
    CHECK(SurvivalCurve().restricted_mean(4.5) == 4.5);
    CHECK(step.restricted_mean(0.0) == 0.0);
    CHECK(catrl::rmst_km(std::vector<double>{1, 2, 3}, std::vector<int>{1, 1, 1}, 3.0) == doctest::Approx(2.0));
    CHECK(catrl::rmst_km(std::vector<double>{4, 5}, std::vector<int>{1, 1}, 2.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(catrl::rmst_km(std::vector<double>{4}, std::vector<int>{1}, 0.0), catrl::ConfigError);
  }

  TEST_CASE("restricted mean standard error") {
    // No censoring: the KM mean is the sample mean of min(T, tau) and its
    // Greenwood-type variance is the plug-in variance over n.
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> e{1, 1, 1, 1};
    const auto est = catrl::rmst_km_with_se(t, e, 10.0);
    CHECK(est.value == doctest::Approx(2.5));
    CHECK(est.std_error == doctest::Approx(std::sqrt(1.25 / 4.0)));
  }

  TEST_CASE("Nelson-Aalen splits ties") {
    const auto na = catrl::fit_nelson_aalen(std::vector<double>{1, 1, 2}, std::vector<int>{1, 1, 1});
    CHECK(na.at(0.5) == 0.0);
    CHECK(na.at(1.0) == doctest::Approx(1.0 / 3.0 + 1.0 / 2.0));
    CHECK(na.at(2.0) == doctest::Approx(1.0 / 3.0 + 1.0 / 2.0 + 1.0));
    const auto censored = catrl::fit_nelson_aalen(std::vector<double>{1, 2, 3}, std::vector<int>{1, 0, 1});
    CHECK(censored.at(3.0) == doctest::Approx(1.0 / 3.0 + 1.0));
    CHECK(censored.restricted_mean(1.0) == doctest::Approx(1.0));
    CHECK(censored.restricted_mean(3.0) == doctest::Approx(1.0 + 2.0 * std::exp(-1.0 / 3.0)));
  }

  TEST_CASE("concordance index") {
    const std::vector<double> t{1, 2, 3, 4};
    const std::vector<int> e{1, 1, 1, 1};
    CHECK(catrl::concordance_index(t, e, std::vector<double>{1, 2, 3, 4}) == doctest::Approx(1.0));
    CHECK(catrl::concordance_index(t, e, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(0.0));
    CHECK(catrl::concordance_index(t, e, std::vector<double>{1, 1, 1, 1}) == doctest::Approx(0.5));
  }
}
