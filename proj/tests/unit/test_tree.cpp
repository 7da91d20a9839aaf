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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "catrl/caipw.hpp"
#include "catrl/error.hpp"
#include "catrl/policy_tree.hpp"
#include "catrl/rng.hpp"
#include "doctest.h"

using catrl::CaipwMatrix;
using catrl::CaipwTerm;
using catrl::FeatureMatrix;
using catrl::TreeHyperparams;

namespace {

// Constant nuisances.
class FixedNuisance : public catrl::StageNuisance {
 public:
  FixedNuisance(std::vector<double> pi, double sc, std::vector<double> mu) : pi_(pi), sc_(sc), mu_(mu) {}
  std::vector<double> propensity(std::span<const double>) const override { return pi_; }
  double censoring_survival(std::span<const double>, double, double, Row) const override { return sc_; }
  double mean_outcome(std::span<const double>, double, int a, double, Row) const override { return mu_[a]; }

 private:
  std::vector<double> pi_;
  double sc_;
  std::vector<double> mu_;
};

catrl::Dataset one_stage(const std::vector<std::tuple<int, double, bool>>& rows) {
  catrl::Dataset ds;
  ds.schema = {{{{"x"}}}, {2}};
  double x = 0.0;
  for (const auto& [a, r, d] : rows) {
    catrl::Trajectory t;
    t.stages = {catrl::StageRecord{true, {x++}, a, r, d}};
    t.total_time = r;
    ds.trajectories.push_back(t);
  }
  return ds;
}

CaipwMatrix matrix(int arity, const std::vector<std::vector<double>>& rows) {
  CaipwMatrix m;
  m.arity = arity;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.subjects.push_back(i);
    m.values.insert(m.values.end(), rows[i].begin(), rows[i].end());
  }
  return m;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// Every split of `rows` on every feature at each observed value, scored by
// purity_improvement.
std::optional<double> exhaustive_best(const std::vector<std::size_t>& rows, const FeatureMatrix& x,
                                      const CaipwMatrix& m, int n0) {
  std::optional<double> best;
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (auto pivot : rows) {
      std::vector<std::size_t> left, right;
      for (auto r : rows) (x(r, f) <= x(pivot, f) ? left : right).push_back(r);
      if (left.size() < static_cast<std::size_t>(n0) || right.size() < static_cast<std::size_t>(n0)) continue;
      const double imp = catrl::purity_improvement(rows, left, right, m);
      if (!best || imp > *best) best = imp;
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("caipw") {
  TEST_CASE("single terms") {
    CHECK(catrl::caipw_final({true, true, 0.5, 1.0, 10.0, 8.0}) == doctest::Approx(12.0));
    CHECK(catrl::caipw_final({false, true, 0.5, 1.0, 10.0, 8.0}) == doctest::Approx(8.0));
    CHECK(catrl::caipw_final({true, false, 0.5, 1.0, 10.0, 8.0}) == doctest::Approx(-8.0));
    CHECK(catrl::caipw_intermediate({true, true, 1.0, 1.0, 4.0, 3.0}) == doctest::Approx(4.0));
    CHECK(catrl::caipw_intermediate({false, true, 0.25, 0.5, 4.0, 3.0}) == doctest::Approx(3.0));
    CHECK(catrl::caipw_intermediate({true, true, 0.25, 0.5, 4.0, 3.0}) == doctest::Approx(23.0));
  }

  TEST_CASE("pseudo-outcomes") {
    CHECK(catrl::pseudo_outcome(false, 5.0, 4.0, 1.0) == 4.0);
    CHECK(catrl::pseudo_outcome(true, 5.0, 4.0, 4.0) == 5.0);
    CHECK(catrl::pseudo_outcome(true, 5.0, 6.0, 2.0) == 9.0);
    CHECK(catrl::pseudo_outcome(true, 1.0, 0.0, 5.0) == 0.0);
    CHECK(catrl::pseudo_outcome(true, 5.0, 6.0, 2.0, 7.0) == 7.0);
  }

  TEST_CASE("matrix assembly") {
    const auto ds = one_stage({{1, 10.0, true}, {0, 3.0, false}});
    const FixedNuisance nu({0.5, 0.5}, 1.0, {8.0, 6.0});
    const auto m = catrl::caipw_matrix(ds, 0, nu, catrl::final_pseudo_outcomes(ds), {});
    REQUIRE(m.rows() == 2);
    CHECK(m.at(0, 0) == doctest::Approx(8.0));
    CHECK(m.at(0, 1) == doctest::Approx(14.0));
    CHECK(m.at(1, 0) == doctest::Approx(-8.0));
    CHECK(m.at(1, 1) == doctest::Approx(6.0));
    CHECK(m.column_means()[0] == doctest::Approx(0.0));
    CHECK(m.to_csv() == "subject,arm0,arm1\n0,8,14\n1,-8,6\n");
  }

  TEST_CASE("zero outcome model gives the weighted estimator") {
    const auto ds = one_stage({{1, 10.0, true}, {0, 3.0, true}, {1, 2.0, false}});
    const FixedNuisance nu({0.25, 0.75}, 0.5, {0.0, 0.0});
    const auto m = catrl::caipw_matrix(ds, 0, nu, catrl::final_pseudo_outcomes(ds), {});
    CHECK(m.at(0, 1) == doctest::Approx(10.0 / (0.75 * 0.5)));
    CHECK(m.at(0, 0) == 0.0);
    CHECK(m.at(1, 0) == doctest::Approx(3.0 / (0.25 * 0.5)));
    CHECK(m.at(2, 1) == 0.0);
  }

  TEST_CASE("truncation at tau") {
    // Censored after tau: the truncated outcome is known.
    const auto ds = one_stage({{1, 30.0, false}});
    const FixedNuisance nu({0.5, 0.5}, 0.8, {10.0, 12.0});
    catrl::CaipwOptions o;
    o.tau = 20.0;
    const auto m = catrl::caipw_matrix(ds, 0, nu, catrl::final_pseudo_outcomes(ds), o);
    CHECK(m.at(0, 1) == doctest::Approx(20.0 / (0.5 * 0.8) - 12.0));
  }

  TEST_CASE("censoring floor") {
    const auto ds = one_stage({{0, 4.0, true}});
    const FixedNuisance nu({0.5, 0.5}, 0.001, {0.0, 0.0});
    const auto m = catrl::caipw_matrix(ds, 0, nu, catrl::final_pseudo_outcomes(ds), {});
    CHECK(m.at(0, 0) == doctest::Approx(4.0 / (0.5 * 0.05)));
  }

  TEST_CASE("misaligned pseudo-outcomes") {
    const auto ds = one_stage({{0, 4.0, true}});
    const FixedNuisance nu({0.5, 0.5}, 1.0, {0.0, 0.0});
    catrl::PseudoOutcomes p{0, {}};
    CHECK_THROWS_AS(catrl::caipw_matrix(ds, 0, nu, p, {}), catrl::ConfigError);
    p.values = {std::nan("")};
    CHECK_THROWS_AS(catrl::caipw_matrix(ds, 0, nu, p, {}), catrl::ConfigError);
  }
}

TEST_SUITE("policy_tree") {
  TEST_CASE("node value") {
    const auto m = matrix(2, {{1, 3}, {2, 2}});
    auto v = catrl::node_value(all_rows(2), m);
    CHECK(v.value == doctest::Approx(2.5));
    CHECK(v.arm == 1);
    v = catrl::node_value(std::vector<std::size_t>{0}, matrix(2, {{5, 5}}));
    CHECK(v.value == 5.0);
    CHECK(v.arm == 0);
    v = catrl::node_value(all_rows(3), matrix(3, {{2, 2, 2}, {2, 2, 2}, {2, 2, 2}}));
    CHECK(v.value == 2.0);
    CHECK(v.arm == 0);
  }

  TEST_CASE("purity improvement") {
    const auto flat = matrix(2, {{1, 1}, {1, 1}});
    const std::vector<std::size_t> l{0}, r{1};
    CHECK(catrl::purity_improvement(all_rows(2), l, r, flat) == 0.0);
    const auto sep = matrix(2, {{10, 0}, {0, 10}});
    CHECK(catrl::purity_improvement(all_rows(2), l, r, sep) == doctest::Approx(5.0));
    CHECK_THROWS_AS(catrl::purity_improvement(all_rows(2), all_rows(2), {}, sep), catrl::ConfigError);
    CHECK_THROWS_AS(catrl::purity_improvement(all_rows(2), l, l, sep), catrl::ConfigError);
  }

  TEST_CASE("best split on an aligned feature") {
    FeatureMatrix x(4, 2);
    const double signal[] = {0, 0, 1, 1};
    const double noise[] = {0.3, 0.9, 0.1, 0.5};
    for (std::size_t i = 0; i < 4; ++i) {
      x(i, 0) = noise[i];
      x(i, 1) = signal[i];
    }
    const auto m = matrix(2, {{5, 0}, {5, 0}, {0, 5}, {0, 5}});
    TreeHyperparams hp;
    hp.n0 = 1;
    const auto s = catrl::best_split(all_rows(4), x, m, hp, 0.0);
    REQUIRE(s);
    CHECK(s->feature == 1);
    CHECK(s->threshold == doctest::Approx(0.5));
    CHECK(s->improvement == doctest::Approx(2.5));
    CHECK_FALSE(catrl::best_split(all_rows(4), x, m, hp, 2.5));
    hp.n0 = 3;
    CHECK_FALSE(catrl::best_split(all_rows(4), x, m, hp, 0.0));
    hp.n0 = 2;
    CHECK(catrl::best_split(all_rows(4), x, m, hp, 0.0));
    CHECK_FALSE(catrl::best_split(std::vector<std::size_t>{0, 1, 2}, x, m, hp, 0.0));
  }

  TEST_CASE("best split ties go to the lower feature then threshold") {
    FeatureMatrix x(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
      x(i, 0) = static_cast<double>(i);
      x(i, 1) = static_cast<double>(i);
    }
    const auto m = matrix(2, {{1, 0}, {1, 0}, {1, 0}, {1, 0}});
    TreeHyperparams hp;
    hp.n0 = 1;
    const auto s = catrl::best_split(all_rows(4), x, m, hp, -1.0);
    REQUIRE(s);
    CHECK(s->feature == 0);
    CHECK(s->threshold == doctest::Approx(0.5));
  }

  TEST_CASE("best split equals enumeration on small random instances") {
    catrl::RngStream r(77);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 2 + r.below(11);
      const std::size_t p = 1 + r.below(3);
      const int arity = 2 + static_cast<int>(r.below(2));
      FeatureMatrix x(n, p);
      std::vector<std::vector<double>> rows(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < p; ++f) x(i, f) = static_cast<double>(r.below(5));
        for (int a = 0; a < arity; ++a) rows[i].push_back(r.normal(0.0, 3.0));
      }
      const auto m = matrix(arity, rows);
      TreeHyperparams hp;
      hp.n0 = 1 + static_cast<int>(r.below(3));
      const auto got = catrl::best_split(all_rows(n), x, m, hp, -1e300);
      const auto want = exhaustive_best(all_rows(n), x, m, hp.n0);
      CAPTURE(trial);
      REQUIRE(got.has_value() == want.has_value());
      if (got) CHECK(got->improvement == *want);
    }
  }

  TEST_CASE("grow respects depth and lambda") {
    FeatureMatrix x(8, 1);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < 8; ++i) {
      x(i, 0) = static_cast<double>(i);
      rows.push_back(i < 4 ? std::vector<double>{1, 0} : std::vector<double>{0, 3});
    }
    const auto m = matrix(2, rows);
    TreeHyperparams hp;
    hp.n0 = 1;
    hp.max_depth = 1;
    auto t = catrl::grow(all_rows(8), x, m, hp);
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].arm == 1);
    hp.max_depth = 3;
    hp.lambda = std::numeric_limits<double>::infinity();
    CHECK(catrl::grow(all_rows(8), x, m, hp).nodes.size() == 1);
    hp.lambda = 0.0;
    t = catrl::grow(all_rows(8), x, m, hp);
    CHECK(t.depth() == 2);
    CHECK(t.leaf_count() == 2);
    CHECK(t.predict(std::vector<double>{1.0}) == 0);
    CHECK(t.predict(std::vector<double>{6.0}) == 1);
    CHECK(catrl::default_lambda(m) == doctest::Approx(0.01 * 1.0));
    CHECK_THROWS_AS(catrl::grow({}, x, m, hp), catrl::ConfigError);
  }

  TEST_CASE("two separable regions give a depth-2 tree") {
    // Arm 1 wins for x0 > 0.5, arm 0 elsewhere.
    catrl::RngStream r(5);
    const std::size_t n = 400;
    FeatureMatrix x(n, 3);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < 3; ++f) x(i, f) = r.uniform();
      const bool right = x(i, 0) > 0.5;
      rows.push_back({(right ? 2.0 : 6.0) + r.normal(), (right ? 6.0 : 2.0) + r.normal()});
    }
    const auto m = matrix(2, rows);
    TreeHyperparams hp;
    hp.n0 = 20;
    hp.max_depth = 2;
    const auto t = catrl::grow(all_rows(n), x, m, hp);
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == doctest::Approx(0.5).epsilon(0.05));
    CHECK(t.predict(std::vector<double>{0.2, 0.5, 0.5}) == 0);
    CHECK(t.predict(std::vector<double>{0.8, 0.5, 0.5}) == 1);
  }

  TEST_CASE("constant shift keeps the tree") {
    catrl::RngStream r(6);
    const std::size_t n = 120;
    FeatureMatrix x(n, 2);
    std::vector<std::vector<double>> rows, shifted;
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = r.uniform();
      x(i, 1) = r.uniform();
      const double b = x(i, 0) < 0.4 ? 3.0 : -1.0;
      rows.push_back({r.normal(), b + r.normal(), r.normal()});
      shifted.push_back({rows.back()[0] + 7.0, rows.back()[1] + 7.0, rows.back()[2] + 7.0});
    }
    TreeHyperparams hp;
    hp.n0 = 10;
    hp.lambda = 0.05;
    const auto a = catrl::grow(all_rows(n), x, matrix(3, rows), hp);
    const auto b = catrl::grow(all_rows(n), x, matrix(3, shifted), hp);
    REQUIRE(a.nodes.size() == b.nodes.size());
    for (std::size_t j = 0; j < a.nodes.size(); ++j) {
      CHECK(a.nodes[j].feature == b.nodes[j].feature);
      CHECK(a.nodes[j].threshold == b.nodes[j].threshold);
      CHECK(a.nodes[j].arm == b.nodes[j].arm);
      CHECK(b.nodes[j].value == doctest::Approx(a.nodes[j].value + 7.0));
    }
  }

  TEST_CASE("routing") {
    catrl::PolicyTree leaf;
    leaf.nodes = {catrl::PolicyNode{.arm = 2}};
    CHECK(leaf.predict(std::vector<double>{123.0}) == 2);

    catrl::PolicyTree t;
    t.nodes = {catrl::PolicyNode{.feature = 0, .threshold = 1.5, .left = 1, .right = 2},
               catrl::PolicyNode{.arm = 0, .depth = 2}, catrl::PolicyNode{.arm = 1, .depth = 2}};
    CHECK(t.predict(std::vector<double>{2.0}) == 1);
    CHECK(t.predict(std::vector<double>{1.5}) == 0);
    CHECK(catrl::render_rules(t, {"Cr"}) ==
          "if Cr <= 1.5:\n  arm 0  (n=0, value=0)\nelse:\n  arm 1  (n=0, value=0)\n");
  }

  TEST_CASE("serialization") {
    catrl::RngStream r(8);
    FeatureMatrix x(60, 2);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < 60; ++i) {
      x(i, 0) = r.uniform();
      x(i, 1) = r.uniform();
      rows.push_back({r.normal() + x(i, 1) * 4, r.normal()});
    }
    TreeHyperparams hp;
    hp.n0 = 5;
    const auto t = catrl::grow(all_rows(60), x, matrix(2, rows), hp);
    CHECK(catrl::deserialize_tree(catrl::serialize_tree(t)) == t);
    CHECK_THROWS_AS(catrl::deserialize_tree(R"({"version": 99, "nodes": [{"arm": 0}]})"), catrl::ConfigError);
    CHECK_THROWS_AS(catrl::deserialize_tree(R"({"version": 1, "nodes": [{"arm": 0})"), catrl::ConfigError);
    const auto leaf = catrl::deserialize_tree(R"({"version": 1, "nodes": [{"arm": 1}]})");
    CHECK(leaf.nodes.size() == 1);
    CHECK(leaf.predict(std::vector<double>{0.0}) == 1);
  }

  TEST_CASE("hyperparameter validation") {
    CHECK_THROWS_AS(TreeHyperparams{.n0 = 0}.validate(), catrl::ConfigError);
    CHECK_THROWS_AS(TreeHyperparams{.max_depth = 0}.validate(), catrl::ConfigError);
    CHECK_THROWS_AS(TreeHyperparams{.lambda = -1.0}.validate(), catrl::ConfigError);
  }
}
