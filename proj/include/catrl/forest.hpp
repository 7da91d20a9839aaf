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

#ifndef CATRL_FOREST_HPP_
#define CATRL_FOREST_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "catrl/survival.hpp"

namespace catrl {

// Dense row-major feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  void set_row(std::size_t i, std::span<const double> values);
  void append_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Split thresholds for sorted values: midpoints between consecutive distinct
// values when there are at most max_candidates of them, otherwise midpoints
// after the empirical quantiles q/(max_candidates+1), q = 1..max_candidates.
// Routing convention everywhere: x <= threshold goes left.
std::vector<double> split_candidates(std::span<const double> sorted_values, std::size_t max_candidates);

struct ForestParams {
  int n_trees = 200;
  int leaf_min = 15;
  int mtry = 0;  // 0: ceil(sqrt(p))
  int split_candidates = 32;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;  // index into the tree's leaf table
};

struct SurvivalTree {
  std::vector<TreeNode> nodes;
  std::vector<CumulativeHazard> leaves;
  std::vector<int> leaf_sizes;

  const CumulativeHazard& leaf_for(std::span<const double> x) const;
};

// Random survival forest: bootstrap samples, log-rank splits over a random
// subset of features, Nelson-Aalen cumulative hazard in each leaf. Every leaf
// holds at least leaf_min (bootstrap) observations.
class SurvivalForest {
 public:
  SurvivalForest() = default;
  static SurvivalForest fit(const FeatureMatrix& x, std::span<const double> times, std::span<const int> events,
                            const ForestParams& params);

  // Ensemble average of exp(-H_b(t)); 1 for t <= 0. With `oob_row`, only
  // trees whose bootstrap sample left out that training row are averaged
  // (all trees if there are none, or after deserialization).
  double survival(std::span<const double> x, double t, std::optional<std::size_t> oob_row = std::nullopt) const;
  // Integral of the ensemble survival curve over [0, tau].
  double restricted_mean(std::span<const double> x, double tau,
                         std::optional<std::size_t> oob_row = std::nullopt) const;
  // Out-of-bag Harrell concordance on the training data, scoring each subject
  // by its OOB restricted mean up to the largest training time.
  double oob_concordance(const FeatureMatrix& x, std::span<const double> times, std::span<const int> events) const;

  std::size_t n_features() const { return n_features_; }
  const std::vector<SurvivalTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }

  // Reassembles a forest from serialized parts.
  static SurvivalForest from_parts(std::size_t n_features, ForestParams params, std::vector<SurvivalTree> trees);

 private:
  std::size_t n_features_ = 0;
  ForestParams params_;
  std::vector<SurvivalTree> trees_;
  std::vector<std::vector<std::uint8_t>> inbag_;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::vector<double> leaf_values;
  std::vector<int> leaf_sizes;

  double predict(std::span<const double> x) const;
};

// Random regression forest: bootstrap samples, variance-reduction splits,
// mean-valued leaves.
class RegressionForest {
 public:
  RegressionForest() = default;
  // With `weights`, row i enters each bootstrap sample with probability
  // proportional to weights[i].
  static RegressionForest fit(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params,
                              std::span<const double> weights = {});

  // `oob_row` as for SurvivalForest::survival.
  double predict(std::span<const double> x, std::optional<std::size_t> oob_row = std::nullopt) const;

  std::size_t n_features() const { return n_features_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  static RegressionForest from_parts(std::size_t n_features, ForestParams params, std::vector<RegressionTree> trees);

 private:
  std::size_t n_features_ = 0;
  ForestParams params_;
  std::vector<RegressionTree> trees_;
  std::vector<std::vector<std::uint8_t>> inbag_;
};

}  // namespace catrl

#endif  // CATRL_FOREST_HPP_
