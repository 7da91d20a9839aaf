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

#include "catrl/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "catrl/error.hpp"
#include "catrl/parallel.hpp"
#include "catrl/rng.hpp"

namespace catrl {

namespace {

std::size_t resolve_mtry(const ForestParams& params, std::size_t p) {
  if (params.mtry > 0) return std::min<std::size_t>(static_cast<std::size_t>(params.mtry), p);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))));
}

std::vector<std::size_t> draw_features(std::size_t p, std::size_t mtry, RngStream& rng) {
  std::vector<std::size_t> all(p);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < mtry; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(p - i));
    std::swap(all[i], all[j]);
  }
  all.resize(mtry);
  std::sort(all.begin(), all.end());
  return all;
}

std::vector<std::size_t> bootstrap(std::size_t n, RngStream& rng, std::vector<std::uint8_t>& inbag) {
  std::vector<std::size_t> sample(n);
  inbag.assign(n, 0);
  for (auto& s : sample) {
    s = static_cast<std::size_t>(rng.below(n));
    if (inbag[s] < 255) ++inbag[s];
  }
  std::sort(sample.begin(), sample.end());
  return sample;
}

std::vector<std::size_t> weighted_bootstrap(const std::vector<double>& cumulative, RngStream& rng,
                                            std::vector<std::uint8_t>& inbag) {
  const std::size_t n = cumulative.size();
  std::vector<std::size_t> sample(n);
  inbag.assign(n, 0);
  for (auto& s : sample) {
    const double u = rng.uniform() * cumulative.back();
    s = std::min(n - 1, static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                 cumulative.begin()));
    if (inbag[s] < 255) ++inbag[s];
  }
  std::sort(sample.begin(), sample.end());
  return sample;
}

std::vector<std::size_t> sorted_by_feature(const FeatureMatrix& x, const std::vector<std::size_t>& samples,
                                           std::size_t f) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x(samples[a], f) < x(samples[b], f); });
  return order;
}

// Mean of f(tree) over the trees that did not see `oob_row`.
template <typename Tree, typename F>
double ensemble_mean(const std::vector<Tree>& trees, const std::vector<std::vector<std::uint8_t>>& inbag,
                     std::optional<std::size_t> oob_row, F f) {
  double sum = 0.0;
  std::size_t used = 0;
  if (oob_row && inbag.size() == trees.size()) {
    for (std::size_t b = 0; b < trees.size(); ++b) {
      if (*oob_row < inbag[b].size() && inbag[b][*oob_row]) continue;
      sum += f(trees[b]);
      ++used;
    }
  }
  if (used == 0) {
    sum = 0.0;
    for (const auto& tree : trees) sum += f(tree);
    used = trees.size();
  }
  return sum / static_cast<double>(used);
}

int route(const std::vector<TreeNode>& nodes, std::span<const double> x) {
  int n = 0;
  while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(n)].leaf;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

class SurvivalTreeBuilder {
 public:
  SurvivalTreeBuilder(const FeatureMatrix& x, std::span<const double> times, std::span<const int> events,
                      const ForestParams& params, RngStream& rng)
      : x_(x), times_(times), events_(events), params_(params), rng_(rng), mtry_(resolve_mtry(params, x.cols())) {}

  SurvivalTree build(std::vector<std::size_t> samples) {
    grow(std::move(samples));
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> samples) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const SplitChoice split = find_split(samples);
    if (split.feature < 0) {
      make_leaf(id, samples);
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto s : samples) {
      (x_(s, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(std::move(left));
    const int r = grow(std::move(right));
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  void make_leaf(int id, const std::vector<std::size_t>& samples) {
    std::vector<double> t;
    std::vector<int> e;
    t.reserve(samples.size());
    e.reserve(samples.size());
    for (auto s : samples) {
      t.push_back(times_[s]);
      e.push_back(events_[s]);
    }
    tree_.nodes[static_cast<std::size_t>(id)].leaf = static_cast<int>(tree_.leaves.size());
    tree_.leaves.push_back(fit_nelson_aalen(t, e));
    tree_.leaf_sizes.push_back(static_cast<int>(samples.size()));
  }

  SplitChoice find_split(const std::vector<std::size_t>& samples) {
    const std::size_t n = samples.size();
    const auto leaf_min = static_cast<std::size_t>(params_.leaf_min);
    SplitChoice best;
    if (n < 2 * leaf_min) return best;

    std::vector<double> event_times;
    for (auto s : samples) {
      if (events_[s]) event_times.push_back(times_[s]);
    }
    if (event_times.empty()) return best;
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
    const std::size_t T = event_times.size();

    // u[i]: number of event times <= time of sample i; the sample is at risk
    // at event times j < u[i] and, if an event, dies at j = u[i] - 1.
    std::vector<std::size_t> u(n);
    std::vector<double> at_risk_hist(T + 1, 0.0);
    std::vector<double> deaths(T, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = samples[i];
      u[i] = static_cast<std::size_t>(std::upper_bound(event_times.begin(), event_times.end(), times_[s]) -
                                       event_times.begin());
      at_risk_hist[u[i]] += 1.0;
      if (events_[s]) deaths[u[i] - 1] += 1.0;
    }
    std::vector<double> at_risk(T);
    std::vector<double> var_weight(T);
    double acc = 0.0;
    for (std::size_t j = T; j-- > 0;) {
      acc += at_risk_hist[j + 1];
      at_risk[j] = acc;
      var_weight[j] = acc > 1.0 ? deaths[j] * (acc - deaths[j]) / (acc - 1.0) : 0.0;
    }

    const auto features = draw_features(x_.cols(), mtry_, rng_);
    std::vector<double> left_hist(T + 1);
    std::vector<double> left_deaths(T);
    std::vector<double> sorted_values(n);
    for (auto f : features) {
      const auto order = sorted_by_feature(x_, samples, f);
      for (std::size_t i = 0; i < n; ++i) sorted_values[i] = x_(samples[order[i]], f);
      const auto candidates = split_candidates(sorted_values, static_cast<std::size_t>(params_.split_candidates));
      std::fill(left_hist.begin(), left_hist.end(), 0.0);
      std::fill(left_deaths.begin(), left_deaths.end(), 0.0);
      std::size_t n_left = 0;
      std::size_t ptr = 0;
      for (double thr : candidates) {
        while (ptr < n && sorted_values[ptr] <= thr) {
          const std::size_t i = order[ptr];
          left_hist[u[i]] += 1.0;
          if (events_[samples[i]]) left_deaths[u[i] - 1] += 1.0;
          ++n_left;
          ++ptr;
        }
        if (n_left < leaf_min) continue;
        if (n - n_left < leaf_min) break;
        double num = 0.0;
        double var = 0.0;
        double y_left = 0.0;
        for (std::size_t j = T; j-- > 0;) {
          y_left += left_hist[j + 1];
          const double frac = y_left / at_risk[j];
          num += left_deaths[j] - frac * deaths[j];
          var += frac * (1.0 - frac) * var_weight[j];
        }
        if (var <= 0.0) continue;
        const double stat = std::abs(num) / std::sqrt(var);
        if (stat > best.score) {
          best.score = stat;
          best.feature = static_cast<int>(f);
          best.threshold = thr;
        }
      }
    }
    if (best.score <= 1e-12) best.feature = -1;
    return best;
  }

  const FeatureMatrix& x_;
  std::span<const double> times_;
  std::span<const int> events_;
  const ForestParams& params_;
  RngStream& rng_;
  std::size_t mtry_;
  SurvivalTree tree_;
};

class RegressionTreeBuilder {
 public:
  RegressionTreeBuilder(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params, RngStream& rng)
      : x_(x), y_(y), params_(params), rng_(rng), mtry_(resolve_mtry(params, x.cols())) {}

  RegressionTree build(std::vector<std::size_t> samples) {
    grow(std::move(samples));
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> samples) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const SplitChoice split = find_split(samples);
    if (split.feature < 0) {
      double sum = 0.0;
      for (auto s : samples) sum += y_[s];
      tree_.nodes[static_cast<std::size_t>(id)].leaf = static_cast<int>(tree_.leaf_values.size());
      tree_.leaf_values.push_back(sum / static_cast<double>(samples.size()));
      tree_.leaf_sizes.push_back(static_cast<int>(samples.size()));
      return id;
    }
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto s : samples) {
      (x_(s, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const int l = grow(std::move(left));
    const int r = grow(std::move(right));
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  SplitChoice find_split(const std::vector<std::size_t>& samples) {
    const std::size_t n = samples.size();
    const auto leaf_min = static_cast<std::size_t>(params_.leaf_min);
    SplitChoice best;
    if (n < 2 * leaf_min) return best;
    double total = 0.0;
    for (auto s : samples) total += y_[s];
    const double parent_term = total * total / static_cast<double>(n);

    const auto features = draw_features(x_.cols(), mtry_, rng_);
    std::vector<double> sorted_values(n);
    for (auto f : features) {
      const auto order = sorted_by_feature(x_, samples, f);
      for (std::size_t i = 0; i < n; ++i) sorted_values[i] = x_(samples[order[i]], f);
      const auto candidates = split_candidates(sorted_values, static_cast<std::size_t>(params_.split_candidates));
      double sum_left = 0.0;
      std::size_t n_left = 0;
      std::size_t ptr = 0;
      for (double thr : candidates) {
        while (ptr < n && sorted_values[ptr] <= thr) {
          sum_left += y_[samples[order[ptr]]];
          ++n_left;
          ++ptr;
        }
        if (n_left < leaf_min) continue;
        if (n - n_left < leaf_min) break;
        const double sum_right = total - sum_left;
        const double gain = sum_left * sum_left / static_cast<double>(n_left) +
                            sum_right * sum_right / static_cast<double>(n - n_left) - parent_term;
        if (gain > best.score) {
          best.score = gain;
          best.feature = static_cast<int>(f);
          best.threshold = thr;
        }
      }
    }
    if (best.score <= 1e-12 * std::max(1.0, std::abs(parent_term))) best.feature = -1;
    return best;
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  const ForestParams& params_;
  RngStream& rng_;
  std::size_t mtry_;
  RegressionTree tree_;
};

void check_training_input(const FeatureMatrix& x, std::size_t n, const ForestParams& params) {
  params.validate();
  if (x.rows() != n) throw ConfigError("forest: feature rows do not match outcomes");
  if (x.cols() == 0) throw ConfigError("forest: no features");
  if (n < 2 * static_cast<std::size_t>(params.leaf_min)) {
    throw FitError("forest: need at least 2*leaf_min = " + std::to_string(2 * params.leaf_min) + " subjects, got " +
                   std::to_string(n));
  }
}

}  // namespace

void FeatureMatrix::set_row(std::size_t i, std::span<const double> values) {
  if (values.size() != cols_) throw ConfigError("feature row length mismatch");
  std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
}

void FeatureMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw ConfigError("feature row length mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

std::vector<double> split_candidates(std::span<const double> sorted_values, std::size_t max_candidates) {
  std::vector<double> out;
  const std::size_t n = sorted_values.size();
  if (n < 2 || max_candidates == 0) return out;
  std::size_t distinct_boundaries = 0;
  for (std::size_t i = 1; i < n; ++i) distinct_boundaries += sorted_values[i] != sorted_values[i - 1] ? 1 : 0;
  if (distinct_boundaries <= max_candidates) {
    for (std::size_t i = 1; i < n; ++i) {
      if (sorted_values[i] != sorted_values[i - 1]) out.push_back(0.5 * (sorted_values[i - 1] + sorted_values[i]));
    }
    return out;
  }
  for (std::size_t q = 1; q <= max_candidates; ++q) {
    // Position of the q-th quantile, then the boundary to the next distinct value.
    std::size_t pos = q * n / (max_candidates + 1);
    pos = std::min(std::max<std::size_t>(pos, 1), n - 1) - 1;
    const double v = sorted_values[pos];
    const auto next = std::upper_bound(sorted_values.begin() + static_cast<std::ptrdiff_t>(pos), sorted_values.end(), v);
    if (next == sorted_values.end()) continue;
    const double thr = 0.5 * (v + *next);
    if (out.empty() || thr > out.back()) out.push_back(thr);
  }
  return out;
}

void ForestParams::validate() const {
  if (n_trees < 1) throw ConfigError("forest.n_trees must be >= 1");
  if (leaf_min < 1) throw ConfigError("forest.leaf_min must be >= 1");
  if (mtry < 0) throw ConfigError("forest.mtry must be >= 0");
  if (split_candidates < 1) throw ConfigError("forest.split_candidates must be >= 1");
}

const CumulativeHazard& SurvivalTree::leaf_for(std::span<const double> x) const {
  return leaves[static_cast<std::size_t>(route(nodes, x))];
}

SurvivalForest SurvivalForest::fit(const FeatureMatrix& x, std::span<const double> times, std::span<const int> events,
                                   const ForestParams& params) {
  if (times.size() != events.size()) throw ConfigError("forest: times and events differ in length");
  check_training_input(x, times.size(), params);
  SurvivalForest forest;
  forest.n_features_ = x.cols();
  forest.params_ = params;
  const auto n_trees = static_cast<std::size_t>(params.n_trees);
  forest.trees_.resize(n_trees);
  forest.inbag_.resize(n_trees);
  parallel_for(n_trees, [&](std::size_t b) {
    RngStream rng(params.seed, b, StreamTag::kForest);
    auto sample = bootstrap(times.size(), rng, forest.inbag_[b]);
    forest.trees_[b] = SurvivalTreeBuilder(x, times, events, params, rng).build(std::move(sample));
  });
  return forest;
}

SurvivalForest SurvivalForest::from_parts(std::size_t n_features, ForestParams params, std::vector<SurvivalTree> trees) {
  SurvivalForest forest;
  forest.n_features_ = n_features;
  forest.params_ = params;
  forest.trees_ = std::move(trees);
  return forest;
}

double SurvivalForest::survival(std::span<const double> x, double t, std::optional<std::size_t> oob_row) const {
  if (t <= 0.0) return 1.0;
  return ensemble_mean(trees_, inbag_, oob_row,
                       [&](const SurvivalTree& tree) { return std::exp(-tree.leaf_for(x).at(t)); });
}

double SurvivalForest::restricted_mean(std::span<const double> x, double tau,
                                       std::optional<std::size_t> oob_row) const {
  if (tau <= 0.0) return 0.0;
  return ensemble_mean(trees_, inbag_, oob_row,
                       [&](const SurvivalTree& tree) { return tree.leaf_for(x).restricted_mean(tau); });
}

double SurvivalForest::oob_concordance(const FeatureMatrix& x, std::span<const double> times,
                                       std::span<const int> events) const {
  if (inbag_.size() != trees_.size()) throw ConfigError("oob_concordance needs a freshly fitted forest");
  const double horizon = *std::max_element(times.begin(), times.end());
  std::vector<double> t;
  std::vector<int> e;
  std::vector<double> score;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t b = 0; b < trees_.size(); ++b) {
      if (inbag_[b][i]) continue;
      sum += trees_[b].leaf_for(x.row(i)).restricted_mean(horizon);
      ++count;
    }
    if (count == 0) continue;
    t.push_back(times[i]);
    e.push_back(events[i]);
    score.push_back(sum / count);
  }
  return concordance_index(t, e, score);
}

double RegressionTree::predict(std::span<const double> x) const {
  return leaf_values[static_cast<std::size_t>(route(nodes, x))];
}

RegressionForest RegressionForest::fit(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params,
                                       std::span<const double> weights) {
  check_training_input(x, y.size(), params);
  std::vector<double> cumulative;
  if (!weights.empty()) {
    if (weights.size() != y.size()) throw ConfigError("regression forest: weights length differs from y");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("regression forest: weights must be finite and >= 0");
      total += w;
      cumulative.push_back(total);
    }
    if (!(total > 0.0)) throw ConfigError("regression forest: all weights are zero");
  }
  RegressionForest forest;
  forest.n_features_ = x.cols();
  forest.params_ = params;
  const auto n_trees = static_cast<std::size_t>(params.n_trees);
  forest.trees_.resize(n_trees);
  forest.inbag_.resize(n_trees);
  parallel_for(n_trees, [&](std::size_t b) {
    RngStream rng(params.seed, b, StreamTag::kForest);
    auto& inbag = forest.inbag_[b];
    auto sample = cumulative.empty() ? bootstrap(y.size(), rng, inbag) : weighted_bootstrap(cumulative, rng, inbag);
    forest.trees_[b] = RegressionTreeBuilder(x, y, params, rng).build(std::move(sample));
  });
  return forest;
}

RegressionForest RegressionForest::from_parts(std::size_t n_features, ForestParams params,
                                              std::vector<RegressionTree> trees) {
  RegressionForest forest;
  forest.n_features_ = n_features;
  forest.params_ = params;
  forest.trees_ = std::move(trees);
  return forest;
}

double RegressionForest::predict(std::span<const double> x, std::optional<std::size_t> oob_row) const {
  return ensemble_mean(trees_, inbag_, oob_row, [&](const RegressionTree& tree) { return tree.predict(x); });
}

}  // namespace catrl
