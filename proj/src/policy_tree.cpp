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

#include "catrl/policy_tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "catrl/error.hpp"
#include "catrl/parallel.hpp"
#include "json_io.hpp"

namespace catrl {

void TreeHyperparams::validate() const {
  if (n0 < 1) throw ConfigError("tree.n0 must be >= 1");
  if (lambda && !(*lambda >= 0.0)) throw ConfigError("tree.lambda must be >= 0");
  if (max_depth < 1) throw ConfigError("tree.max_depth must be >= 1");
  if (threshold_grid < 1) throw ConfigError("tree.threshold_grid must be >= 1");
}

int PolicyTree::predict(std::span<const double> h) const {
  if (nodes.empty()) throw ConfigError("policy tree is empty");
  int idx = 0;
  while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(idx)];
    if (static_cast<std::size_t>(node.feature) >= h.size()) {
      throw ConfigError("policy tree: feature index " + std::to_string(node.feature) + " out of range");
    }
    idx = h[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(idx)].arm;
}

int PolicyTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

std::size_t PolicyTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const PolicyNode& n) {
    return n.feature < 0;
  }));
}

namespace {

// Column sums in the order of `rows`. best_split and purity_improvement both go
// through here so their improvements agree bit for bit.
void column_sums(std::span<const std::size_t> rows, const CaipwMatrix& caipw, std::vector<double>& sums) {
  sums.assign(static_cast<std::size_t>(caipw.arity), 0.0);
  for (auto r : rows) {
    for (int a = 0; a < caipw.arity; ++a) sums[static_cast<std::size_t>(a)] += caipw.at(r, a);
  }
}

NodeValue value_from_sums(const std::vector<double>& sums, std::size_t count) {
  NodeValue best{sums[0] / static_cast<double>(count), 0};
  for (std::size_t a = 1; a < sums.size(); ++a) {
    const double v = sums[a] / static_cast<double>(count);
    if (v > best.value) best = {v, static_cast<int>(a)};
  }
  return best;
}

double combine(std::size_t n_left, double v_left, std::size_t n_right, double v_right, std::size_t n_parent,
               double v_parent) {
  return (static_cast<double>(n_left) * v_left + static_cast<double>(n_right) * v_right) /
             static_cast<double>(n_parent) -
         v_parent;
}

}  // namespace

NodeValue node_value(std::span<const std::size_t> rows, const CaipwMatrix& caipw) {
  if (rows.empty()) throw ConfigError("node_value: empty node");
  std::vector<double> sums;
  column_sums(rows, caipw, sums);
  return value_from_sums(sums, rows.size());
}

double purity_improvement(std::span<const std::size_t> parent, std::span<const std::size_t> left,
                          std::span<const std::size_t> right, const CaipwMatrix& caipw) {
  if (left.empty() || right.empty()) throw ConfigError("purity_improvement: empty child");
  if (left.size() + right.size() != parent.size()) throw ConfigError("purity_improvement: children do not partition parent");
  std::vector<std::size_t> a(parent.begin(), parent.end());
  std::vector<std::size_t> b(left.begin(), left.end());
  b.insert(b.end(), right.begin(), right.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b || std::adjacent_find(a.begin(), a.end()) != a.end()) {
    throw ConfigError("purity_improvement: children do not partition parent");
  }
  const NodeValue p = node_value(parent, caipw);
  const NodeValue l = node_value(left, caipw);
  const NodeValue r = node_value(right, caipw);
  return combine(left.size(), l.value, right.size(), r.value, parent.size(), p.value);
}

std::optional<Split> best_split(std::span<const std::size_t> rows, const FeatureMatrix& features,
                                const CaipwMatrix& caipw, const TreeHyperparams& hp, double lambda) {
  const std::size_t n = rows.size();
  const auto n0 = static_cast<std::size_t>(hp.n0);
  if (n < 2 * n0 || n == 0) return std::nullopt;
  const double parent = node_value(rows, caipw).value;
  const std::size_t p = features.cols();

  std::vector<std::optional<Split>> per_feature(p);
  parallel_for(p, [&](std::size_t f) {
    std::vector<double> values;
    values.reserve(n);
    for (auto r : rows) values.push_back(features(r, f));
    std::sort(values.begin(), values.end());
    const auto candidates = split_candidates(values, static_cast<std::size_t>(hp.threshold_grid));
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    std::vector<double> sums;
    std::optional<Split> best;
    for (double thr : candidates) {
      left.clear();
      right.clear();
      for (auto r : rows) (features(r, f) <= thr ? left : right).push_back(r);
      if (left.size() < n0 || right.size() < n0) continue;
      column_sums(left, caipw, sums);
      const double vl = value_from_sums(sums, left.size()).value;
      column_sums(right, caipw, sums);
      const double vr = value_from_sums(sums, right.size()).value;
      const double imp = combine(left.size(), vl, right.size(), vr, n, parent);
      if (!best || imp > best->improvement) best = Split{f, thr, imp};
    }
    per_feature[f] = best;
  });

  std::optional<Split> best;
  for (const auto& s : per_feature) {
    if (s && (!best || s->improvement > best->improvement)) best = s;
  }
  if (!best || !(best->improvement > lambda)) return std::nullopt;
  return best;
}

double default_lambda(const CaipwMatrix& caipw) {
  const auto means = caipw.column_means();
  if (means.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  return 0.01 * (*hi - *lo);
}

namespace {

void grow_node(PolicyTree& tree, int idx, std::vector<std::size_t> rows, const FeatureMatrix& features,
               const CaipwMatrix& caipw, const TreeHyperparams& hp) {
  const NodeValue v = node_value(rows, caipw);
  {
    auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.arm = v.arm;
    node.value = v.value;
    node.count = rows.size();
  }
  const int depth = tree.nodes[static_cast<std::size_t>(idx)].depth;
  if (depth >= hp.max_depth) return;
  const auto split = best_split(rows, features, caipw, hp, tree.lambda);
  if (!split) return;

  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
  for (auto r : rows) (features(r, split->feature) <= split->threshold ? left : right).push_back(r);
  rows.clear();
  rows.shrink_to_fit();

  const int li = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(PolicyNode{.depth = depth + 1});
  const int ri = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(PolicyNode{.depth = depth + 1});
  auto& node = tree.nodes[static_cast<std::size_t>(idx)];
  node.feature = static_cast<int>(split->feature);
  node.threshold = split->threshold;
  node.improvement = split->improvement;
  node.left = li;
  node.right = ri;
  grow_node(tree, li, std::move(left), features, caipw, hp);
  grow_node(tree, ri, std::move(right), features, caipw, hp);
}

void render_node(const PolicyTree& tree, int idx, int indent, const std::vector<std::string>& names,
                 std::ostringstream& out) {
  const auto& node = tree.nodes[static_cast<std::size_t>(idx)];
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (node.feature < 0) {
    out << pad << "arm " << node.arm << "  (n=" << node.count << ", value=" << format_double(node.value) << ")\n";
    return;
  }
  const auto f = static_cast<std::size_t>(node.feature);
  const std::string name = f < names.size() ? names[f] : "h[" + std::to_string(f) + "]";
  out << pad << "if " << name << " <= " << format_double(node.threshold) << ":\n";
  render_node(tree, node.left, indent + 1, names, out);
  out << pad << "else:\n";
  render_node(tree, node.right, indent + 1, names, out);
}

}  // namespace

PolicyTree grow(std::span<const std::size_t> rows, const FeatureMatrix& features, const CaipwMatrix& caipw,
                const TreeHyperparams& hp) {
  hp.validate();
  if (rows.empty()) throw ConfigError("grow: empty root");
  if (features.rows() != caipw.rows()) throw ConfigError("grow: feature rows do not match the matrix");
  PolicyTree tree;
  tree.hyperparams = hp;
  tree.lambda = hp.lambda ? *hp.lambda : default_lambda(caipw);
  tree.nodes.push_back(PolicyNode{.depth = 1});
  grow_node(tree, 0, std::vector<std::size_t>(rows.begin(), rows.end()), features, caipw, hp);
  return tree;
}

std::string render_rules(const PolicyTree& tree, const std::vector<std::string>& feature_names) {
  std::ostringstream out;
  if (!tree.nodes.empty()) render_node(tree, 0, 0, feature_names, out);
  return out.str();
}

std::string serialize_tree(const PolicyTree& tree) {
  nlohmann::json doc = tree;
  return doc.dump(2);
}

PolicyTree deserialize_tree(const std::string& doc) {
  try {
    return nlohmann::json::parse(doc).get<PolicyTree>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed policy tree document: ") + e.what());
  }
}

}  // namespace catrl
