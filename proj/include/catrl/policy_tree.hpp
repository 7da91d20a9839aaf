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

#ifndef CATRL_POLICY_TREE_HPP_
#define CATRL_POLICY_TREE_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catrl/caipw.hpp"
#include "catrl/forest.hpp"

namespace catrl {

struct TreeHyperparams {
  int n0 = 20;                  // minimum child size
  std::optional<double> lambda;  // minimum purity improvement; nullopt: 0.01 * range of root column means
  int max_depth = 3;             // levels, so 1 is a single leaf
  int threshold_grid = 64;       // candidate thresholds per feature per node

  void validate() const;
  bool operator==(const TreeHyperparams&) const = default;
};

struct PolicyNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int arm = 0;         // best single arm of the node
  double value = 0.0;  // node value on the training matrix
  std::size_t count = 0;
  double improvement = 0.0;  // of the chosen split; 0 at leaves
  int depth = 1;
  bool operator==(const PolicyNode&) const = default;
};

// Routing: h[feature] <= threshold goes left. Node 0 is the root.
class PolicyTree {
 public:
  std::vector<PolicyNode> nodes;
  double lambda = 0.0;  // resolved threshold used while growing
  TreeHyperparams hyperparams;

  int predict(std::span<const double> h) const;
  int depth() const;
  std::size_t leaf_count() const;
  bool operator==(const PolicyTree&) const = default;
};

struct NodeValue {
  double value = 0.0;
  int arm = 0;
};

// Max over arms of the mean matrix entry over `rows`; ties go to the lowest arm.
NodeValue node_value(std::span<const std::size_t> rows, const CaipwMatrix& caipw);

// (|L| v(L) + |R| v(R)) / |P| - v(P). Throws ConfigError unless left and right
// partition parent and are both non-empty.
double purity_improvement(std::span<const std::size_t> parent, std::span<const std::size_t> left,
                          std::span<const std::size_t> right, const CaipwMatrix& caipw);

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double improvement = 0.0;
};

// Best split of the node over every feature column; none when the node has
// fewer than 2 n0 rows, no candidate leaves both children with n0 rows, or
// the best improvement is <= lambda. Ties go to the lower feature, then the
// lower threshold. `features` rows align with caipw rows.
std::optional<Split> best_split(std::span<const std::size_t> rows, const FeatureMatrix& features,
                                const CaipwMatrix& caipw, const TreeHyperparams& hp, double lambda);

double default_lambda(const CaipwMatrix& caipw);

PolicyTree grow(std::span<const std::size_t> rows, const FeatureMatrix& features, const CaipwMatrix& caipw,
                const TreeHyperparams& hp);

std::string render_rules(const PolicyTree& tree, const std::vector<std::string>& feature_names);

inline constexpr int kPolicyTreeFormatVersion = 1;
std::string serialize_tree(const PolicyTree& tree);
// Throws ConfigError on malformed documents or a version mismatch.
PolicyTree deserialize_tree(const std::string& doc);

}  // namespace catrl

#endif  // CATRL_POLICY_TREE_HPP_
