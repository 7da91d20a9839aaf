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

#ifndef CATRL_PROPENSITY_HPP_
#define CATRL_PROPENSITY_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "catrl/forest.hpp"

namespace catrl {

struct PropensityClip {
  double lo = 0.01;
  double hi = 0.99;
};

// Multinomial logistic regression with reference arm 0. Coefficients are
// stored on the original feature scale: row a-1 holds [intercept, slopes...]
// for arm a over the selected history features.
class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(int arity, std::vector<std::size_t> features, std::vector<std::vector<double>> coefficients);

  // Maximizes the ridge-penalized mean log-likelihood by Newton's method until
  // the gradient norm is below 1e-6. Slopes are penalized on the standardized
  // scale; the intercept is not penalized. Throws FitError when an arm is
  // never observed.
  static PropensityModel fit(const FeatureMatrix& history, std::span<const int> arms, int arity,
                             std::vector<std::size_t> features, double ridge);

  std::vector<double> predict_raw(std::span<const double> h) const;
  // Softmax clipped to [clip.lo, clip.hi] then renormalized.
  std::vector<double> predict(std::span<const double> h, PropensityClip clip = {}) const;

  int arity() const { return arity_; }
  const std::vector<std::size_t>& features() const { return features_; }
  const std::vector<std::vector<double>>& coefficients() const { return coefficients_; }
  double gradient_norm() const { return gradient_norm_; }
  int iterations() const { return iterations_; }
  double log_likelihood() const { return log_likelihood_; }

 private:
  int arity_ = 2;
  std::vector<std::size_t> features_;
  std::vector<std::vector<double>> coefficients_;
  double gradient_norm_ = 0.0;
  int iterations_ = 0;
  double log_likelihood_ = 0.0;
};

}  // namespace catrl

#endif  // CATRL_PROPENSITY_HPP_
