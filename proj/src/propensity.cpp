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

#include "catrl/propensity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "catrl/error.hpp"

namespace catrl {

namespace {

// Softmax over [0, logits...] in place; returns log of the normalizer.
double softmax_reference(std::vector<double>& p) {
  double max_logit = 0.0;
  for (std::size_t a = 1; a < p.size(); ++a) max_logit = std::max(max_logit, p[a]);
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - max_logit);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return max_logit + std::log(sum);
}

}  // namespace

PropensityModel::PropensityModel(int arity, std::vector<std::size_t> features,
                                 std::vector<std::vector<double>> coefficients)
    : arity_(arity), features_(std::move(features)), coefficients_(std::move(coefficients)) {
  if (arity_ < 2) throw ConfigError("propensity arity must be >= 2");
  if (coefficients_.size() != static_cast<std::size_t>(arity_ - 1)) {
    throw ConfigError("propensity: need arity-1 coefficient rows");
  }
  for (const auto& row : coefficients_) {
    if (row.size() != features_.size() + 1) throw ConfigError("propensity: coefficient row length mismatch");
  }
}

PropensityModel PropensityModel::fit(const FeatureMatrix& history, std::span<const int> arms, int arity,
                                     std::vector<std::size_t> features, double ridge) {
  const std::size_t n = history.rows();
  if (arms.size() != n) throw ConfigError("propensity: arms and history differ in length");
  if (arity < 2) throw ConfigError("propensity arity must be >= 2");
  if (ridge < 0) throw ConfigError("propensity ridge must be >= 0");
  for (auto f : features) {
    if (f >= history.cols()) throw ConfigError("propensity feature index out of range");
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(arity), 0);
  for (int a : arms) {
    if (a < 0 || a >= arity) throw ConfigError("propensity: treatment out of range");
    ++counts[static_cast<std::size_t>(a)];
  }
  for (int a = 0; a < arity; ++a) {
    if (counts[static_cast<std::size_t>(a)] == 0) {
      throw FitError("positivity violated in sample: arm " + std::to_string(a) + " never observed");
    }
  }

  // Standardized design with intercept column.
  const std::size_t q = features.size() + 1;
  std::vector<double> mean(features.size(), 0.0);
  std::vector<double> scale(features.size(), 1.0);
  for (std::size_t j = 0; j < features.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += history(i, features[j]);
    mean[j] = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += std::pow(history(i, features[j]) - mean[j], 2);
    const double sd = std::sqrt(v / static_cast<double>(n));
    scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  Eigen::MatrixXd z(n, q);
  for (std::size_t i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    for (std::size_t j = 0; j < features.size(); ++j) z(i, j + 1) = (history(i, features[j]) - mean[j]) / scale[j];
  }

  const std::size_t m = static_cast<std::size_t>(arity - 1);
  const std::size_t dim = m * q;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](const Eigen::VectorXd& b, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    double nll = 0.0;
    if (grad) grad->setZero(static_cast<Eigen::Index>(dim));
    if (hess) hess->setZero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    std::vector<double> p(m + 1);
    for (std::size_t i = 0; i < n; ++i) {
      p[0] = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        p[a + 1] = z.row(static_cast<Eigen::Index>(i)).dot(b.segment(static_cast<Eigen::Index>(a * q), static_cast<Eigen::Index>(q)));
      }
      const double obs_logit = p[static_cast<std::size_t>(arms[i])];
      const double log_norm = softmax_reference(p);
      nll -= obs_logit - log_norm;
      if (!grad) continue;
      const auto zi = z.row(static_cast<Eigen::Index>(i)).transpose();
      for (std::size_t a = 0; a < m; ++a) {
        const double resid = p[a + 1] - (arms[i] == static_cast<int>(a + 1) ? 1.0 : 0.0);
        grad->segment(static_cast<Eigen::Index>(a * q), static_cast<Eigen::Index>(q)) += resid * zi;
        if (!hess) continue;
        for (std::size_t c = 0; c < m; ++c) {
          const double w = p[a + 1] * ((a == c ? 1.0 : 0.0) - p[c + 1]);
          hess->block(static_cast<Eigen::Index>(a * q), static_cast<Eigen::Index>(c * q), static_cast<Eigen::Index>(q),
                      static_cast<Eigen::Index>(q)) += w * zi * zi.transpose();
        }
      }
    }
    nll *= inv_n;
    double penalty = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t j = 1; j < q; ++j) {
        const auto idx = static_cast<Eigen::Index>(a * q + j);
        penalty += b(idx) * b(idx);
        if (grad) (*grad)(idx) = (*grad)(idx) * inv_n + ridge * b(idx);
      }
      if (grad) {
        const auto idx = static_cast<Eigen::Index>(a * q);
        (*grad)(idx) *= inv_n;
      }
    }
    if (hess) {
      *hess *= inv_n;
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t j = 1; j < q; ++j) (*hess)(static_cast<Eigen::Index>(a * q + j), static_cast<Eigen::Index>(a * q + j)) += ridge;
      }
    }
    return nll + 0.5 * ridge * penalty;
  };

  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double f = objective(beta, &grad, &hess);
  int iter = 0;
  constexpr int kMaxIter = 200;
  for (; iter < kMaxIter && grad.norm() >= 1e-6; ++iter) {
    // Tiny diagonal jitter keeps the solve defined when a column is constant.
    Eigen::MatrixXd h = hess;
    h.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = h.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd candidate;
    double f_new = f;
    for (int ls = 0; ls < 60; ++ls) {
      candidate = beta - t * step;
      f_new = objective(candidate, nullptr, nullptr);
      if (f_new <= f - 1e-4 * t * grad.dot(step) || f_new <= f) break;
      t *= 0.5;
    }
    if (!(f_new <= f)) break;
    beta = candidate;
    f = objective(beta, &grad, &hess);
  }

  std::vector<std::vector<double>> coefs(m, std::vector<double>(q, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    double intercept = beta(static_cast<Eigen::Index>(a * q));
    for (std::size_t j = 0; j < features.size(); ++j) {
      const double slope = beta(static_cast<Eigen::Index>(a * q + j + 1)) / scale[j];
      coefs[a][j + 1] = slope;
      intercept -= slope * mean[j];
    }
    coefs[a][0] = intercept;
  }
  PropensityModel model(arity, std::move(features), std::move(coefs));
  model.gradient_norm_ = grad.norm();
  model.iterations_ = iter;
  model.log_likelihood_ = -f * static_cast<double>(n);
  return model;
}

std::vector<double> PropensityModel::predict_raw(std::span<const double> h) const {
  std::vector<double> p(static_cast<std::size_t>(arity_), 0.0);
  for (std::size_t a = 0; a + 1 < p.size(); ++a) {
    const auto& row = coefficients_[a];
    double l = row[0];
    for (std::size_t j = 0; j < features_.size(); ++j) {
      if (features_[j] >= h.size()) throw ConfigError("propensity: history shorter than model features");
      l += row[j + 1] * h[features_[j]];
    }
    p[a + 1] = l;
  }
  softmax_reference(p);
  return p;
}

std::vector<double> PropensityModel::predict(std::span<const double> h, PropensityClip clip) const {
  auto p = predict_raw(h);
  double sum = 0.0;
  for (double& v : p) {
    v = std::clamp(v, clip.lo, clip.hi);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace catrl
