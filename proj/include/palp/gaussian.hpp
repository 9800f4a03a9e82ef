// Copyright 2026 The PALP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PALP_GAUSSIAN_HPP_
#define PALP_GAUSSIAN_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/embedding.hpp"
#include "palp/error.hpp"

namespace palp
{

using Matrix = Eigen::MatrixXd;

struct ShrinkageResult
{
  double lambda = 1.0;
  Matrix sigma_shrunk;
  double target_scale = 0.0;  ///< tr(S) / n
};

/// Ledoit-Wolf shrinkage of the second-moment matrix of already-centered
/// rows towards a scaled identity.
///
///   S    = X^T X / m
///   mu   = tr(S) / n
///   d2   = ||S - mu I||_F^2 / n
///   b2   = min( sum_k ||x_k x_k^T - S||_F^2 / (m^2 n), d2 )
///   lambda = b2 / d2          (1 when d2 == 0)
///   sigma  = (1 - lambda) S + lambda mu I
///
/// A single row carries no information about estimation error, so m == 1
/// takes the full-shrinkage cap lambda = 1. With m <= n the sample matrix
/// is singular, and when every x_k x_k^T equals S (two centered rows, say)
/// the formula gives lambda = 0; lambda is then raised to
/// kMinDegenerateShrinkage so the result stays positive definite.
inline constexpr double kMinDegenerateShrinkage = 1e-6;

inline ShrinkageResult ledoit_wolf(const Matrix & centered)
{
  const auto m = centered.rows();
  const auto n = centered.cols();
  if (n == 0) {
    throw user_error("ledoit_wolf: zero-dimensional data");
  }
  if (m == 0) {
    throw user_error("ledoit_wolf: no samples");
  }
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);

  const Matrix s = (centered.transpose() * centered) / md;
  ShrinkageResult out;
  out.target_scale = s.trace() / nd;

  Matrix target_gap = s;
  target_gap.diagonal().array() -= out.target_scale;
  const double d2 = target_gap.squaredNorm() / nd;

  if (m == 1 || d2 <= 0.0) {
    out.lambda = 1.0;
  } else {
    // sum_k ||x_k x_k^T - S||^2 = sum_k ||x_k||^4 - m ||S||^2
    const double fourth = centered.rowwise().squaredNorm().array().square().sum();
    const double b2_raw = std::max(0.0, (fourth - md * s.squaredNorm()) / (md * md * nd));
    out.lambda = std::min(b2_raw, d2) / d2;
    if (m <= n) {
      out.lambda = std::max(out.lambda, kMinDegenerateShrinkage);
    }
  }

  out.sigma_shrunk = (1.0 - out.lambda) * s;
  out.sigma_shrunk.diagonal().array() += out.lambda * out.target_scale;
  return out;
}

enum class CovarianceMode
{
  per_class,
  tied
};

inline CovarianceMode parse_covariance_mode(const std::string & s)
{
  if (s == "per_class") {
    return CovarianceMode::per_class;
  }
  if (s == "tied") {
    return CovarianceMode::tied;
  }
  throw user_error("unknown covariance mode '" + s + "' (expected per_class or tied)");
}

inline std::string covariance_mode_name(CovarianceMode m)
{
  return m == CovarianceMode::tied ? "tied" : "per_class";
}

struct ClassGaussian
{
  int class_id = 0;
  Vector mu;
  Matrix sigma;
  Matrix chol;  ///< lower triangular, chol * chol^T == sigma
  std::size_t count = 0;
  double lambda = 0.0;  ///< shrinkage applied (0 when shrinkage is off)
};

/// Cholesky factor of a symmetric positive definite matrix. Pivots smaller
/// than 1e-7 of the largest (1e-14 in squared terms) count as failure.
/// On failure `sigma` gets 1e-6 * tr(sigma)/n added to its diagonal once,
/// with a warning; if that fails too, the error suggests shrinkage.
inline Matrix factorize_covariance(Matrix & sigma)
{
  auto attempt = [](const Matrix & a, Matrix & l) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
      return false;
    }
    l = llt.matrixL();
    const auto d = l.diagonal().array();
    const double lo = d.minCoeff();
    const double hi = d.maxCoeff();
    return std::isfinite(lo) && lo > 0.0 && lo * lo >= 1e-14 * hi * hi;
  };
  Matrix l;
  if (attempt(sigma, l)) {
    return l;
  }
  const double jitter = 1e-6 * sigma.trace() / static_cast<double>(sigma.rows());
  if (jitter > 0.0) {
    Matrix jittered = sigma;
    jittered.diagonal().array() += jitter;
    if (attempt(jittered, l)) {
      warn("covariance was singular; added " + std::to_string(jitter) + " to its diagonal");
      sigma = std::move(jittered);
      return l;
    }
  }
  throw runtime_error("covariance matrix is not positive definite; enable shrinkage or add jitter");
}

inline void check_finite_matrix(const Matrix & m, const std::string & what)
{
  if (!m.allFinite()) {
    throw user_error(what + ": non-finite input");
  }
}

/// Class means and covariances (divided by the class count, not count - 1).
///
/// per_class: each class gets its own covariance from its own rows.
/// tied:      residuals of all rows about their class means are pooled
///            into one covariance shared by every class.
/// With `shrink`, every covariance goes through ledoit_wolf. A covariance
/// with zero trace (e.g. a class with a single sample) becomes a multiple of
/// the identity scaled by the overall spread of X, or 1 if X is constant.
inline std::vector<ClassGaussian> fit_class_gaussians(
  const Matrix & x, const Labels & y, int num_classes, CovarianceMode mode, bool shrink)
{
  const auto n = x.cols();
  if (n < 1) {
    throw user_error("fit_class_gaussians: zero-dimensional features");
  }
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw user_error("fit_class_gaussians: " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) +
                     " labels");
  }
  check_finite_matrix(x, "fit_class_gaussians");

  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= num_classes) {
      throw user_error("fit_class_gaussians: label " + std::to_string(y[i]) + " out of range");
    }
    rows[static_cast<std::size_t>(y[i])].push_back(static_cast<Eigen::Index>(i));
  }
  for (int c = 0; c < num_classes; ++c) {
    if (rows[static_cast<std::size_t>(c)].empty()) {
      throw user_error("fit_class_gaussians: class " + std::to_string(c) + " has no samples");
    }
  }

  auto fallback_scale = [&] {
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const double s = centered.squaredNorm() / static_cast<double>(x.rows() * n);
    return s > 0.0 ? s : 1.0;
  };

  auto covariance = [&](const Matrix & centered, double & lambda) {
    if (!shrink) {
      lambda = 0.0;
      return Matrix((centered.transpose() * centered) / static_cast<double>(centered.rows()));
    }
    auto res = ledoit_wolf(centered);
    lambda = res.lambda;
    if (res.target_scale <= 0.0) {
      lambda = 1.0;
      return Matrix(Matrix::Identity(n, n) * fallback_scale());
    }
    return std::move(res.sigma_shrunk);
  };

  std::vector<ClassGaussian> out(static_cast<std::size_t>(num_classes));
  std::vector<Matrix> residuals(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const auto & idx = rows[static_cast<std::size_t>(c)];
    Matrix members(static_cast<Eigen::Index>(idx.size()), n);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      members.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
    }
    auto & g = out[static_cast<std::size_t>(c)];
    g.class_id = c;
    g.count = idx.size();
    g.mu = members.colwise().mean().transpose();
    residuals[static_cast<std::size_t>(c)] = members.rowwise() - g.mu.transpose();
  }

  if (mode == CovarianceMode::per_class) {
    for (int c = 0; c < num_classes; ++c) {
      auto & g = out[static_cast<std::size_t>(c)];
      g.sigma = covariance(residuals[static_cast<std::size_t>(c)], g.lambda);
      g.chol = factorize_covariance(g.sigma);
    }
    return out;
  }

  Matrix pooled(x.rows(), n);
  Eigen::Index at = 0;
  for (const auto & r : residuals) {
    pooled.middleRows(at, r.rows()) = r;
    at += r.rows();
  }
  double lambda = 0.0;
  Matrix sigma = covariance(pooled, lambda);
  const Matrix chol = factorize_covariance(sigma);
  for (auto & g : out) {
    g.sigma = sigma;
    g.chol = chol;
    g.lambda = lambda;
  }
  return out;
}

/// Squared Mahalanobis distance given the lower Cholesky factor of the
/// covariance: ||L^{-1} (x - mu)||^2 by forward substitution.
inline double mahalanobis_sq(const Vector & x, const Vector & mu, const Matrix & chol)
{
  if (x.size() != mu.size() || chol.rows() != mu.size() || chol.cols() != mu.size()) {
    throw user_error("mahalanobis_sq: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                     std::to_string(mu.size()) + ")");
  }
  const Vector z = chol.triangularView<Eigen::Lower>().solve(x - mu);
  return z.squaredNorm();
}

inline double mahalanobis_sq(const Vector & x, const ClassGaussian & g) { return mahalanobis_sq(x, g.mu, g.chol); }

/// Build a factorized Gaussian from an explicit mean and covariance.
inline ClassGaussian make_gaussian(int class_id, Vector mu, Matrix sigma)
{
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size()) {
    throw user_error("make_gaussian: dimension mismatch");
  }
  ClassGaussian g;
  g.class_id = class_id;
  g.mu = std::move(mu);
  g.sigma = std::move(sigma);
  g.chol = factorize_covariance(g.sigma);
  return g;
}

}  // namespace palp

#endif  // PALP_GAUSSIAN_HPP_
