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

#ifndef PALP_PROBERS_GDA_HPP_
#define PALP_PROBERS_GDA_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/error.hpp"
#include "palp/gaussian.hpp"

namespace palp
{

/// Gaussian discriminant analysis with one shared (tied) covariance.
struct GdaModel
{
  std::vector<ClassGaussian> classes;
  Vector log_priors;
};

/// Class means, Ledoit-Wolf-shrunk tied covariance, empirical priors.
inline GdaModel fit_gda(const Matrix & x, const Labels & y, int num_classes)
{
  GdaModel model;
  model.classes = fit_class_gaussians(x, y, num_classes, CovarianceMode::tied, true);
  model.log_priors.resize(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    model.log_priors(c) =
      std::log(static_cast<double>(model.classes[static_cast<std::size_t>(c)].count) / static_cast<double>(y.size()));
  }
  return model;
}

/// Log posteriors: log prior_c - mahalanobis_sq(h, mu_c) / 2, normalized
/// with log-sum-exp. For equal priors the argmax is the class with the
/// smallest Mahalanobis distance.
inline Matrix gda_log_posteriors(const GdaModel & model, const Matrix & queries)
{
  const auto k = static_cast<Eigen::Index>(model.classes.size());
  if (k == 0 || model.log_priors.size() != k) {
    throw user_error("gda: model is not trained");
  }
  if (queries.cols() != model.classes.front().mu.size()) {
    throw user_error("gda: dimension mismatch (" + std::to_string(queries.cols()) + " vs " +
                     std::to_string(model.classes.front().mu.size()) + ")");
  }
  Matrix out(queries.rows(), k);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const Vector h = queries.row(q).transpose();
    for (Eigen::Index c = 0; c < k; ++c) {
      out(q, c) = model.log_priors(c) - 0.5 * mahalanobis_sq(h, model.classes[static_cast<std::size_t>(c)]);
    }
    const double top = out.row(q).maxCoeff();
    const double lse = top + std::log((out.row(q).array() - top).exp().sum());
    out.row(q).array() -= lse;
  }
  return out;
}

}  // namespace palp

#endif  // PALP_PROBERS_GDA_HPP_
