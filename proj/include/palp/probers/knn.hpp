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

#ifndef PALP_PROBERS_KNN_HPP_
#define PALP_PROBERS_KNN_HPP_

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/error.hpp"
#include "palp/gaussian.hpp"

namespace palp
{

struct KnnModel
{
  Matrix x;
  Labels y;
  int k = 3;
  int num_classes = 0;
};

/// Stores the training rows. k is clamped to the number of rows.
inline KnnModel fit_knn(const Matrix & x, const Labels & y, int num_classes, int k)
{
  if (static_cast<std::size_t>(x.rows()) != y.size() || x.rows() == 0) {
    throw user_error("knn: need matching, non-empty rows and labels");
  }
  if (k < 1) {
    throw user_error("knn: k must be >= 1");
  }
  for (int label : y) {
    if (label < 0 || label >= num_classes) {
      throw user_error("knn: label " + std::to_string(label) + " out of range");
    }
  }
  return {x, y, std::min<int>(k, static_cast<int>(x.rows())), num_classes};
}

/// Vote fractions per class (row per query). Neighbours are the k stored
/// rows with the smallest Euclidean distance; equal distances prefer the
/// smaller stored index.
inline Matrix knn_votes(const KnnModel & model, const Matrix & queries)
{
  if (model.x.rows() == 0 || model.k < 1 || model.k > model.x.rows()) {
    throw user_error("knn: model is empty or k exceeds the stored rows");
  }
  if (queries.cols() != model.x.cols()) {
    throw user_error("knn: dimension mismatch (" + std::to_string(queries.cols()) + " vs " +
                     std::to_string(model.x.cols()) + ")");
  }
  const auto n_stored = static_cast<std::size_t>(model.x.rows());
  const auto k = static_cast<std::size_t>(model.k);
  Matrix votes = Matrix::Zero(queries.rows(), model.num_classes);
  std::vector<std::pair<double, std::size_t>> dist(n_stored);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (std::size_t i = 0; i < n_stored; ++i) {
      dist[i] = {(model.x.row(static_cast<Eigen::Index>(i)) - queries.row(q)).squaredNorm(), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t j = 0; j < k; ++j) {
      votes(q, model.y[dist[j].second]) += 1.0;
    }
  }
  return votes / static_cast<double>(k);
}

/// Majority vote of the k nearest rows; vote ties go to the smallest label.
inline Labels predict_knn(const KnnModel & model, const Matrix & queries)
{
  const Matrix votes = knn_votes(model, queries);
  Labels out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < votes.rows(); ++q) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < votes.cols(); ++c) {
      if (votes(q, c) > votes(q, best)) {
        best = c;
      }
    }
    out[static_cast<std::size_t>(q)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace palp

#endif  // PALP_PROBERS_KNN_HPP_
