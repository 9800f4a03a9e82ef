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

#ifndef PALP_PROBERS_MODEL_HPP_
#define PALP_PROBERS_MODEL_HPP_

#include <nlohmann/json.hpp>

#include <string>
#include <variant>

#include "palp/io.hpp"
#include "palp/probers/config.hpp"
#include "palp/probers/gda.hpp"
#include "palp/probers/knn.hpp"
#include "palp/probers/linear.hpp"

namespace palp
{

struct TrainedModel
{
  ProberConfig config;
  int dim = 0;
  int num_classes = 0;
  std::variant<LinearModel, KnnModel, GdaModel> params;
  nlohmann::json metadata = nlohmann::json::object();  ///< free-form echo (task, mode, prefix)
};

struct Prediction
{
  Labels labels;
  Matrix scores;  ///< probabilities (logreg, slp), margins (svm), log posteriors (gda), vote fractions (knn)
};

/// Index of the largest score per row; ties go to the smallest index.
inline Labels argmax_rows(const Matrix & scores)
{
  Labels out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) {
        best = c;
      }
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

inline std::pair<TrainedModel, TrainReport> train_prober(
  const Matrix & x, const Labels & y, int num_classes, const ProberConfig & cfg)
{
  cfg.validate();
  TrainedModel model;
  model.config = cfg;
  model.dim = static_cast<int>(x.cols());
  model.num_classes = num_classes;
  TrainReport report;
  switch (cfg.algorithm) {
    case Algorithm::knn:
      model.params = fit_knn(x, y, num_classes, cfg.knn_k);
      break;
    case Algorithm::gda:
      model.params = fit_gda(x, y, num_classes);
      break;
    case Algorithm::logreg: {
      auto [m, r] = train_logreg(x, y, num_classes, cfg);
      model.params = std::move(m);
      report = std::move(r);
      break;
    }
    case Algorithm::svm: {
      auto [m, r] = train_svm(x, y, num_classes, cfg);
      model.params = std::move(m);
      report = std::move(r);
      break;
    }
    case Algorithm::slp: {
      auto [m, r] = train_slp(x, y, num_classes, cfg);
      model.params = std::move(m);
      report = std::move(r);
      break;
    }
  }
  return {std::move(model), report};
}

inline Prediction predict(const TrainedModel & model, const Matrix & queries)
{
  if (queries.cols() != model.dim) {
    throw user_error("predict: model expects " + std::to_string(model.dim) + " features, got " +
                     std::to_string(queries.cols()));
  }
  Prediction out;
  if (const auto * lin = std::get_if<LinearModel>(&model.params)) {
    if (lin->w.rows() != model.num_classes || lin->b.size() != model.num_classes || lin->w.cols() != model.dim) {
      throw user_error("predict: linear model parameters are inconsistent");
    }
    const Matrix s = lin->scores(queries);
    out.scores = model.config.algorithm == Algorithm::svm ? s : softmax_rows(s);
  } else if (const auto * knn = std::get_if<KnnModel>(&model.params)) {
    out.scores = knn_votes(*knn, queries);
  } else {
    out.scores = gda_log_posteriors(std::get<GdaModel>(model.params), queries);
  }
  out.labels = argmax_rows(out.scores);
  return out;
}

// -- model file ------------------------------------------------------------------
//
//   "PALPMODL" magic | version u8 (=1) | algorithm u8 | n u32 | classes u32
//   config+metadata JSON (u32 length + bytes)
//   payload, little-endian f64 unless noted:
//     linear: relu u8 | W (classes x n, row-major) | b (classes)
//     knn:    k u32 | rows u64 | X (rows x n, row-major) | labels (rows x i32)
//     gda:    log priors (classes) | means (classes x n) | counts (classes x u64)
//             | sigma (n x n, row-major) | lambda

inline constexpr std::string_view kModelMagic = "PALPMODL";
inline constexpr std::uint8_t kModelVersion = 1;

namespace detail
{
inline void write_matrix(ByteWriter & w, const Matrix & m)
{
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      w.f64(m(i, j));
    }
  }
}

inline Matrix read_matrix(ByteReader & r, Eigen::Index rows, Eigen::Index cols)
{
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = r.f64();
    }
  }
  return m;
}
}  // namespace detail

inline std::string encode_model(const TrainedModel & model)
{
  ByteWriter w;
  w.raw(kModelMagic);
  w.u8(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model.config.algorithm));
  w.u32(static_cast<std::uint32_t>(model.dim));
  w.u32(static_cast<std::uint32_t>(model.num_classes));
  w.str(nlohmann::json{{"config", model.config.to_json()}, {"metadata", model.metadata}}.dump());
  if (const auto * lin = std::get_if<LinearModel>(&model.params)) {
    w.u8(lin->activation_on_input ? 1 : 0);
    detail::write_matrix(w, lin->w);
    detail::write_matrix(w, lin->b.transpose());
  } else if (const auto * knn = std::get_if<KnnModel>(&model.params)) {
    w.u32(static_cast<std::uint32_t>(knn->k));
    w.u64(static_cast<std::uint64_t>(knn->x.rows()));
    detail::write_matrix(w, knn->x);
    for (int label : knn->y) {
      w.i32(label);
    }
  } else {
    const auto & gda = std::get<GdaModel>(model.params);
    detail::write_matrix(w, gda.log_priors.transpose());
    for (const auto & g : gda.classes) {
      detail::write_matrix(w, g.mu.transpose());
    }
    for (const auto & g : gda.classes) {
      w.u64(g.count);
    }
    detail::write_matrix(w, gda.classes.front().sigma);
    w.f64(gda.classes.front().lambda);
  }
  return w.bytes();
}

inline TrainedModel decode_model(std::string_view bytes, const std::string & origin)
{
  ByteReader r(bytes, origin);
  if (r.raw(kModelMagic.size()) != kModelMagic) {
    throw user_error(origin + ": not a model file (bad magic)");
  }
  const auto version = r.u8();
  if (version != kModelVersion) {
    throw user_error(origin + ": unsupported model version " + std::to_string(version));
  }
  const auto tag = r.u8();
  if (tag > static_cast<std::uint8_t>(Algorithm::gda)) {
    throw runtime_error(origin + ": unknown algorithm tag " + std::to_string(tag));
  }
  TrainedModel model;
  model.dim = static_cast<int>(r.u32());
  model.num_classes = static_cast<int>(r.u32());
  if (model.dim < 1 || model.num_classes < 1) {
    throw runtime_error(origin + ": corrupt header");
  }
  try {
    const auto header = nlohmann::json::parse(r.str());
    model.config = ProberConfig::from_json(header.at("config"));
    model.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception & e) {
    throw runtime_error(origin + ": corrupt config block (" + e.what() + ")");
  }
  if (static_cast<std::uint8_t>(model.config.algorithm) != tag) {
    throw runtime_error(origin + ": algorithm tag disagrees with the config block");
  }
  const Eigen::Index n = model.dim;
  const Eigen::Index k = model.num_classes;
  switch (model.config.algorithm) {
    case Algorithm::logreg:
    case Algorithm::svm:
    case Algorithm::slp: {
      LinearModel lin;
      lin.activation_on_input = r.u8() != 0;
      lin.w = detail::read_matrix(r, k, n);
      lin.b = detail::read_matrix(r, 1, k).transpose();
      model.params = std::move(lin);
      break;
    }
    case Algorithm::knn: {
      KnnModel knn;
      knn.k = static_cast<int>(r.u32());
      const auto rows = r.u64();
      if (rows > r.remaining() / (8 * static_cast<std::uint64_t>(n))) {
        throw runtime_error(origin + ": truncated k-NN payload");
      }
      knn.x = detail::read_matrix(r, static_cast<Eigen::Index>(rows), n);
      knn.y.resize(rows);
      for (auto & label : knn.y) {
        label = r.i32();
        if (label < 0 || label >= model.num_classes) {
          throw runtime_error(origin + ": stored label out of range");
        }
      }
      knn.num_classes = model.num_classes;
      if (knn.k < 1 || knn.k > static_cast<int>(rows)) {
        throw runtime_error(origin + ": stored k is inconsistent with the stored rows");
      }
      model.params = std::move(knn);
      break;
    }
    case Algorithm::gda: {
      GdaModel gda;
      gda.log_priors = detail::read_matrix(r, 1, k).transpose();
      const Matrix means = detail::read_matrix(r, k, n);
      std::vector<std::uint64_t> counts(static_cast<std::size_t>(k));
      for (auto & c : counts) {
        c = r.u64();
      }
      Matrix sigma = detail::read_matrix(r, n, n);
      const double lambda = r.f64();
      const Matrix chol = factorize_covariance(sigma);
      for (Eigen::Index c = 0; c < k; ++c) {
        ClassGaussian g;
        g.class_id = static_cast<int>(c);
        g.mu = means.row(c).transpose();
        g.sigma = sigma;
        g.chol = chol;
        g.count = counts[static_cast<std::size_t>(c)];
        g.lambda = lambda;
        gda.classes.push_back(std::move(g));
      }
      model.params = std::move(gda);
      break;
    }
  }
  if (!r.done()) {
    throw runtime_error(origin + ": trailing bytes after the model payload");
  }
  return model;
}

inline void save_model(const TrainedModel & model, const fs::path & path)
{
  write_file_atomic(path, encode_model(model));
}

inline TrainedModel load_model(const fs::path & path)
{
  if (!fs::exists(path)) {
    throw user_error("model file not found: " + path.string());
  }
  return decode_model(read_file(path), path.string());
}

}  // namespace palp

#endif  // PALP_PROBERS_MODEL_HPP_
