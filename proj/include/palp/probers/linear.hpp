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

#ifndef PALP_PROBERS_LINEAR_HPP_
#define PALP_PROBERS_LINEAR_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/error.hpp"
#include "palp/gaussian.hpp"
#include "palp/probers/config.hpp"
#include "palp/rng.hpp"

namespace palp
{

/// scores = W * f(h) + b, with f = ReLU when activation_on_input is set
/// and the identity otherwise. W is |C| x n.
struct LinearModel
{
  Matrix w;
  Vector b;
  bool activation_on_input = false;

  Matrix transform(const Matrix & x) const { return activation_on_input ? Matrix(x.cwiseMax(0.0)) : x; }

  /// Row i holds the class scores of query i.
  Matrix scores(const Matrix & x) const
  {
    if (x.cols() != w.cols()) {
      throw user_error("linear model expects " + std::to_string(w.cols()) + " features, got " +
                       std::to_string(x.cols()));
    }
    Matrix s = transform(x) * w.transpose();
    s.rowwise() += b.transpose();
    return s;
  }
};

/// Row-wise softmax, max-shifted.
inline Matrix softmax_rows(const Matrix & scores)
{
  Matrix p = scores.colwise() - scores.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  const Vector z = p.rowwise().sum();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    p.row(i) /= z(i);
  }
  return p;
}

struct LossGrad
{
  double loss = 0.0;
  Matrix grad_w;
  Vector grad_b;
};

/// Mean cross-entropy of softmax(X W^T + b) plus (l2/2) ||W||^2.
inline LossGrad softmax_xent(const Matrix & w, const Vector & b, const Matrix & x, std::span<const int> y, double l2)
{
  const auto m = x.rows();
  Matrix s = x * w.transpose();
  s.rowwise() += b.transpose();
  const Vector row_max = s.rowwise().maxCoeff();
  const Matrix shifted = s.colwise() - row_max;
  const Vector log_z = shifted.array().exp().rowwise().sum().log().matrix();

  LossGrad out;
  Matrix delta = (shifted.colwise() - log_z).array().exp().matrix();  // probabilities
  double nll = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto c = static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]);
    nll -= shifted(i, c) - log_z(i);
    delta(i, c) -= 1.0;
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  out.loss = nll * inv_m + 0.5 * l2 * w.squaredNorm();
  out.grad_w = delta.transpose() * x * inv_m + l2 * w;
  out.grad_b = delta.colwise().sum().transpose() * inv_m;
  return out;
}

/// One-vs-rest squared hinge. targets(i, k) is +1 if row i belongs to the
/// positive side of hyperplane k and -1 otherwise. The loss is the primal
///   (1/2) ||W||^2 + C * sum_i sum_k max(0, 1 - t_ik (w_k . x_i + b_k))^2
/// divided by C * total_rows, with the hinge sum estimated from the batch:
///   ||W||^2 / (2 C total_rows) + (1/|batch|) sum_batch sum_k hinge^2.
inline LossGrad squared_hinge(
  const Matrix & w, const Vector & b, const Matrix & x, const Matrix & targets, double svm_c, double total_rows)
{
  const auto m = x.rows();
  Matrix s = x * w.transpose();
  s.rowwise() += b.transpose();
  const Matrix slack = (1.0 - targets.array() * s.array()).cwiseMax(0.0).matrix();
  const double inv_m = 1.0 / static_cast<double>(m);
  const double reg = 1.0 / (svm_c * total_rows);

  LossGrad out;
  out.loss = slack.squaredNorm() * inv_m + 0.5 * reg * w.squaredNorm();
  const Matrix ds = (-2.0 * inv_m) * (targets.array() * slack.array()).matrix();
  out.grad_w = ds.transpose() * x + reg * w;
  out.grad_b = ds.colwise().sum().transpose();
  return out;
}

/// Adam with bias correction:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class Adam
{
public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
  : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps)
  {
  }

  void step(Eigen::Ref<Eigen::ArrayXd> params, const Eigen::Ref<const Eigen::ArrayXd> & grad)
  {
    if (m_.size() != params.size()) {
      m_ = Eigen::ArrayXd::Zero(params.size());
      v_ = Eigen::ArrayXd::Zero(params.size());
      t_ = 0;
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.square();
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    params -= lr_ * (m_ / c1) / ((v_ / c2).sqrt() + eps_);
  }

  int steps() const { return t_; }

private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  Eigen::ArrayXd m_;
  Eigen::ArrayXd v_;
  int t_ = 0;
};

enum class LinearLoss
{
  softmax_xent,
  squared_hinge
};

struct LinearTrainSpec
{
  LinearLoss loss = LinearLoss::softmax_xent;
  Optimizer optimizer = Optimizer::sgd;
  bool relu_input = false;
};

namespace detail
{
inline void check_training_data(const Matrix & x, const Labels & y, int num_classes, const char * who)
{
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw user_error(std::string(who) + ": " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) +
                     " labels");
  }
  if (x.rows() == 0) {
    throw user_error(std::string(who) + ": no training data");
  }
  if (!x.allFinite()) {
    throw user_error(std::string(who) + ": non-finite features");
  }
  std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
  for (int label : y) {
    if (label < 0 || label >= num_classes) {
      throw user_error(std::string(who) + ": label " + std::to_string(label) + " out of range");
    }
    ++count[static_cast<std::size_t>(label)];
  }
  int present = 0;
  for (int c : count) {
    present += c > 0 ? 1 : 0;
  }
  if (present < 2) {
    throw user_error(std::string(who) + ": training data contains a single class");
  }
}
}  // namespace detail

/// Mini-batch training of a linear model from `init`.
///
/// Each epoch shuffles the row order with an Rng seeded once by cfg.seed,
/// walks batches of cfg.batch_size rows, and takes one optimizer step per
/// batch on the batch loss. The recorded epoch loss is the size-weighted
/// mean of the batch losses seen during the epoch. Training stops early
/// when the epoch loss has not improved for cfg.early_stop_patience epochs.
inline std::pair<LinearModel, TrainReport> train_linear(
  const Matrix & x_raw, const Labels & y, int num_classes, const ProberConfig & cfg, const LinearTrainSpec & spec,
  LinearModel init)
{
  cfg.validate();
  const auto m = x_raw.rows();
  const Matrix x = spec.relu_input ? Matrix(x_raw.cwiseMax(0.0)) : x_raw;
  LinearModel model = std::move(init);
  model.activation_on_input = spec.relu_input;
  const auto k = model.w.rows();
  if (k != num_classes && !(k == 1 && num_classes == 2)) {
    throw user_error("linear prober: initial model has " + std::to_string(k) + " rows for " +
                     std::to_string(num_classes) + " classes");
  }

  Matrix targets;
  if (spec.loss == LinearLoss::squared_hinge) {
    targets = Matrix::Constant(m, k, -1.0);
    for (Eigen::Index i = 0; i < m; ++i) {
      const int label = y[static_cast<std::size_t>(i)];
      if (k == 1) {
        targets(i, 0) = label == 1 ? 1.0 : -1.0;
      } else {
        targets(i, label) = 1.0;
      }
    }
  }

  Rng rng(cfg.seed);
  Adam adam_w(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Adam adam_b(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainReport report;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < m; start += batch) {
      const auto len = std::min(batch, m - start);
      Matrix xb(len, x.cols());
      std::vector<int> yb(static_cast<std::size_t>(len));
      Matrix tb;
      if (spec.loss == LinearLoss::squared_hinge) {
        tb.resize(len, k);
      }
      for (Eigen::Index r = 0; r < len; ++r) {
        const auto src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = x.row(src);
        yb[static_cast<std::size_t>(r)] = y[static_cast<std::size_t>(src)];
        if (tb.size() > 0) {
          tb.row(r) = targets.row(src);
        }
      }
      const auto lg = spec.loss == LinearLoss::softmax_xent
                        ? softmax_xent(model.w, model.b, xb, yb, cfg.l2)
                        : squared_hinge(model.w, model.b, xb, tb, cfg.svm_c, static_cast<double>(m));
      if (!std::isfinite(lg.loss)) {
        throw runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                            " (learning rate " + std::to_string(cfg.learning_rate) + ")");
      }
      loss_sum += lg.loss * static_cast<double>(len);
      if (spec.optimizer == Optimizer::adam) {
        adam_w.step(Eigen::Map<Eigen::ArrayXd>(model.w.data(), model.w.size()),
                    Eigen::Map<const Eigen::ArrayXd>(lg.grad_w.data(), lg.grad_w.size()));
        adam_b.step(model.b.array(), lg.grad_b.array());
      } else {
        model.w -= cfg.learning_rate * lg.grad_w;
        model.b -= cfg.learning_rate * lg.grad_b;
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(m);
    report.epoch_loss.push_back(epoch_loss);
    report.epochs_run = epoch + 1;
    if (epoch_loss < best - 1e-12 * std::max(1.0, std::abs(best))) {
      best = epoch_loss;
      stale = 0;
    } else if (cfg.early_stop_patience > 0 && ++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  report.final_loss = report.epoch_loss.back();
  if (!model.w.allFinite() || !model.b.allFinite()) {
    throw runtime_error("training produced non-finite parameters");
  }
  return {std::move(model), report};
}

inline LinearModel zero_linear_model(Eigen::Index classes, Eigen::Index dim)
{
  return {Matrix::Zero(classes, dim), Vector::Zero(classes), false};
}

/// Multinomial logistic regression, zero-initialized, plain mini-batch
/// gradient descent by default.
inline std::pair<LinearModel, TrainReport> train_logreg(
  const Matrix & x, const Labels & y, int num_classes, const ProberConfig & cfg)
{
  detail::check_training_data(x, y, num_classes, "logreg");
  return train_linear(
    x, y, num_classes, cfg, {LinearLoss::softmax_xent, cfg.optimizer, false}, zero_linear_model(num_classes, x.cols()));
}

/// One-vs-rest linear SVM with squared hinge loss. Two-class problems use a
/// single hyperplane (class 1 positive); the returned model stores it as
/// rows (-w, w) so that argmax over rows equals its sign.
inline std::pair<LinearModel, TrainReport> train_svm(
  const Matrix & x, const Labels & y, int num_classes, const ProberConfig & cfg)
{
  detail::check_training_data(x, y, num_classes, "svm");
  const Eigen::Index planes = num_classes == 2 ? 1 : num_classes;
  auto [model, report] = train_linear(
    x, y, num_classes, cfg, {LinearLoss::squared_hinge, cfg.optimizer, false}, zero_linear_model(planes, x.cols()));
  if (planes == 1) {
    LinearModel two = zero_linear_model(2, x.cols());
    two.w.row(0) = -model.w.row(0);
    two.w.row(1) = model.w.row(0);
    two.b(0) = -model.b(0);
    two.b(1) = model.b(0);
    return {std::move(two), report};
  }
  return {std::move(model), report};
}

/// softmax(W relu(h) + b) trained with Adam on cross-entropy. Weights start
/// uniform in [-1/sqrt(n), 1/sqrt(n)] from an Rng seeded by cfg.seed; the
/// bias starts at zero.
inline std::pair<LinearModel, TrainReport> train_slp(
  const Matrix & x, const Labels & y, int num_classes, const ProberConfig & cfg)
{
  detail::check_training_data(x, y, num_classes, "slp");
  Rng init_rng(cfg.seed ^ 0x5bd1e9955bd1e995ULL);
  const double bound = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  LinearModel init = zero_linear_model(num_classes, x.cols());
  for (Eigen::Index j = 0; j < init.w.cols(); ++j) {
    for (Eigen::Index i = 0; i < init.w.rows(); ++i) {
      init.w(i, j) = init_rng.uniform(-bound, bound);
    }
  }
  return train_linear(x, y, num_classes, cfg, {LinearLoss::softmax_xent, cfg.optimizer, true}, std::move(init));
}

}  // namespace palp

#endif  // PALP_PROBERS_LINEAR_HPP_
