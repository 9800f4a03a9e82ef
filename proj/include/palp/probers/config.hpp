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

#ifndef PALP_PROBERS_CONFIG_HPP_
#define PALP_PROBERS_CONFIG_HPP_

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "palp/error.hpp"

namespace palp
{

enum class Algorithm : std::uint8_t
{
  knn = 0,
  logreg = 1,
  svm = 2,
  slp = 3,
  gda = 4,
};

inline constexpr std::array<Algorithm, 5> kAllAlgorithms = {
  Algorithm::knn, Algorithm::logreg, Algorithm::svm, Algorithm::slp, Algorithm::gda};

inline std::string algorithm_name(Algorithm a)
{
  switch (a) {
    case Algorithm::knn: return "knn";
    case Algorithm::logreg: return "logreg";
    case Algorithm::svm: return "svm";
    case Algorithm::slp: return "slp";
    case Algorithm::gda: return "gda";
  }
  return "?";
}

/// Table labels, as in the result tables.
inline std::string algorithm_label(Algorithm a)
{
  switch (a) {
    case Algorithm::knn: return "k-NN";
    case Algorithm::logreg: return "LR";
    case Algorithm::svm: return "SVM";
    case Algorithm::slp: return "SLP";
    case Algorithm::gda: return "GDA";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string & s)
{
  for (auto a : kAllAlgorithms) {
    if (algorithm_name(a) == s) {
      return a;
    }
  }
  if (s == "lr") {
    return Algorithm::logreg;
  }
  throw user_error("unknown prober '" + s + "' (expected knn, logreg, svm, slp or gda)");
}

enum class Optimizer
{
  sgd,
  adam
};

inline std::string optimizer_name(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

inline Optimizer parse_optimizer(const std::string & s)
{
  if (s == "sgd") {
    return Optimizer::sgd;
  }
  if (s == "adam") {
    return Optimizer::adam;
  }
  throw user_error("unknown optimizer '" + s + "' (expected sgd or adam)");
}

struct ProberConfig
{
  Algorithm algorithm = Algorithm::logreg;
  double learning_rate = 1e-2;
  int batch_size = 2;  ///< 2 for few-shot runs, 16 for full-data runs
  int epochs = 100;
  double l2 = 1e-4;
  double svm_c = 1.0;
  int knn_k = 3;
  std::uint64_t seed = 0;
  int early_stop_patience = 10;  ///< epochs without train-loss improvement; 0 disables
  Optimizer optimizer = Optimizer::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Defaults for one algorithm. SLP trains with Adam at learning rate
  /// 15e-5; LR and SVM use plain mini-batch gradient descent.
  static ProberConfig defaults(Algorithm a)
  {
    ProberConfig c;
    c.algorithm = a;
    if (a == Algorithm::slp) {
      c.learning_rate = 15e-5;
      c.optimizer = Optimizer::adam;
    }
    return c;
  }

  void validate() const
  {
    if (!(learning_rate > 0.0)) {
      throw user_error("learning_rate must be > 0");
    }
    if (batch_size < 1) {
      throw user_error("batch_size must be >= 1");
    }
    if (epochs < 1) {
      throw user_error("epochs must be >= 1");
    }
    if (l2 < 0.0) {
      throw user_error("l2 must be >= 0");
    }
    if (!(svm_c > 0.0)) {
      throw user_error("svm_c must be > 0");
    }
    if (knn_k < 1) {
      throw user_error("knn_k must be >= 1");
    }
    if (early_stop_patience < 0) {
      throw user_error("early_stop_patience must be >= 0");
    }
  }

  nlohmann::json to_json() const
  {
    return {
      {"algorithm", algorithm_name(algorithm)},
      {"learning_rate", learning_rate},
      {"batch_size", batch_size},
      {"epochs", epochs},
      {"l2", l2},
      {"svm_c", svm_c},
      {"knn_k", knn_k},
      {"seed", seed},
      {"early_stop_patience", early_stop_patience},
      {"optimizer", optimizer_name(optimizer)},
      {"adam_beta1", adam_beta1},
      {"adam_beta2", adam_beta2},
      {"adam_eps", adam_eps},
    };
  }

  static ProberConfig from_json(const nlohmann::json & j)
  {
    auto c = defaults(parse_algorithm(j.at("algorithm").get<std::string>()));
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.l2 = j.value("l2", c.l2);
    c.svm_c = j.value("svm_c", c.svm_c);
    c.knn_k = j.value("knn_k", c.knn_k);
    c.seed = j.value("seed", c.seed);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.optimizer = parse_optimizer(j.value("optimizer", optimizer_name(c.optimizer)));
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    return c;
  }
};

struct TrainReport
{
  std::vector<double> epoch_loss;
  double final_loss = 0.0;
  int epochs_run = 0;
};

}  // namespace palp

#endif  // PALP_PROBERS_CONFIG_HPP_
