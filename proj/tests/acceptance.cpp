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

// Acceptance checks. Prints one line per criterion and exits non-zero when
// any of them fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "palp.hpp"

namespace
{

using palp::Matrix;
using palp::Vector;
namespace fs = std::filesystem;

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char * f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// -- 1 ----------------------------------------------------------------------

Outcome mahalanobis_solve()
{
  std::mt19937_64 gen(101);
  std::uniform_int_distribution<int> dim(2, 8);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = dim(gen);
    Matrix sigma = oracle::random_spd(gen, n);
    const Vector mu = oracle::random_matrix(gen, n, 1);
    const Vector x = oracle::random_matrix(gen, n, 1, 3.0);
    const double want = oracle::mahalanobis_sq(x, mu, sigma);
    const Matrix chol = palp::factorize_covariance(sigma);
    const double got = palp::mahalanobis_sq(x, mu, chol);
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  }
  return {worst <= 1e-8, "max rel err " + fmt("%.2e", worst)};
}

// -- 2 ----------------------------------------------------------------------

Outcome gda_equivalence()
{
  std::mt19937_64 gen(202);
  const int n = 16;
  const int per_class = 50;
  std::size_t agree = 0;
  std::size_t total = 0;
  for (int classes : {2, 3, 5}) {
    const Matrix centres = oracle::random_matrix(gen, classes, n, 1.5);
    Matrix x(classes * per_class, n);
    std::vector<int> y;
    for (int c = 0; c < classes; ++c) {
      const Matrix noise = oracle::random_matrix(gen, per_class, n);
      for (int i = 0; i < per_class; ++i) {
        x.row(c * per_class + i) = centres.row(c) + noise.row(i);
        y.push_back(c);
      }
    }
    Matrix test(1000, n);
    std::uniform_int_distribution<int> pick(0, classes - 1);
    const Matrix noise = oracle::random_matrix(gen, 1000, n, 1.3);
    for (int i = 0; i < 1000; ++i) {
      test.row(i) = centres.row(pick(gen)) + noise.row(i);
    }

    const auto model = palp::train_prober(x, y, classes, palp::ProberConfig::defaults(palp::Algorithm::gda)).first;
    const auto got = palp::predict(model, test).labels;

    const Matrix inv = oracle::gauss_jordan_inverse(oracle::tied_sigma(x, y, classes));
    std::vector<Vector> means;
    for (int c = 0; c < classes; ++c) {
      means.push_back(oracle::class_stats(x, y, c).first);
    }
    for (int i = 0; i < 1000; ++i) {
      int best = 0;
      double best_d = 0.0;
      for (int c = 0; c < classes; ++c) {
        const Vector d = test.row(i).transpose() - means[c];
        const double m = d.dot(inv * d);
        if (c == 0 || m < best_d) {
          best = c;
          best_d = m;
        }
      }
      agree += got[static_cast<std::size_t>(i)] == best ? 1 : 0;
      ++total;
    }
  }
  return {agree == total, std::to_string(agree) + "/" + std::to_string(total) + " agree"};
}

// -- 3 ----------------------------------------------------------------------

struct Unpacked
{
  Matrix w;
  Vector b;
};

Unpacked unpack(const Vector & p, int k, int n)
{
  Unpacked u{Matrix(k, n), Vector(k)};
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < n; ++j) {
      u.w(c, j) = p(c * n + j);
    }
    u.b(c) = p(k * n + c);
  }
  return u;
}

Vector pack(const Matrix & w, const Vector & b)
{
  const auto k = static_cast<int>(w.rows());
  const auto n = static_cast<int>(w.cols());
  Vector p(k * n + k);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < n; ++j) {
      p(c * n + j) = w(c, j);
    }
    p(k * n + c) = b(c);
  }
  return p;
}

double xent_loop(const Unpacked & u, const Matrix & x, const std::vector<int> & y, double l2)
{
  double loss = 0.0;
  for (int i = 0; i < x.rows(); ++i) {
    std::vector<double> s(static_cast<std::size_t>(u.w.rows()));
    double z = 0.0;
    for (int c = 0; c < u.w.rows(); ++c) {
      s[c] = u.b(c);
      for (int j = 0; j < x.cols(); ++j) {
        s[c] += u.w(c, j) * x(i, j);
      }
      z += std::exp(s[c]);
    }
    loss += std::log(z) - s[y[i]];
  }
  double reg = 0.0;
  for (int c = 0; c < u.w.rows(); ++c) {
    for (int j = 0; j < u.w.cols(); ++j) {
      reg += u.w(c, j) * u.w(c, j);
    }
  }
  return loss / static_cast<double>(x.rows()) + 0.5 * l2 * reg;
}

double hinge_loop(const Unpacked & u, const Matrix & x, const Matrix & t, double svm_c, double total)
{
  double loss = 0.0;
  for (int i = 0; i < x.rows(); ++i) {
    for (int c = 0; c < u.w.rows(); ++c) {
      double s = u.b(c);
      for (int j = 0; j < x.cols(); ++j) {
        s += u.w(c, j) * x(i, j);
      }
      const double slack = std::max(0.0, 1.0 - t(i, c) * s);
      loss += slack * slack;
    }
  }
  double reg = 0.0;
  for (int c = 0; c < u.w.rows(); ++c) {
    for (int j = 0; j < u.w.cols(); ++j) {
      reg += u.w(c, j) * u.w(c, j);
    }
  }
  return loss / static_cast<double>(x.rows()) + reg / (2.0 * svm_c * total);
}

double rel_err(const Vector & got, const Vector & want)
{
  double worst = 0.0;
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    const double scale = std::max({std::abs(got(i)), std::abs(want(i)), 1e-6});
    worst = std::max(worst, std::abs(got(i) - want(i)) / scale);
  }
  return worst;
}

Outcome gradient_checks()
{
  std::mt19937_64 gen(303);
  const int n = 8;
  const double eps = 1e-5;
  double worst_lr = 0.0;
  double worst_svm = 0.0;
  double worst_slp = 0.0;
  for (int restart = 0; restart < 20; ++restart) {
    const int k = 2 + restart % 3;
    const int m = 4 + restart % 5;
    const Matrix x = oracle::random_matrix(gen, m, n);
    std::vector<int> y(static_cast<std::size_t>(m));
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (auto & v : y) {
      v = pick(gen);
    }
    const Matrix w = oracle::random_matrix(gen, k, n, 0.5);
    const Vector b = oracle::random_matrix(gen, k, 1, 0.5);
    const double l2 = 1e-2;

    {
      const auto lg = palp::softmax_xent(w, b, x, y, l2);
      const auto fd = oracle::finite_difference(
        [&](const Vector & p) { return xent_loop(unpack(p, k, n), x, y, l2); }, pack(w, b), eps);
      worst_lr = std::max(worst_lr, rel_err(pack(lg.grad_w, lg.grad_b), fd));
    }
    {
      // binary restarts use one hyperplane, the rest one per class
      const int planes = k == 2 ? 1 : k;
      Matrix t = Matrix::Constant(m, planes, -1.0);
      for (int i = 0; i < m; ++i) {
        if (planes == 1) {
          t(i, 0) = y[i] == 1 ? 1.0 : -1.0;
        } else {
          t(i, y[i]) = 1.0;
        }
      }
      const Matrix wp = w.topRows(planes);
      const Vector bp = b.head(planes);
      const double total = 3.0 * m;
      const auto lg = palp::squared_hinge(wp, bp, x, t, 0.7, total);
      const auto fd = oracle::finite_difference(
        [&](const Vector & p) { return hinge_loop(unpack(p, planes, n), x, t, 0.7, total); }, pack(wp, bp), eps);
      worst_svm = std::max(worst_svm, rel_err(pack(lg.grad_w, lg.grad_b), fd));
    }
    {
      Matrix h = x.cwiseMax(0.0);
      const auto lg = palp::softmax_xent(w, b, h, y, 0.0);
      const auto fd = oracle::finite_difference(
        [&](const Vector & p) {
          Matrix r(m, n);
          for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
              r(i, j) = x(i, j) > 0.0 ? x(i, j) : 0.0;
            }
          }
          return xent_loop(unpack(p, k, n), r, y, 0.0);
        },
        pack(w, b), eps);
      worst_slp = std::max(worst_slp, rel_err(pack(lg.grad_w, lg.grad_b), fd));
    }
  }
  const double worst = std::max({worst_lr, worst_svm, worst_slp});
  return {worst < 1e-4, "logreg " + fmt("%.1e", worst_lr) + ", svm " + fmt("%.1e", worst_svm) + ", slp " +
                          fmt("%.1e", worst_slp)};
}

// -- 4 ----------------------------------------------------------------------

Outcome ledoit_wolf_properties()
{
  std::mt19937_64 gen(404);
  std::uniform_int_distribution<int> rows(1, 30);
  std::uniform_int_distribution<int> cols(1, 12);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  double lo = 1.0;
  double hi = 0.0;
  double oracle_gap = 0.0;
  bool in_range = true;
  for (int t = 0; t < 500; ++t) {
    const int m = rows(gen);
    const int n = cols(gen);
    Matrix x = oracle::random_matrix(gen, m, n, scale(gen));
    if (t % 7 == 0 && n > 1) {
      x.col(0) = x.col(1);  // collinear columns
    }
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const auto res = palp::ledoit_wolf(centered);
    in_range = in_range && res.lambda >= 0.0 && res.lambda <= 1.0;
    lo = std::min(lo, res.lambda);
    hi = std::max(hi, res.lambda);
    const auto ref = oracle::ledoit_wolf(centered);
    const double want = m <= n ? std::max(ref.lambda, palp::kMinDegenerateShrinkage) : ref.lambda;
    oracle_gap = std::max(oracle_gap, std::abs(res.lambda - want));
  }

  bool single_ok = true;
  for (int n = 1; n <= 10; ++n) {
    const Matrix row = oracle::random_matrix(gen, 1, n, 2.0);
    const auto res = palp::ledoit_wolf(row);
    const Matrix s = row.transpose() * row;
    const double mu = s.trace() / static_cast<double>(n);
    const Matrix want = mu * Matrix::Identity(n, n);
    single_ok = single_ok && res.lambda == 1.0 && res.sigma_shrunk == want;
  }

  int pd = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 3 + t % 10;
    const int m = 2 + static_cast<int>(gen() % static_cast<std::uint64_t>(n - 2));  // 2 <= m < n
    const Matrix x = oracle::random_matrix(gen, m, n);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const auto res = palp::ledoit_wolf(centered);
    Matrix sigma = res.sigma_shrunk;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    bool factorized = true;
    try {
      palp::factorize_covariance(sigma);
    } catch (const palp::Error &) {
      factorized = false;
    }
    pd += eig.eigenvalues().minCoeff() > 0.0 && factorized && sigma == res.sigma_shrunk ? 1 : 0;
  }
  const bool pass = in_range && single_ok && pd == 100 && oracle_gap < 1e-9;
  return {pass, "lambda in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "], single row " +
                  (single_ok ? "exact" : "WRONG") + ", PD " + std::to_string(pd) + "/100, oracle gap " +
                  fmt("%.1e", oracle_gap)};
}

// -- 5 ----------------------------------------------------------------------

Outcome selection_matches()
{
  std::mt19937_64 gen(505);
  int match = 0;
  int rotated = 0;
  for (int t = 0; t < 50; ++t) {
    const int classes = 2 + t % 3;
    const int k = 3 + static_cast<int>(gen() % 6);  // 3..8 per class
    const int n = 4 + static_cast<int>(gen() % 9);
    palp::TaskSchema schema{"sel" + std::to_string(t), {}, false};
    palp::TemplateSpec spec;
    spec.prefix = "Q: ";
    spec.postfix = "\nA:";
    for (int c = 0; c < classes; ++c) {
      schema.class_names.push_back("c" + std::to_string(c));
      spec.verbalizer.push_back("v" + std::to_string(c));
    }
    palp::Split train{schema, {}};
    std::vector<int> y;
    Matrix x(classes * k, n);
    auto store = std::make_shared<palp::StoreProvider>();
    int id = 0;
    for (int c = 0; c < classes; ++c) {
      const Matrix centre = oracle::random_matrix(gen, 1, n, 2.0);
      const Matrix noise = oracle::random_matrix(gen, k, n);
      for (int i = 0; i < k; ++i, ++id) {
        palp::LabeledExample ex;
        ex.id = id;
        ex.source_id = id;
        ex.text_a = "task " + std::to_string(t) + " item " + std::to_string(id);
        ex.label = c;
        x.row(id) = centre + noise.row(i);
        y.push_back(c);
        std::vector<double> v(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
          v[static_cast<std::size_t>(j)] = x(id, j);
        }
        store->add(palp::render_input(spec, ex).text, std::move(v));
        train.examples.push_back(std::move(ex));
      }
    }
    palp::EncoderProfile profile;
    profile.name = "store";
    profile.dim = n;
    palp::Gateway gateway(profile, store);
    const auto demos = palp::select_demonstrations(train, spec, gateway);
    const auto want = oracle::select_ids(x, y, classes);
    std::vector<int> got;
    for (const auto & d : demos.entries) {
      got.push_back(d.source_id);
    }
    match += got == want ? 1 : 0;

    const Matrix q = oracle::random_orthogonal(gen, n);
    const auto turned = palp::select_from_embeddings(train, spec, x * q, palp::CovarianceMode::per_class);
    std::vector<int> got_rot;
    for (const auto & d : turned.entries) {
      got_rot.push_back(d.source_id);
    }
    rotated += got_rot == got ? 1 : 0;
  }
  return {match == 50 && rotated == 50,
          std::to_string(match) + "/50 match, " + std::to_string(rotated) + "/50 rotation-stable"};
}

// -- 6 ----------------------------------------------------------------------

bool is_perm(const std::vector<int> & p, int n)
{
  std::vector<int> s = p;
  std::sort(s.begin(), s.end());
  return s == palp::identity_order(static_cast<std::size_t>(n));
}

Outcome permutation_counts()
{
  std::ostringstream detail;
  bool pass = true;
  for (int n = 1; n <= 4; ++n) {
    const auto orders = palp::draw_permutations(n, 100, 7);
    int fact = 1;
    for (int i = 2; i <= n; ++i) {
      fact *= i;
    }
    const std::set<std::vector<int>> distinct(orders.begin(), orders.end());
    const bool ok = static_cast<int>(orders.size()) == std::min(fact, 100) && distinct.size() == orders.size() &&
                    std::all_of(orders.begin(), orders.end(), [&](const auto & p) { return is_perm(p, n); });
    pass = pass && ok;
    detail << "|C|=" << n << ":" << orders.size() << " ";
  }
  const auto a = palp::draw_permutations(6, 20, 13);
  const auto b = palp::draw_permutations(6, 20, 13);
  const std::set<std::vector<int>> distinct(a.begin(), a.end());
  const bool six_ok = a.size() == 20 && distinct.size() == 20 && a == b &&
                      std::all_of(a.begin(), a.end(), [](const auto & p) { return is_perm(p, 6); });
  pass = pass && six_ok;
  detail << "|C|=6:" << distinct.size() << (a == b ? " deterministic" : " NOT deterministic");

  // frozen reference draw
  const std::vector<std::vector<int>> golden = {{4, 0, 2, 3, 1}, {1, 2, 0, 4, 3}, {0, 3, 1, 4, 2}, {3, 0, 2, 1, 4},
                                                {4, 2, 1, 0, 3}, {4, 0, 1, 2, 3}, {2, 0, 4, 3, 1}, {2, 3, 4, 1, 0},
                                                {2, 0, 1, 4, 3}, {2, 3, 1, 4, 0}};
  const bool golden_ok = palp::draw_permutations(5, 10, 13) == golden;
  pass = pass && golden_ok;
  detail << (golden_ok ? ", golden draw ok" : ", golden draw differs");
  return {pass, detail.str()};
}

// -- 7 ----------------------------------------------------------------------

struct TemplateGolden
{
  std::string task;
  bool pair;
  std::string rendered;
  std::vector<std::string> verbalizer;
};

Outcome templates_exact()
{
  const std::string s1 = "very interesting.";
  const std::string a = "A man is playing a guitar.";
  const std::string b = "Someone plays music.";
  const std::vector<TemplateGolden> goldens = {
    {"sst2", false, "Sentence 1: very interesting.\nSentiment:", {"negative", "positive"}},
    {"rotten_tomatoes", false, "Sentence 1: very interesting.\nSentiment:", {"negative", "positive"}},
    {"offensive", false, "Sentence 1: very interesting.\nSentiment:", {"non-offensive", "offensive"}},
    {"cola", false, "Sentence 1: very interesting.\nSentiment:", {"correct", "wrong"}},
    {"stance_atheism", false, "Sentence 1: very interesting. Label:", {"none", "against", "favor"}},
    {"emotion", false, "Sentence 1: very interesting.\nSentiment:", {"anger", "joy", "optimism", "sadness"}},
    {"agnews", false, "Sentence 1: very interesting.\nSentiment:", {"World", "Sports", "Business", "Technology"}},
    {"trec",
     false,
     "Sentence 1: very interesting.\nLabel:",
     {"Description", "Entity", "Expression", "Human", "Number", "Location"}},
    {"banking77", false, "Sentence 1: very interesting. Label:", {}},
    {"clinc150", false, "Sentence 1: very interesting.\nLabel:", {}},
    {"mnli",
     true,
     "Sentence 1: A man is playing a guitar.\nSentence 2: Someone plays music.\nLabel:",
     {"True", "Neither", "False"}},
    {"mrpc", true, "Sentence 1: A man is playing a guitar.\nSentence 2: Someone plays music.\nLabel:", {"True", "False"}},
    {"rte", true, "Premise: A man is playing a guitar.\nHypothesis: Someone plays music.\nLabel:", {"True", "False"}},
    {"boolq", true, "Premise: A man is playing a guitar.\nHypothesis: Someone plays music.\nLabel:", {}},
    {"cb", true, "Premise: A man is playing a guitar.\nHypothesis: Someone plays music.\nLabel:", {}},
  };
  const auto catalog = palp::builtin_templates();
  int exact = 0;
  std::string first_bad;
  for (const auto & g : goldens) {
    const auto t = palp::find_builtin_template(g.task);
    bool ok = t.has_value();
    if (ok) {
      palp::LabeledExample ex;
      ex.text_a = g.pair ? a : s1;
      if (g.pair) {
        ex.text_b = b;
      }
      ok = palp::render_input(*t, ex).text == g.rendered && t->verbalizer == g.verbalizer;
      for (std::size_t c = 0; ok && c < g.verbalizer.size(); ++c) {
        ex.label = static_cast<int>(c);
        ok = palp::render_demonstration(*t, ex).text == g.rendered + " " + g.verbalizer[c];
      }
    }
    exact += ok ? 1 : 0;
    if (!ok && first_bad.empty()) {
      first_bad = g.task;
    }
  }
  palp::LabeledExample demo;
  demo.text_a = "awful movie.";
  demo.label = 0;
  const bool sst2_demo =
    palp::render_demonstration(*palp::find_builtin_template("sst2"), demo).text == "Sentence 1: awful movie.\nSentiment: negative";
  const bool pass = exact == 15 && catalog.size() == 15 && sst2_demo;
  return {pass, std::to_string(exact) + "/15 exact" + (sst2_demo ? "" : ", sst2 demonstration differs") +
                  (first_bad.empty() ? "" : ", first mismatch: " + first_bad)};
}

// -- 8 ----------------------------------------------------------------------

Outcome separable_end_to_end()
{
  const auto app = palp::load_app_config(std::string(PALP_DATA_DIR) + "/quickstart/quickstart.ini");
  const auto specs = palp::experiment_matrix(app);
  std::optional<palp::LoadedTask> data;
  bool pass = true;
  std::ostringstream detail;
  double worst_probe = 1.0;
  double worst_base = 0.0;
  for (const auto & spec : specs) {
    if (spec.seeds != palp::default_seeds()) {
      return {false, "quickstart config does not use the five reference seeds"};
    }
    if (!data) {
      data = palp::load_task(spec.task);
    }
    palp::Gateway gateway = palp::make_gateway(app);
    const auto r = palp::run_experiment(spec, *data, gateway).report;
    if (spec.mode == palp::Mode::baseline) {
      worst_base = std::max(worst_base, r.mean);
      pass = pass && r.mean <= 0.6;
    } else {
      worst_probe = std::min(worst_probe, r.mean);
      pass = pass && r.mean >= 0.99;
    }
  }
  detail << specs.size() << " runs, min T/D mean " << fmt("%.4f", worst_probe) << ", max baseline "
         << fmt("%.4f", worst_base);
  return {pass, detail.str()};
}

// -- 9 ----------------------------------------------------------------------

Outcome cli_deterministic()
{
  char tmpl[] = "/tmp/palp-accept-XXXXXX";
  const char * dir = mkdtemp(tmpl);
  if (dir == nullptr) {
    return {false, "cannot create a temporary directory"};
  }
  const std::string root(dir);
  setenv("PALP_CACHE_DIR", (root + "/cache").c_str(), 1);
  const std::string cfg = std::string(PALP_DATA_DIR) + "/quickstart/quickstart.ini";
  auto run = [&](const std::string & out) {
    const std::string cmd = std::string("\"") + PALP_CLI_PATH + "\" run -c \"" + cfg + "\" -o \"" + root + "/" + out +
                            "\" > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  const int warm = run("warm");
  const int first = run("a");
  const int second = run("b");
  unsetenv("PALP_CACHE_DIR");
  if (warm != 0 || first != 0 || second != 0) {
    return {false, "cli exited with a failure status"};
  }
  const auto ra = palp::read_file(root + "/a/report.json");
  const auto rb = palp::read_file(root + "/b/report.json");
  const bool cache_written = fs::exists(root + "/cache") && !fs::is_empty(root + "/cache");
  std::error_code ec;
  fs::remove_all(root, ec);
  const bool same = !ra.empty() && ra == rb;
  return {same && cache_written, std::to_string(ra.size()) + " bytes, " + (same ? "identical" : "DIFFERENT") +
                                   (cache_written ? "" : ", cache not written")};
}

// -- 10 ---------------------------------------------------------------------

Outcome icl_length_limit()
{
  const auto app = palp::load_app_config(std::string(PALP_DATA_DIR) + "/intent150/icl.ini");
  const auto specs = palp::experiment_matrix(app);
  if (specs.size() != 1 || specs[0].mode != palp::Mode::icl) {
    return {false, "intent150 config should hold exactly one icl run"};
  }
  const auto & spec = specs[0];
  const auto data = palp::load_task(spec.task);
  palp::Gateway gateway = palp::make_gateway(app);
  auto scorer = palp::make_scorer(app);
  const auto r = palp::run_experiment(spec, data, gateway, scorer.get()).report;
  const bool marked = r.infeasible && *r.infeasible == palp::kInfeasibleLengthLimit && r.per_seed.empty() &&
                      palp::format_cell(r) == "infeasible";
  const std::string why = r.manifest.value("infeasible_detail", std::string("no detail"));
  return {marked && spec.task.schema.num_classes() == 150 && gateway.profile().max_seq_len == 2048,
          (r.infeasible ? *r.infeasible : std::string("feasible")) + " (" + why + ")"};
}

// -- 11 ---------------------------------------------------------------------

Outcome knn_matches_sort()
{
  std::mt19937_64 gen(1111);
  int agree = 0;
  int total = 0;
  int distance_ties = 0;
  for (int f = 0; f < 30; ++f) {
    const int rows = 3 + static_cast<int>(gen() % 198);  // up to 200
    const int n = 2 + static_cast<int>(gen() % 3);
    const int classes = 2 + static_cast<int>(gen() % 3);
    std::uniform_int_distribution<int> coord(-3, 3);
    std::uniform_int_distribution<int> label(0, classes - 1);
    Matrix x(rows, n);
    std::vector<int> y(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < n; ++j) {
        x(i, j) = coord(gen);
      }
      y[static_cast<std::size_t>(i)] = label(gen);
    }
    Matrix q(40, n);
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < n; ++j) {
        q(i, j) = coord(gen) + (j == 0 && i % 2 == 0 ? 0.5 : 0.0);
      }
    }
    auto cfg = palp::ProberConfig::defaults(palp::Algorithm::knn);
    cfg.knn_k = 3;
    const auto model = palp::train_prober(x, y, classes, cfg).first;
    const auto got = palp::predict(model, q).labels;
    for (int i = 0; i < 40; ++i) {
      const Vector qi = q.row(i).transpose();
      agree += got[static_cast<std::size_t>(i)] == oracle::knn_predict(x, y, classes, 3, qi) ? 1 : 0;
      ++total;
      std::vector<double> d;
      for (int r = 0; r < rows; ++r) {
        d.push_back((x.row(r) - q.row(i)).squaredNorm());
      }
      std::sort(d.begin(), d.end());
      distance_ties += rows > 3 && d[2] == d[3] ? 1 : 0;
    }
  }
  return {agree == total, std::to_string(agree) + "/" + std::to_string(total) + " agree, " +
                            std::to_string(distance_ties) + " queries with a tie at the k-th neighbour"};
}

}  // namespace

int main()
{
  int warnings = 0;
  palp::set_warning_sink([&](const std::string &) { ++warnings; });

  struct Criterion
  {
    const char * name;
    std::function<Outcome()> check;
    double budget_seconds;  // 0 means no runtime limit
  };
  const std::vector<Criterion> criteria = {
    {"mahalanobis triangular solve vs explicit inverse", mahalanobis_solve, 5.0},
    {"gda equals argmin mahalanobis", gda_equivalence, 10.0},
    {"loss gradients vs central differences", gradient_checks, 0.0},
    {"ledoit-wolf shrinkage range and definiteness", ledoit_wolf_properties, 0.0},
    {"demonstration selection vs exhaustive search", selection_matches, 0.0},
    {"prefix permutation counts", permutation_counts, 0.0},
    {"built-in templates render byte-exact", templates_exact, 0.0},
    {"separable rig end to end", separable_end_to_end, 120.0},
    {"cli report is bitwise reproducible", cli_deterministic, 0.0},
    {"150-class in-context prompt is infeasible", icl_length_limit, 0.0},
    {"k-nn vs brute-force sort", knn_matches_sort, 0.0},
  };

  int failed = 0;
  int index = 0;
  for (const auto & c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception & e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0.0 && secs >= c.budget_seconds) {
      o.pass = false;
      o.detail += ", over the " + fmt("%.0f", c.budget_seconds) + "s budget";
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << index << "  " << c.name << "  ("
              << fmt("%.2f", secs) << "s)  " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed";
  if (warnings > 0) {
    std::cout << ", " << warnings << " warnings";
  }
  std::cout << std::endl;
  return failed == 0 ? 0 : 1;
}
