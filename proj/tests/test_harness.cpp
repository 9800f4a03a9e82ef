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


#include <gtest/gtest.h>

#include <cstdlib>
#include <mutex>
#include <set>
#include <sstream>

#include "palp.hpp"
#include "test_util.hpp"

namespace
{

namespace fs = std::filesystem;
using palp::Mode;
using testutil::example;

palp::EncoderProfile profile(int dim, std::size_t max_len = 2048)
{
  palp::EncoderProfile p;
  p.name = "mock-test";
  p.dim = dim;
  p.max_seq_len = max_len;
  return p;
}

palp::Split sst2_split(const std::vector<int> & labels)
{
  palp::Split s;
  s.schema.task_name = "sst2";
  s.schema.class_names = {"negative", "positive"};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s.examples.push_back(example(static_cast<int>(i), "film number " + std::to_string(i), labels[i]));
  }
  return s;
}

class ShiftedScorer : public palp::LogprobProvider
{
public:
  explicit ShiftedScorer(double shift) : shift_(shift) {}
  std::vector<double> score(const std::string & prompt, const std::vector<std::string> & candidates) override
  {
    auto s = inner_.score(prompt, candidates);
    for (auto & v : s) {
      v += shift_;
    }
    return s;
  }
  std::string kind() const override { return "shifted"; }

private:
  palp::CountingScorer inner_;
  double shift_;
};

class ShortScorer : public palp::LogprobProvider
{
public:
  std::vector<double> score(const std::string &, const std::vector<std::string> &) override { return {0.0}; }
  std::string kind() const override { return "short"; }
};

class RecordingProvider : public palp::EmbeddingProvider
{
public:
  explicit RecordingProvider(int dim) : mock_(dim) {}
  std::vector<std::vector<double>> embed_batch(const std::vector<std::string> & texts) override
  {
    std::lock_guard<std::mutex> lock(mu_);
    seen.insert(texts.begin(), texts.end());
    return mock_.embed_batch(texts);
  }
  std::string kind() const override { return "recording"; }

  std::set<std::string> seen;

private:
  std::mutex mu_;
  palp::MockProvider mock_;
};

const palp::TemplateSpec & sst2()
{
  static const auto t = *palp::find_builtin_template("sst2");
  return t;
}

palp::AppConfig quickstart(const std::vector<std::string> & overrides = {})
{
  return palp::load_app_config(fs::path(PALP_DATA_DIR) / "quickstart" / "quickstart.ini", overrides);
}

palp::ExperimentSpec find_spec(const palp::AppConfig & app, Mode mode, palp::Algorithm a)
{
  for (const auto & s : palp::experiment_matrix(app)) {
    if (s.mode == mode && s.prober.algorithm == a) {
      return s;
    }
  }
  ADD_FAILURE() << "no such spec";
  return {};
}

// -- in-context scoring --------------------------------------------------------

TEST(Icl, CountingScorerFollowsDemoMajority)
{
  const auto shots = sst2_split({1, 1, 1, 0});
  const auto prompt = palp::build_icl_input(shots, example(9, "a new film", 0), sst2(), profile(8));
  palp::CountingScorer scorer;
  EXPECT_EQ(palp::predict_icl(scorer, prompt, sst2()), 1);
  const auto flipped = palp::build_icl_input(sst2_split({0, 0, 1}), example(9, "a new film", 0), sst2(), profile(8));
  EXPECT_EQ(palp::predict_icl(scorer, flipped, sst2()), 0);
}

TEST(Icl, TiesGoToTheFirstLabel)
{
  const auto prompt = palp::build_icl_input(sst2_split({1, 0, 0, 1}), example(9, "x", 1), sst2(), profile(8));
  palp::CountingScorer scorer;
  EXPECT_EQ(palp::predict_icl(scorer, prompt, sst2()), 0);
}

TEST(Icl, ConstantShiftDoesNotChangePrediction)
{
  for (const auto & labels : std::vector<std::vector<int>>{{1, 1, 0}, {0, 0, 1}, {0, 1}}) {
    const auto prompt = palp::build_icl_input(sst2_split(labels), example(9, "x", 0), sst2(), profile(8));
    palp::CountingScorer plain;
    ShiftedScorer shifted(-123.5);
    EXPECT_EQ(palp::predict_icl(plain, prompt, sst2()), palp::predict_icl(shifted, prompt, sst2()));
  }
}

TEST(Icl, ZeroShotsIsJustTheInput)
{
  const auto test_ex = example(9, "very interesting.", 1);
  const auto prompt = palp::build_icl_input(sst2_split({}), test_ex, sst2(), profile(8));
  EXPECT_EQ(prompt.shot_count, 0);
  EXPECT_EQ(prompt.text, palp::render_input(sst2(), test_ex).text);
  EXPECT_EQ(prompt.text, "Sentence 1: very interesting.\nSentiment:");
}

TEST(Icl, PromptHoldsEveryShotInOrder)
{
  const auto shots = sst2_split({0, 0, 0, 0, 1, 1, 1, 1});
  const auto test_ex = example(9, "last", 0);
  const auto prompt = palp::build_icl_input(shots, test_ex, sst2(), profile(8));
  EXPECT_EQ(prompt.shot_count, 8);
  std::string expected;
  for (const auto & ex : shots.examples) {
    expected += palp::render_demonstration(sst2(), ex).text + sst2().joiner;
  }
  expected += palp::render_input(sst2(), test_ex).text;
  EXPECT_EQ(prompt.text, expected);
  EXPECT_EQ(prompt.estimated_units, palp::estimate_units(expected));
}

TEST(Icl, OverBudgetIsLengthLimit)
{
  const auto shots = sst2_split({0, 1, 0, 1});
  EXPECT_EQ(testutil::error_kind_of([&] { palp::build_icl_input(shots, example(9, "x", 0), sst2(), profile(8, 20)); }),
            palp::ErrorKind::length_limit);
}

TEST(Icl, RejectsBadScorerAndMissingVerbalizer)
{
  const auto prompt = palp::build_icl_input(sst2_split({0, 1}), example(9, "x", 0), sst2(), profile(8));
  ShortScorer short_scorer;
  EXPECT_EQ(testutil::error_kind_of([&] { palp::predict_icl(short_scorer, prompt, sst2()); }),
            palp::ErrorKind::runtime);
  const auto bare = *palp::find_builtin_template("clinc150");
  EXPECT_EQ(testutil::error_kind_of([&] { palp::build_icl_input(sst2_split({}), example(1, "x", 0), bare, profile(8)); }),
            palp::ErrorKind::user);
}

// -- metrics and reports -----------------------------------------------------------

TEST(Accuracy, CountsMatches)
{
  EXPECT_DOUBLE_EQ(palp::accuracy({0, 1, 2, 1}, {0, 1, 2, 0}), 0.75);
  EXPECT_DOUBLE_EQ(palp::accuracy({3}, {3}), 1.0);
  EXPECT_EQ(testutil::error_kind_of([] { palp::accuracy({0}, {0, 1}); }), palp::ErrorKind::user);
  EXPECT_EQ(testutil::error_kind_of([] { palp::accuracy({}, {}); }), palp::ErrorKind::user);
}

TEST(MeanStd, PopulationStandardDeviation)
{
  const auto [m, s] = palp::mean_std({0.5, 1.0});
  EXPECT_DOUBLE_EQ(m, 0.75);
  EXPECT_DOUBLE_EQ(s, 0.25);
  const auto [m1, s1] = palp::mean_std({0.4});
  EXPECT_DOUBLE_EQ(m1, 0.4);
  EXPECT_EQ(s1, 0.0);
}

palp::Report sample_report(const std::string & task, const std::string & prober, double mean, double sd)
{
  palp::Report r;
  r.task = task;
  r.mode = "palp_t";
  r.prober = prober;
  r.seeds = {13, 27};
  r.per_seed = {mean - sd, mean + sd};
  r.mean = mean;
  r.stddev = sd;
  r.manifest = {{"encoder", "mock"}};
  return r;
}

TEST(Report, CellFormat)
{
  EXPECT_EQ(palp::format_cell(sample_report("sst2", "gda", 0.69166, 0.021)), "69.17 ±2.1");
  auto r = sample_report("sst2", "gda", 0.0, 0.0);
  r.infeasible = std::string(palp::kInfeasibleLengthLimit);
  EXPECT_EQ(palp::format_cell(r), "infeasible");
}

TEST(Report, JsonRoundTrip)
{
  auto a = sample_report("sst2", "gda", 0.8, 0.05);
  auto b = sample_report("cola", "icl", 0.0, 0.0);
  b.per_seed.clear();
  b.infeasible = std::string(palp::kInfeasibleLengthLimit);
  for (const auto & r : {a, b}) {
    EXPECT_EQ(palp::report_from_json(nlohmann::json::parse(palp::report_to_json(r).dump())), r);
  }
  EXPECT_EQ(testutil::error_kind_of([] { palp::report_from_json({{"task", "x"}}); }), palp::ErrorKind::user);
}

TEST(Report, CsvHasHeaderAndOneRowPerReport)
{
  const std::vector<palp::Report> reports = {
    sample_report("sst2", "gda", 0.8, 0.05), sample_report("sst2", "knn", 0.7, 0.0),
    sample_report("cola, hard", "svm", 0.6, 0.1)};
  const auto csv = palp::render_csv(reports);
  std::istringstream in(csv);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    lines.push_back(line);
  }
  ASSERT_EQ(lines.size(), 4U);
  EXPECT_EQ(lines[0], palp::csv_header());
  EXPECT_NE(lines[3].find("\"cola, hard\""), std::string::npos);
}

TEST(Report, TableMentionsEveryCell)
{
  const std::vector<palp::Report> reports = {sample_report("sst2", "gda", 0.8, 0.05),
                                             sample_report("sst2", "knn", 0.7, 0.0)};
  const auto table = palp::render_table(reports);
  EXPECT_NE(table.find("80.00 ±5.0"), std::string::npos);
  EXPECT_NE(table.find("70.00 ±0.0"), std::string::npos);
}

TEST(Report, CsvLedgerAppends)
{
  testutil::TempDir dir;
  const auto path = dir / "ledger.csv";
  palp::append_csv_ledger(path, {sample_report("sst2", "gda", 0.8, 0.05)});
  palp::append_csv_ledger(path, {sample_report("sst2", "knn", 0.7, 0.0)});
  const auto text = palp::read_file(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_EQ(text.rfind(palp::csv_header(), 0), 0U);
}

// -- experiments --------------------------------------------------------------------

TEST(Experiment, TemplatedGdaSeparatesQuickstart)
{
  const auto app = quickstart();
  auto spec = find_spec(app, Mode::palp_t, palp::Algorithm::gda);
  const auto data = palp::load_task(spec.task);
  auto gateway = palp::make_gateway(app);
  const auto result = palp::run_experiment(spec, data, gateway);
  EXPECT_EQ(result.report.per_seed.size(), 5U);
  EXPECT_DOUBLE_EQ(result.report.mean, 1.0);
  EXPECT_DOUBLE_EQ(result.report.stddev, 0.0);
  EXPECT_FALSE(result.report.infeasible);
  EXPECT_EQ(result.report.prober, "gda");
}

TEST(Experiment, OneSeedHasZeroSpread)
{
  const auto app = quickstart({"experiment.seeds=13"});
  auto spec = find_spec(app, Mode::baseline, palp::Algorithm::logreg);
  auto gateway = palp::make_gateway(app);
  const auto report = palp::run_experiment(spec, palp::load_task(spec.task), gateway).report;
  ASSERT_EQ(report.per_seed.size(), 1U);
  EXPECT_EQ(report.stddev, 0.0);
  EXPECT_EQ(report.mean, report.per_seed[0]);
  const auto [m, s] = palp::mean_std(report.per_seed);
  EXPECT_EQ(m, report.mean);
  EXPECT_EQ(s, report.stddev);
}

TEST(Experiment, BaselineEmbedsTheSamePromptsAsAnEmptyTemplate)
{
  const auto app = quickstart({"experiment.seeds=13"});
  auto baseline = find_spec(app, Mode::baseline, palp::Algorithm::knn);
  auto templated = baseline;
  templated.mode = Mode::palp_t;
  templated.template_spec = palp::identity_template(" ");
  const auto data = palp::load_task(baseline.task);

  auto p1 = std::make_shared<RecordingProvider>(16);
  auto p2 = std::make_shared<RecordingProvider>(16);
  palp::Gateway g1(profile(16), p1);
  palp::Gateway g2(profile(16), p2);
  const auto r1 = palp::run_experiment(baseline, data, g1).report;
  const auto r2 = palp::run_experiment(templated, data, g2).report;
  EXPECT_EQ(p1->seen, p2->seen);
  EXPECT_FALSE(p1->seen.empty());
  EXPECT_EQ(r1.per_seed, r2.per_seed);
}

TEST(Experiment, OverlongIclIsInfeasible)
{
  const auto app = palp::load_app_config(fs::path(PALP_DATA_DIR) / "intent150" / "icl.ini", {"experiment.seeds=13"});
  const auto specs = palp::experiment_matrix(app);
  ASSERT_EQ(specs.size(), 1U);
  auto gateway = palp::make_gateway(app);
  auto scorer = palp::make_scorer(app);
  const auto report = palp::run_experiment(specs[0], palp::load_task(specs[0].task), gateway, scorer.get()).report;
  ASSERT_TRUE(report.infeasible);
  EXPECT_EQ(*report.infeasible, palp::kInfeasibleLengthLimit);
  EXPECT_TRUE(report.per_seed.empty());
  EXPECT_EQ(report.prober, "icl");
}

TEST(Experiment, IclWithoutScorerIsUserError)
{
  const auto app = palp::load_app_config(fs::path(PALP_DATA_DIR) / "intent150" / "icl.ini", {"experiment.seeds=13"});
  const auto spec = palp::experiment_matrix(app).at(0);
  auto gateway = palp::make_gateway(app);
  EXPECT_EQ(testutil::error_kind_of([&] { palp::run_experiment(spec, palp::load_task(spec.task), gateway); }),
            palp::ErrorKind::user);
}

TEST(ExperimentSpec, ValidateRejectsBadSettings)
{
  const auto app = quickstart();
  const auto good = find_spec(app, Mode::palp_d, palp::Algorithm::gda);
  auto check = [&](auto mutate) {
    auto s = good;
    mutate(s);
    return testutil::error_kind_of([&] { s.validate(); });
  };
  EXPECT_EQ(check([](palp::ExperimentSpec & s) { s.seeds.clear(); }), palp::ErrorKind::user);
  EXPECT_EQ(check([](palp::ExperimentSpec & s) { s.seeds = {1, 1}; }), palp::ErrorKind::user);
  EXPECT_EQ(check([](palp::ExperimentSpec & s) { s.shots_per_class = 0; }), palp::ErrorKind::user);
  EXPECT_EQ(check([](palp::ExperimentSpec & s) { s.template_spec.verbalizer.clear(); }), palp::ErrorKind::user);
  EXPECT_EQ(check([](palp::ExperimentSpec & s) {
              s.mode = Mode::icl;
              s.shots_per_class.reset();
            }),
            palp::ErrorKind::user);
  EXPECT_EQ(check([](palp::ExperimentSpec & s) { s.prefix_plan.permutation_cap = 0; }), palp::ErrorKind::user);
}

// -- configuration ---------------------------------------------------------------------

TEST(AppConfig, QuickstartMatrix)
{
  const auto specs = palp::experiment_matrix(quickstart());
  ASSERT_EQ(specs.size(), 15U);
  EXPECT_EQ(specs.front().seeds, (std::vector<std::uint64_t>{13, 27, 250, 583, 915}));
  EXPECT_EQ(*specs.front().shots_per_class, 4);
  for (const auto & s : specs) {
    EXPECT_EQ(s.prober.batch_size, 2);
    if (s.prober.algorithm == palp::Algorithm::slp) {
      EXPECT_DOUBLE_EQ(s.prober.learning_rate, 1e-2);
      EXPECT_EQ(s.prober.optimizer, palp::Optimizer::adam);
    }
  }
}

TEST(AppConfig, UnknownKeysAreRejected)
{
  testutil::TempDir dir;
  const auto path = testutil::write(dir / "c.ini", "[task]\nname = t\nclasses = a,b\ncolour = red\n");
  EXPECT_EQ(testutil::error_kind_of([&] { palp::load_app_config(path); }), palp::ErrorKind::user);
  const auto path2 = testutil::write(dir / "d.ini", "[tusk]\nname = t\n");
  EXPECT_EQ(testutil::error_kind_of([&] { palp::load_app_config(path2); }), palp::ErrorKind::user);
  EXPECT_EQ(testutil::error_kind_of([&] { palp::load_app_config(dir / "missing.ini"); }), palp::ErrorKind::user);
}

TEST(AppConfig, EnvironmentAndOverrides)
{
  setenv("PALP_ENDPOINT", "http://127.0.0.1:9/v1", 1);
  setenv("PALP_CACHE_DIR", "/tmp/palp-env-cache", 1);
  const auto app = quickstart({"experiment.shots=full", "knn.k=5"});
  unsetenv("PALP_ENDPOINT");
  unsetenv("PALP_CACHE_DIR");
  EXPECT_EQ(app.cfg.get("encoder", "url", ""), "http://127.0.0.1:9/v1");
  EXPECT_EQ(app.cfg.get("scorer", "url", ""), "http://127.0.0.1:9/v1");
  EXPECT_EQ(app.cfg.get("encoder", "cache_dir", ""), "/tmp/palp-env-cache");
  const auto spec = find_spec(app, Mode::palp_t, palp::Algorithm::knn);
  EXPECT_FALSE(spec.few_shot());
  EXPECT_EQ(spec.prober.knn_k, 5);
  EXPECT_EQ(spec.prober.batch_size, 16);
  EXPECT_EQ(testutil::error_kind_of([] { quickstart({"noassignment"}); }), palp::ErrorKind::user);
  EXPECT_EQ(testutil::error_kind_of([] { quickstart({"knn.depth=3"}); }), palp::ErrorKind::user);
}

TEST(AppConfig, Seeds)
{
  EXPECT_EQ(palp::parse_seeds({"13", "0"}), (std::vector<std::uint64_t>{13, 0}));
  EXPECT_EQ(testutil::error_kind_of([] { palp::parse_seeds({"-1"}); }), palp::ErrorKind::user);
  EXPECT_EQ(testutil::error_kind_of([] { palp::parse_seeds({"x"}); }), palp::ErrorKind::user);
}

TEST(AppConfig, ModeNames)
{
  for (auto m : {Mode::baseline, Mode::palp_t, Mode::palp_d, Mode::icl}) {
    EXPECT_EQ(palp::parse_mode(palp::mode_name(m)), m);
  }
  EXPECT_EQ(testutil::error_kind_of([] { palp::parse_mode("zero_shot"); }), palp::ErrorKind::user);
}

}  // namespace
