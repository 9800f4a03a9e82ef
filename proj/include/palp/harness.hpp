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

#ifndef PALP_HARNESS_HPP_
#define PALP_HARNESS_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/demo_select.hpp"
#include "palp/error.hpp"
#include "palp/gateway.hpp"
#include "palp/icl.hpp"
#include "palp/io.hpp"
#include "palp/probers/model.hpp"
#include "palp/templating.hpp"

namespace palp
{

enum class Mode
{
  baseline,
  palp_t,
  palp_d,
  icl
};

inline std::string mode_name(Mode m)
{
  switch (m) {
    case Mode::baseline: return "baseline";
    case Mode::palp_t: return "palp_t";
    case Mode::palp_d: return "palp_d";
    case Mode::icl: return "icl";
  }
  return "?";
}

/// Column labels of the result table.
inline std::string mode_label(Mode m)
{
  switch (m) {
    case Mode::baseline: return "B";
    case Mode::palp_t: return "T";
    case Mode::palp_d: return "D";
    case Mode::icl: return "ICL";
  }
  return "?";
}

inline Mode parse_mode(const std::string & s)
{
  for (auto m : {Mode::baseline, Mode::palp_t, Mode::palp_d, Mode::icl}) {
    if (mode_name(m) == s) {
      return m;
    }
  }
  throw user_error("unknown mode '" + s + "' (expected baseline, palp_t, palp_d or icl)");
}

inline const std::vector<std::uint64_t> & default_seeds()
{
  static const std::vector<std::uint64_t> seeds = {13, 27, 250, 583, 915};
  return seeds;
}

inline constexpr std::string_view kInfeasibleLengthLimit = "infeasible: length limit";

struct TaskData
{
  TaskSchema schema;
  fs::path train_path;
  fs::path test_path;
  std::optional<DataFormat> format;  ///< guessed from the extension when absent
};

struct LoadedTask
{
  Split train;
  Split test;
};

inline LoadedTask load_task(const TaskData & task)
{
  task.schema.validate();
  LoadedTask out;
  out.train = load_dataset(task.train_path, task.format.value_or(guess_data_format(task.train_path)), task.schema);
  out.test = load_dataset(task.test_path, task.format.value_or(guess_data_format(task.test_path)), task.schema);
  return out;
}

struct ExperimentSpec
{
  TaskData task;
  TemplateSpec template_spec;
  Mode mode = Mode::palp_t;
  ProberConfig prober;                  ///< unused by icl
  std::optional<int> shots_per_class;   ///< absent means full training data
  std::vector<std::uint64_t> seeds = default_seeds();
  PrefixPlan prefix_plan;               ///< palp_d only; seed and joiner are set per run
  SelectionOptions selection;
  std::string icl_separator = " ";
  bool icl_shuffle = false;             ///< shuffle demonstration order per seed

  bool few_shot() const { return shots_per_class.has_value(); }

  void validate() const
  {
    if (seeds.empty()) {
      throw user_error("at least one seed is required");
    }
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw user_error("seeds must be distinct");
    }
    if (shots_per_class && *shots_per_class < 1) {
      throw user_error("shots per class must be >= 1");
    }
    if (mode == Mode::icl && !few_shot()) {
      throw user_error("icl mode needs a shots-per-class setting");
    }
    if ((mode == Mode::palp_d || mode == Mode::icl) && !template_spec.has_verbalizer()) {
      throw user_error(mode_name(mode) + " needs a template with a verbalizer");
    }
    if (mode != Mode::icl) {
      prober.validate();
    }
    if (prefix_plan.permutation_cap < 1) {
      throw user_error("permutation cap must be >= 1");
    }
  }
};

/// Training prompts and the test-time prefix for one seed.
struct SeedPrompts
{
  Split train;
  std::optional<DemonstrationSet> demos;
  std::vector<std::string> train_texts;
  Labels train_labels;
  std::string test_prefix;
};

/// Template used to render inputs in a given mode. Baseline feeds raw text;
/// pair inputs are joined by one space.
inline TemplateSpec input_template(const ExperimentSpec & spec)
{
  return spec.mode == Mode::baseline ? identity_template(" ") : spec.template_spec;
}

inline Split training_split(const ExperimentSpec & spec, const Split & full, std::uint64_t seed)
{
  if (!spec.few_shot()) {
    return full;
  }
  return sample_few_shot(full, {*spec.shots_per_class, seed, false});
}

/// Few-shot palp_d trains on permuted prefixes; full-data palp_d uses the
/// unified prefix for training too.
inline PrefixPlan resolved_prefix_plan(const ExperimentSpec & spec, std::uint64_t seed)
{
  PrefixPlan plan = spec.prefix_plan;
  plan.seed = seed;
  plan.joiner = spec.template_spec.joiner;
  if (!spec.few_shot()) {
    plan.mode = PrefixMode::unified;
  }
  return plan;
}

inline SeedPrompts prepare_prompts(const ExperimentSpec & spec, const Split & full_train, std::uint64_t seed, Gateway & gateway)
{
  SeedPrompts out;
  out.train = training_split(spec, full_train, seed);
  const auto tmpl = input_template(spec);
  if (spec.mode != Mode::palp_d) {
    for (const auto & ex : out.train.examples) {
      out.train_texts.push_back(render_input(tmpl, ex).text);
      out.train_labels.push_back(ex.label);
    }
    return out;
  }
  out.demos = select_demonstrations(out.train, spec.template_spec, gateway, spec.selection);
  for (auto & a : augment_training_set(out.train, *out.demos, resolved_prefix_plan(spec, seed), spec.template_spec)) {
    out.train_texts.push_back(std::move(a.text));
    out.train_labels.push_back(a.label);
  }
  out.test_prefix = unified_inference_prefix(*out.demos);
  return out;
}

inline std::vector<std::string> test_prompts(const ExperimentSpec & spec, const Split & test, const std::string & prefix)
{
  const auto tmpl = input_template(spec);
  std::vector<std::string> out;
  out.reserve(test.size());
  for (const auto & ex : test.examples) {
    out.push_back(prefix + render_input(tmpl, ex).text);
  }
  return out;
}

/// (# equal) / length.
inline double accuracy(const Labels & pred, const Labels & gold)
{
  if (pred.size() != gold.size()) {
    throw user_error("accuracy: " + std::to_string(pred.size()) + " predictions for " + std::to_string(gold.size()) +
                     " gold labels");
  }
  if (pred.empty()) {
    throw user_error("accuracy: no predictions");
  }
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    hit += pred[i] == gold[i] ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

struct Report
{
  std::string task;
  std::string mode;
  std::string prober;  ///< algorithm name, or "icl"
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;
  double mean = 0.0;
  double stddev = 0.0;  ///< population standard deviation over seeds
  std::optional<std::string> infeasible;
  nlohmann::json manifest = nlohmann::json::object();

  bool operator==(const Report &) const = default;
};

/// Arithmetic mean and population standard deviation.
inline std::pair<double, double> mean_std(const std::vector<double> & xs)
{
  if (xs.empty()) {
    return {0.0, 0.0};
  }
  double mean = 0.0;
  for (double x : xs) {
    mean += x;
  }
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) {
    var += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

inline nlohmann::json template_to_json(const TemplateSpec & t)
{
  return {{"prefix", t.prefix}, {"infix", t.infix},     {"postfix", t.postfix},
          {"joiner", t.joiner}, {"verbalizer", t.verbalizer}, {"arity", arity_name(t.arity)}};
}

/// Every resolved setting that can change a result.
inline nlohmann::json build_manifest(const ExperimentSpec & spec, const Gateway & gateway)
{
  nlohmann::json m;
  m["task"] = {
    {"name", spec.task.schema.task_name},
    {"classes", spec.task.schema.class_names},
    {"pair", spec.task.schema.is_pair},
    {"train", spec.task.train_path.generic_string()},
    {"test", spec.task.test_path.generic_string()},
  };
  m["mode"] = mode_name(spec.mode);
  m["template"] = template_to_json(input_template(spec));
  m["shots_per_class"] = spec.shots_per_class ? nlohmann::json(*spec.shots_per_class) : nlohmann::json("full");
  m["seeds"] = spec.seeds;
  m["seed_scope"] = "sampling and training";
  m["encoder"] = {
    {"name", gateway.profile().name},
    {"dim", gateway.profile().dim},
    {"max_seq_len", gateway.profile().max_seq_len},
    {"provider", gateway.provider_kind()},
    {"truncate", gateway.options().truncate},
  };
  if (spec.mode == Mode::icl) {
    m["icl"] = {{"separator", spec.icl_separator}, {"shuffle", spec.icl_shuffle}, {"tie_rule", "smallest label"}};
  } else {
    m["prober"] = spec.prober.to_json();
    m["tie_rule"] = "smallest label";
    if (spec.prober.algorithm == Algorithm::knn) {
      m["knn_distance_tie_rule"] = "smaller training index";
    }
  }
  if (spec.mode == Mode::palp_d) {
    m["prefix_plan"] = {
      {"mode", spec.few_shot() && spec.prefix_plan.mode == PrefixMode::permuted ? "permuted" : "unified"},
      {"permutation_cap", spec.prefix_plan.permutation_cap},
      {"inference_prefix", "unified, ascending class order"},
    };
    m["selection"] = {
      {"stats", selection_stats_name(spec.selection.stats)},
      {"raw_inputs", spec.selection.raw_inputs},
      {"shrinkage", "ledoit-wolf"},
      {"tie_rule", "smaller example id"},
    };
  }
  m["std"] = "population";
  return m;
}

struct RunResult
{
  Report report;
  std::map<std::string, double> seconds;  ///< wall clock per phase, summed over seeds
};

namespace detail
{
class PhaseTimer
{
public:
  PhaseTimer(std::map<std::string, double> & sink, std::string phase)
  : sink_(sink), phase_(std::move(phase)), start_(std::chrono::steady_clock::now())
  {
  }
  ~PhaseTimer()
  {
    sink_[phase_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  PhaseTimer(const PhaseTimer &) = delete;
  PhaseTimer & operator=(const PhaseTimer &) = delete;

private:
  std::map<std::string, double> & sink_;
  std::string phase_;
  std::chrono::steady_clock::time_point start_;
};

template <typename F>
auto in_phase(const std::string & phase, F && f) -> decltype(f())
{
  try {
    return f();
  } catch (const LengthLimitError &) {
    throw;
  } catch (const Error & e) {
    throw with_context(e, phase);
  }
}

inline double run_linear_probe_seed(
  const ExperimentSpec & spec, const LoadedTask & data, std::uint64_t seed, Gateway & gateway,
  std::map<std::string, double> & seconds)
{
  const int num_classes = spec.task.schema.num_classes();
  SeedPrompts prompts;
  {
    PhaseTimer t(seconds, "prepare");
    prompts = in_phase("prepare", [&] { return prepare_prompts(spec, data.train, seed, gateway); });
  }
  Matrix x_train;
  Matrix x_test;
  {
    PhaseTimer t(seconds, "embed");
    x_train = in_phase("embed training prompts", [&] { return gateway.embed(prompts.train_texts); });
    x_test =
      in_phase("embed test prompts", [&] { return gateway.embed(test_prompts(spec, data.test, prompts.test_prefix)); });
  }
  TrainedModel model;
  {
    PhaseTimer t(seconds, "train");
    ProberConfig cfg = spec.prober;
    cfg.seed = seed;
    model = in_phase("train", [&] { return train_prober(x_train, prompts.train_labels, num_classes, cfg).first; });
  }
  PhaseTimer t(seconds, "evaluate");
  return in_phase("evaluate", [&] { return accuracy(predict(model, x_test).labels, data.test.labels()); });
}

inline double run_icl_seed(
  const ExperimentSpec & spec, const LoadedTask & data, std::uint64_t seed, const EncoderProfile & profile,
  LogprobProvider & scorer, std::map<std::string, double> & seconds)
{
  Split shots = in_phase("sample", [&] { return training_split(spec, data.train, seed); });
  if (spec.icl_shuffle) {
    Rng rng(seed);
    rng.shuffle(std::span<LabeledExample>(shots.examples));
  }
  std::vector<IclPrompt> prompts;
  {
    PhaseTimer t(seconds, "prepare");
    for (const auto & ex : data.test.examples) {
      prompts.push_back(build_icl_input(shots, ex, spec.template_spec, profile));
    }
  }
  PhaseTimer t(seconds, "score");
  Labels pred;
  pred.reserve(prompts.size());
  for (const auto & p : prompts) {
    pred.push_back(in_phase("score", [&] { return predict_icl(scorer, p, spec.template_spec, spec.icl_separator); }));
  }
  return accuracy(pred, data.test.labels());
}
}  // namespace detail

/// Runs every seed. A prompt over the encoder's length budget turns the
/// whole report into the infeasible marker; any other failure aborts.
inline RunResult run_experiment(
  const ExperimentSpec & spec, const LoadedTask & data, Gateway & gateway, LogprobProvider * scorer = nullptr)
{
  spec.validate();
  if (spec.mode == Mode::icl && scorer == nullptr) {
    throw user_error("icl mode needs a scoring provider");
  }
  RunResult out;
  Report & r = out.report;
  r.task = spec.task.schema.task_name;
  r.mode = mode_name(spec.mode);
  r.prober = spec.mode == Mode::icl ? "icl" : algorithm_name(spec.prober.algorithm);
  r.seeds = spec.seeds;
  r.manifest = build_manifest(spec, gateway);
  try {
    for (const auto seed : spec.seeds) {
      const std::string where = "seed " + std::to_string(seed);
      try {
        r.per_seed.push_back(
          spec.mode == Mode::icl ? detail::run_icl_seed(spec, data, seed, gateway.profile(), *scorer, out.seconds)
                                 : detail::run_linear_probe_seed(spec, data, seed, gateway, out.seconds));
      } catch (const LengthLimitError &) {
        throw;
      } catch (const Error & e) {
        throw with_context(e, where);
      }
    }
  } catch (const LengthLimitError & e) {
    r.per_seed.clear();
    r.infeasible = std::string(kInfeasibleLengthLimit);
    r.manifest["infeasible_detail"] = e.what();
    return out;
  }
  std::tie(r.mean, r.stddev) = mean_std(r.per_seed);
  return out;
}

// -- rendering -----------------------------------------------------------------

inline nlohmann::json report_to_json(const Report & r)
{
  nlohmann::json j = {
    {"task", r.task},
    {"mode", r.mode},
    {"prober", r.prober},
    {"seeds", r.seeds},
    {"per_seed", r.per_seed},
    {"mean", r.mean},
    {"std", r.stddev},
    {"manifest", r.manifest},
  };
  j["infeasible"] = r.infeasible ? nlohmann::json(*r.infeasible) : nlohmann::json(nullptr);
  return j;
}

inline Report report_from_json(const nlohmann::json & j)
{
  try {
    Report r;
    r.task = j.at("task").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.prober = j.at("prober").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.per_seed = j.at("per_seed").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.stddev = j.at("std").get<double>();
    r.manifest = j.value("manifest", nlohmann::json::object());
    if (j.contains("infeasible") && !j["infeasible"].is_null()) {
      r.infeasible = j["infeasible"].get<std::string>();
    }
    return r;
  } catch (const nlohmann::json::exception & e) {
    throw user_error(std::string("malformed report JSON: ") + e.what());
  }
}

/// "69.17 ±2.1": mean and std in percent.
inline std::string format_cell(const Report & r)
{
  if (r.infeasible) {
    return "infeasible";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ±%.1f", 100.0 * r.mean, 100.0 * r.stddev);
  return buf;
}

namespace detail
{
inline std::string full_precision(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::size_t display_width(const std::string & s)
{
  std::size_t w = 0;
  for (unsigned char c : s) {
    w += (c & 0xC0) != 0x80 ? 1 : 0;
  }
  return w;
}

inline std::string csv_escape(const std::string & s)
{
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    out += c == '"' ? std::string("\"\"") : std::string(1, c);
  }
  return out + "\"";
}

inline std::string pad(const std::string & s, std::size_t width)
{
  const auto w = display_width(s);
  return s + std::string(width > w ? width - w : 0, ' ');
}
}  // namespace detail

/// One row per prober and one column per mode, per task. ICL results get
/// their own row.
inline std::string render_table(const std::vector<Report> & reports)
{
  std::vector<std::string> tasks;
  for (const auto & r : reports) {
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) {
      tasks.push_back(r.task);
    }
  }
  std::ostringstream out;
  for (const auto & task : tasks) {
    std::vector<std::string> modes;
    std::vector<std::string> rows;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    for (const auto & r : reports) {
      if (r.task != task) {
        continue;
      }
      const auto column = mode_label(parse_mode(r.mode));
      const auto row = r.prober == "icl" ? std::string("ICL") : algorithm_label(parse_algorithm(r.prober));
      if (std::find(modes.begin(), modes.end(), column) == modes.end()) {
        modes.push_back(column);
      }
      if (std::find(rows.begin(), rows.end(), row) == rows.end()) {
        rows.push_back(row);
      }
      cells[{row, column}] = format_cell(r);
    }
    std::size_t first = 6;
    for (const auto & row : rows) {
      first = std::max(first, row.size() + 2);
    }
    std::size_t width = 12;
    for (const auto & [_, cell] : cells) {
      width = std::max(width, detail::display_width(cell) + 2);
    }
    const auto emit = [&](std::string line) {
      while (!line.empty() && line.back() == ' ') {
        line.pop_back();
      }
      out << line << '\n';
    };
    out << task << '\n';
    std::string header = detail::pad("", first);
    for (const auto & m : modes) {
      header += detail::pad(m, width);
    }
    emit(header);
    for (const auto & row : rows) {
      std::string line = detail::pad(row, first);
      for (const auto & m : modes) {
        const auto it = cells.find({row, m});
        line += detail::pad(it == cells.end() ? "-" : it->second, width);
      }
      emit(line);
    }
  }
  return out.str();
}

inline const std::string & csv_header()
{
  static const std::string h = "task,mode,prober,shots,seeds,per_seed,mean,std,status";
  return h;
}

inline std::string csv_row(const Report & r)
{
  std::string seeds;
  std::string per_seed;
  for (std::size_t i = 0; i < r.seeds.size(); ++i) {
    seeds += (i > 0 ? ";" : "") + std::to_string(r.seeds[i]);
  }
  for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
    per_seed += (i > 0 ? ";" : "") + detail::full_precision(r.per_seed[i]);
  }
  std::string shots = "full";
  if (r.manifest.contains("shots_per_class") && r.manifest["shots_per_class"].is_number()) {
    shots = std::to_string(r.manifest["shots_per_class"].get<int>());
  }
  std::string row = detail::csv_escape(r.task) + ',' + r.mode + ',' + r.prober + ',' + shots + ',' + seeds + ',' +
                    per_seed + ',' + detail::full_precision(r.mean) + ',' + detail::full_precision(r.stddev) + ',';
  row += r.infeasible ? detail::csv_escape(*r.infeasible) : std::string("ok");
  return row;
}

inline std::string render_csv(const std::vector<Report> & reports)
{
  std::string out = csv_header() + "\n";
  for (const auto & r : reports) {
    out += csv_row(r) + "\n";
  }
  return out;
}

inline std::string render_json(const std::vector<Report> & reports)
{
  nlohmann::json arr = nlohmann::json::array();
  for (const auto & r : reports) {
    arr.push_back(report_to_json(r));
  }
  return arr.dump(2) + "\n";
}

enum class ReportFormat
{
  table,
  csv,
  json
};

inline ReportFormat parse_report_format(const std::string & s)
{
  if (s == "table") {
    return ReportFormat::table;
  }
  if (s == "csv") {
    return ReportFormat::csv;
  }
  if (s == "json") {
    return ReportFormat::json;
  }
  throw user_error("unknown report format '" + s + "' (expected table, csv or json)");
}

inline void emit_report(const std::vector<Report> & reports, ReportFormat format, std::ostream & sink)
{
  switch (format) {
    case ReportFormat::table: sink << render_table(reports); break;
    case ReportFormat::csv: sink << render_csv(reports); break;
    case ReportFormat::json: sink << render_json(reports); break;
  }
  sink.flush();
  if (!sink) {
    throw runtime_error("failed to write the report");
  }
}

/// Append rows to a CSV ledger, writing the header when the file is new.
/// The file is rewritten atomically.
inline void append_csv_ledger(const fs::path & path, const std::vector<Report> & reports)
{
  std::string text = fs::exists(path) ? read_file(path) : csv_header() + "\n";
  if (!text.empty() && text.back() != '\n') {
    text += '\n';
  }
  for (const auto & r : reports) {
    text += csv_row(r) + "\n";
  }
  write_file_atomic(path, text);
}

}  // namespace palp

#endif  // PALP_HARNESS_HPP_
