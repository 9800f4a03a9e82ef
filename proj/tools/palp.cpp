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

// palp: command-line driver for prompt-augmented linear probing runs.

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "palp.hpp"

namespace
{

using palp::fs::path;

std::size_t edit_distance(const std::string & a, const std::string & b)
{
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) {
    row[j] = j;
  }
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

palp::TemplateSpec builtin_or_suggest(const std::string & task)
{
  if (auto t = palp::find_builtin_template(task)) {
    return *t;
  }
  std::vector<std::string> close;
  std::vector<std::string> all;
  for (const auto & [name, _] : palp::builtin_templates()) {
    all.push_back(name);
    if (edit_distance(name, task) <= 3 || name.find(task) != std::string::npos) {
      close.push_back(name);
    }
  }
  const auto & list = close.empty() ? all : close;
  std::string msg = "unknown task '" + task + "'; did you mean one of:";
  for (const auto & n : list) {
    msg += " " + n;
  }
  throw palp::user_error(msg);
}

// -- templates -------------------------------------------------------------------

struct TemplatesArgs
{
  std::string task;
  std::string text;
  std::string text_b;
  int label = -1;
};

void cmd_templates_list()
{
  for (const auto & [name, _] : palp::builtin_templates()) {
    std::cout << name << '\n';
  }
}

void cmd_templates_show(const TemplatesArgs & a, bool has_text, bool has_text_b)
{
  const auto spec = builtin_or_suggest(a.task);
  if (!has_text) {
    std::cout << palp::template_pattern(spec) << '\n';
    std::cout << "verbalizer:";
    if (spec.verbalizer.empty()) {
      std::cout << " (none)";
    }
    for (std::size_t i = 0; i < spec.verbalizer.size(); ++i) {
      std::cout << ' ' << i << '=' << spec.verbalizer[i];
    }
    std::cout << '\n';
    return;
  }
  palp::LabeledExample ex;
  ex.text_a = palp::unescape(a.text);
  if (has_text_b) {
    ex.text_b = palp::unescape(a.text_b);
  }
  if (a.label >= 0) {
    if (!spec.has_verbalizer() || a.label >= static_cast<int>(spec.verbalizer.size())) {
      throw palp::user_error("--label " + std::to_string(a.label) + " has no verbalizer entry for '" + a.task + "'");
    }
    ex.label = a.label;
    std::cout << palp::render_demonstration(spec, ex).text << '\n';
  } else {
    std::cout << palp::render_input(spec, ex).text << '\n';
  }
}

// -- embed ----------------------------------------------------------------------

struct EmbedArgs
{
  std::string input;
  std::string out;
  std::string config;
  std::string provider;
  std::string name;
  std::string store;
  std::string url;
  std::string model;
  std::string cache_dir;
  int dim = 0;
};

/// One prompt per line with backslash escapes, or JSON lines holding a
/// string or an object with "text" and an optional integer "label".
void read_prompts(const path & file, std::vector<std::string> & prompts, palp::Labels & labels)
{
  if (!palp::fs::exists(file)) {
    throw palp::user_error("input file not found: " + file.string());
  }
  const bool jsonl = file.extension() == ".jsonl";
  std::istringstream in(palp::read_file(file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (palp::trim(line).empty()) {
      continue;
    }
    if (!jsonl) {
      prompts.push_back(palp::unescape(line));
      labels.push_back(-1);
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.is_string()) {
        prompts.push_back(j.get<std::string>());
        labels.push_back(-1);
      } else {
        prompts.push_back(j.at("text").get<std::string>());
        labels.push_back(j.contains("label") && j["label"].is_number_integer() ? j["label"].get<int>() : -1);
      }
    } catch (const nlohmann::json::exception & e) {
      throw palp::user_error(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (prompts.empty()) {
    throw palp::user_error(file.string() + ": no prompts");
  }
}

void cmd_embed(const EmbedArgs & a)
{
  std::vector<std::string> prompts;
  palp::Labels labels;
  read_prompts(a.input, prompts, labels);

  palp::AppConfig app;
  if (!a.config.empty()) {
    app = palp::load_app_config(a.config);
  } else {
    palp::apply_environment(app.cfg);
  }
  const auto set_if = [&](const std::string & key, const std::string & v) {
    if (!v.empty()) {
      app.cfg.set("encoder", key, v);
    }
  };
  set_if("provider", a.provider);
  set_if("name", a.name);
  set_if("store", a.store);
  set_if("url", a.url);
  set_if("model", a.model);
  set_if("cache_dir", a.cache_dir);
  if (a.dim > 0) {
    app.cfg.set("encoder", "dim", std::to_string(a.dim));
  }
  auto gateway = palp::make_gateway(app);
  const auto matrix = gateway.embed(prompts);
  palp::export_embeddings(matrix, labels, a.out, &prompts);
  const auto stats = gateway.stats();
  std::cout << "embedded " << matrix.rows() << " prompts, dim " << matrix.cols() << '\n'
            << "provider calls: " << stats.provider_calls << ", cache hits: " << stats.cache_hits << '\n';
}

// -- select-demos, train, eval ------------------------------------------------------

struct CommonArgs
{
  std::string config;
  std::vector<std::string> overrides;
};

palp::AppConfig load_config(const CommonArgs & c) { return palp::load_app_config(c.config, c.overrides); }

std::uint64_t first_seed(const palp::ExperimentSpec & spec, const std::optional<std::uint64_t> & seed)
{
  return seed ? *seed : spec.seeds.front();
}

void cmd_select_demos(const CommonArgs & c, const std::string & out, const std::optional<std::uint64_t> & seed)
{
  const auto app = load_config(c);
  auto spec = palp::base_spec(app, palp::Mode::palp_d);
  if (!spec.template_spec.has_verbalizer()) {
    throw palp::user_error(
      "the template has no verbalizer; add 'verbalizer = a|b|...' to the [template] section, one entry per class");
  }
  const auto data = palp::load_task(spec.task);
  auto gateway = palp::make_gateway(app);
  const auto train = palp::training_split(spec, data.train, first_seed(spec, seed));
  const auto demos = palp::select_demonstrations(train, spec.template_spec, gateway, spec.selection);
  palp::save_demonstrations(demos, out);
  for (const auto & d : demos.entries) {
    std::cout << "class " << d.class_id << " (" << spec.task.schema.class_names[static_cast<std::size_t>(d.class_id)]
              << "): id " << d.example_id << ", source " << d.source_id << ", distance " << d.score << '\n';
  }
}

palp::ExperimentSpec spec_for(const palp::AppConfig & app, const std::string & mode, const std::string & prober)
{
  const auto m = palp::parse_mode(mode);
  if (m == palp::Mode::icl) {
    throw palp::user_error("icl has no trainable prober; use `palp run` with modes = icl");
  }
  auto spec = palp::base_spec(app, m);
  spec.prober = palp::prober_from_config(app.cfg, palp::parse_algorithm(prober), spec.few_shot());
  spec.validate();
  return spec;
}

void cmd_train(
  const CommonArgs & c, const std::string & mode, const std::string & prober, const std::optional<std::uint64_t> & seed,
  const std::string & out)
{
  const auto app = load_config(c);
  auto spec = spec_for(app, mode, prober);
  const auto s = first_seed(spec, seed);
  const auto data = palp::load_task(spec.task);
  auto gateway = palp::make_gateway(app);
  const auto prompts = palp::prepare_prompts(spec, data.train, s, gateway);
  const auto x = gateway.embed(prompts.train_texts);
  auto cfg = spec.prober;
  cfg.seed = s;
  auto [model, report] = palp::train_prober(x, prompts.train_labels, spec.task.schema.num_classes(), cfg);
  model.metadata = {
    {"task", spec.task.schema.task_name},
    {"mode", mode},
    {"seed", s},
    {"test_prefix", prompts.test_prefix},
    {"template", palp::template_to_json(palp::input_template(spec))},
    {"encoder", gateway.profile().name},
  };
  palp::save_model(model, out);
  std::cout << "trained " << palp::algorithm_name(cfg.algorithm) << " on " << x.rows() << " prompts (dim " << x.cols()
            << ")";
  if (report.epochs_run > 0) {
    std::cout << ", " << report.epochs_run << " epochs, final loss " << report.final_loss;
  }
  std::cout << '\n';
}

void cmd_eval(const CommonArgs & c, const std::string & model_path, const std::string & predictions)
{
  const auto app = load_config(c);
  const auto model = palp::load_model(model_path);
  const auto mode = model.metadata.value("mode", std::string("palp_t"));
  auto spec = palp::base_spec(app, palp::parse_mode(mode));
  if (model.metadata.value("task", spec.task.schema.task_name) != spec.task.schema.task_name) {
    throw palp::user_error("model was trained for task '" + model.metadata["task"].get<std::string>() + "'");
  }
  const auto data = palp::load_task(spec.task);
  auto gateway = palp::make_gateway(app);
  const auto texts = palp::test_prompts(spec, data.test, model.metadata.value("test_prefix", std::string()));
  const auto pred = palp::predict(model, gateway.embed(texts));
  const auto acc = palp::accuracy(pred.labels, data.test.labels());
  std::cout << "accuracy: " << acc << " (" << data.test.size() << " examples)\n";
  if (!predictions.empty()) {
    std::string out;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
      out += nlohmann::json{{"id", data.test.examples[i].source_id},
                            {"label", data.test.examples[i].label},
                            {"prediction", pred.labels[i]}}
               .dump() +
             "\n";
    }
    palp::write_file_atomic(predictions, out);
  }
}

// -- run ------------------------------------------------------------------------

struct RunArgs
{
  CommonArgs common;
  std::string seeds;
  std::string out;
  std::string format = "table";
  std::string ledger;
};

void cmd_run(const RunArgs & a)
{
  auto common = a.common;
  if (!a.seeds.empty()) {
    common.overrides.push_back("experiment.seeds=" + a.seeds);
  }
  const auto format = palp::parse_report_format(a.format);
  const auto app = load_config(common);
  const auto specs = palp::experiment_matrix(app);
  auto gateway = palp::make_gateway(app);
  std::unique_ptr<palp::LogprobProvider> scorer;
  const auto data = palp::load_task(specs.front().task);

  std::vector<palp::Report> reports;
  nlohmann::json timings = nlohmann::json::array();
  for (const auto & spec : specs) {
    if (spec.mode == palp::Mode::icl && !scorer) {
      scorer = palp::make_scorer(app);
    }
    auto result = palp::run_experiment(spec, data, gateway, scorer.get());
    timings.push_back({{"mode", result.report.mode}, {"prober", result.report.prober}, {"seconds", result.seconds}});
    reports.push_back(std::move(result.report));
  }
  if (!a.out.empty()) {
    const path dir(a.out);
    palp::fs::create_directories(dir);
    palp::write_file_atomic(dir / "report.json", palp::render_json(reports));
    palp::write_file_atomic(dir / "report.csv", palp::render_csv(reports));
    palp::write_file_atomic(dir / "timings.json", timings.dump(2) + "\n");
  }
  if (!a.ledger.empty()) {
    palp::append_csv_ledger(a.ledger, reports);
  }
  palp::emit_report(reports, format, std::cout);
  const auto stats = gateway.stats();
  std::cerr << "embedding: " << stats.texts_requested << " requested, " << stats.cache_hits << " cache hits, "
            << stats.provider_calls << " provider calls\n";
}

void add_common(CLI::App * cmd, CommonArgs & c)
{
  cmd->add_option("-c,--config", c.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "Override a config value, as section.key=value (repeatable)");
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Prompt-augmented linear probing toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto * templates = app.add_subcommand("templates", "List or render the built-in task templates");
  templates->require_subcommand(1);
  auto * t_list = templates->add_subcommand("list", "Print the built-in task names");
  TemplatesArgs t_args;
  auto * t_show = templates->add_subcommand("show", "Print one template, or render it on a sentence");
  t_show->add_option("task", t_args.task, "Task name")->required();
  auto * t_text = t_show->add_option("--text", t_args.text, "First input sentence (backslash escapes allowed)");
  auto * t_text_b = t_show->add_option("--text-b", t_args.text_b, "Second input sentence for pair tasks");
  t_show->add_option("--label", t_args.label, "Render a demonstration with this label index")->check(CLI::NonNegativeNumber);

  EmbedArgs e_args;
  auto * embed = app.add_subcommand("embed", "Embed a prompt file into the portable embedding format");
  embed->add_option("-i,--input", e_args.input, "Prompt file: one prompt per line, or .jsonl")->required();
  embed->add_option("-o,--out", e_args.out, "Output embedding file (a .idx sidecar is written next to it)")->required();
  embed->add_option("--config", e_args.config, "Read the [encoder] section of this config file");
  embed->add_option("--provider", e_args.provider, "Encoder provider: mock, file or http");
  embed->add_option("--name", e_args.name, "Encoder name (cache namespace)");
  embed->add_option("--dim", e_args.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  embed->add_option("--store", e_args.store, "Embedding file for the file provider");
  embed->add_option("--url", e_args.url, "Endpoint URL for the http provider");
  embed->add_option("--model", e_args.model, "Model name sent to the http provider");
  embed->add_option("--cache-dir", e_args.cache_dir, "Persistent embedding cache directory");

  CommonArgs s_common;
  std::string s_out;
  std::optional<std::uint64_t> s_seed;
  auto * select = app.add_subcommand("select-demos", "Pick one demonstration per class and write the records");
  add_common(select, s_common);
  select->add_option("-o,--out", s_out, "Output record file (JSON lines)")->required();
  select->add_option("--seed", s_seed, "Few-shot sampling seed (default: first configured seed)");

  CommonArgs tr_common;
  std::string tr_mode = "palp_t";
  std::string tr_prober = "logreg";
  std::string tr_out;
  std::optional<std::uint64_t> tr_seed;
  auto * train = app.add_subcommand("train", "Train one prober and save the model");
  add_common(train, tr_common);
  train->add_option("--mode", tr_mode, "baseline, palp_t or palp_d")->capture_default_str();
  train->add_option("--prober", tr_prober, "knn, logreg, svm, slp or gda")->capture_default_str();
  train->add_option("--seed", tr_seed, "Seed for sampling and training (default: first configured seed)");
  train->add_option("-o,--out", tr_out, "Output model file")->required();

  CommonArgs ev_common;
  std::string ev_model;
  std::string ev_pred;
  auto * eval = app.add_subcommand("eval", "Evaluate a saved model on the test split");
  add_common(eval, ev_common);
  eval->add_option("-m,--model", ev_model, "Model file written by `train`")->required();
  eval->add_option("--predictions", ev_pred, "Write per-example predictions (JSON lines)");

  RunArgs r_args;
  auto * run = app.add_subcommand("run", "Run the configured mode x prober matrix over all seeds");
  add_common(run, r_args.common);
  run->add_option("--seeds", r_args.seeds, "Comma-separated seeds (overrides experiment.seeds)");
  run->add_option("-o,--out", r_args.out, "Directory for report.json, report.csv and timings.json");
  run->add_option("--format", r_args.format, "Stdout format: table, csv or json")->capture_default_str();
  run->add_option("--ledger", r_args.ledger, "Append result rows to this CSV ledger");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (t_list->parsed()) {
      cmd_templates_list();
    } else if (t_show->parsed()) {
      cmd_templates_show(t_args, t_text->count() > 0, t_text_b->count() > 0);
    } else if (embed->parsed()) {
      cmd_embed(e_args);
    } else if (select->parsed()) {
      cmd_select_demos(s_common, s_out, s_seed);
    } else if (train->parsed()) {
      cmd_train(tr_common, tr_mode, tr_prober, tr_seed, tr_out);
    } else if (eval->parsed()) {
      cmd_eval(ev_common, ev_model, ev_pred);
    } else if (run->parsed()) {
      cmd_run(r_args);
    }
  } catch (const palp::Error & e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == palp::ErrorKind::user ? 1 : 2;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
