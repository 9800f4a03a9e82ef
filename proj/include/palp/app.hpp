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

#ifndef PALP_APP_HPP_
#define PALP_APP_HPP_

#include <cstdlib>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "palp/config.hpp"
#include "palp/gateway.hpp"
#include "palp/harness.hpp"
#include "palp/icl.hpp"
#include "palp/providers.hpp"
#include "palp/templating.hpp"

// Experiment config files. Sections and keys:
//
//   [task]       name, classes (comma list), pair, train, test, format, template
//   [template]   prefix, infix, postfix, joiner, verbalizer ('|' list), arity
//   [encoder]    provider (mock|file|http), name, dim, max_seq_len, store, url,
//                model, cache_dir, batch_size, parallelism, truncate,
//                rig_anchor, rig_keys, rig_gap
//   [scorer]     provider (mock|http), url, model, separator
//   [experiment] modes, probers, shots (integer or "full"), seeds, icl_shuffle
//   [plan]       prefix_mode, permutation_cap, selection_stats, raw_selection
//   [prober]     settings shared by every prober
//   [knn] [logreg] [svm] [slp] [gda]   per-prober settings, same keys as [prober]
//
// Relative paths resolve against the config file's directory. The
// environment variables PALP_ENDPOINT, PALP_API_KEY and PALP_CACHE_DIR
// override the file; command-line overrides ("section.key=value") win
// over both.

namespace palp
{

namespace detail
{
inline const std::map<std::string, std::set<std::string>> & known_config_keys()
{
  static const std::set<std::string> prober_keys = {
    "learning_rate", "batch_size", "epochs", "l2", "svm_c", "k", "early_stop_patience", "optimizer",
    "adam_beta1", "adam_beta2", "adam_eps"};
  static const std::map<std::string, std::set<std::string>> keys = {
    {"task", {"name", "classes", "pair", "train", "test", "format", "template"}},
    {"template", {"prefix", "infix", "postfix", "joiner", "verbalizer", "arity"}},
    {"encoder",
     {"provider", "name", "dim", "max_seq_len", "store", "url", "model", "cache_dir", "batch_size", "parallelism",
      "truncate", "rig_anchor", "rig_keys", "rig_gap"}},
    {"scorer", {"provider", "url", "model", "separator"}},
    {"experiment", {"modes", "probers", "shots", "seeds", "icl_shuffle"}},
    {"plan", {"prefix_mode", "permutation_cap", "selection_stats", "raw_selection"}},
    {"prober", prober_keys},
    {"knn", prober_keys},
    {"logreg", prober_keys},
    {"svm", prober_keys},
    {"slp", prober_keys},
    {"gda", prober_keys},
  };
  return keys;
}
}  // namespace detail

/// A merged experiment configuration plus the directory it came from.
struct AppConfig
{
  Config cfg;
  fs::path base_dir = ".";

  fs::path resolve(const std::string & p) const
  {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
};

/// Reject unknown sections and keys so that typos do not go unnoticed.
inline void check_config_keys(const Config & cfg)
{
  const auto & known = detail::known_config_keys();
  for (const auto & [section, values] : cfg.sections()) {
    const auto it = known.find(section);
    if (it == known.end()) {
      throw user_error("config: unknown section [" + section + "]");
    }
    for (const auto & [key, _] : values) {
      if (it->second.count(key) == 0) {
        throw user_error("config: unknown key " + section + "." + key);
      }
    }
  }
}

inline void apply_environment(Config & cfg)
{
  if (const char * v = std::getenv("PALP_ENDPOINT"); v != nullptr && *v != '\0') {
    cfg.set("encoder", "url", v);
    cfg.set("scorer", "url", v);
  }
  if (const char * v = std::getenv("PALP_CACHE_DIR"); v != nullptr && *v != '\0') {
    cfg.set("encoder", "cache_dir", v);
  }
}

/// File, then environment, then overrides.
inline AppConfig load_app_config(const fs::path & path, const std::vector<std::string> & overrides = {})
{
  if (!fs::exists(path)) {
    throw user_error("config file not found: " + path.string());
  }
  AppConfig app{Config::load(path), path.parent_path().empty() ? fs::path(".") : path.parent_path()};
  apply_environment(app.cfg);
  for (const auto & o : overrides) {
    app.cfg.apply_override(o);
  }
  check_config_keys(app.cfg);
  return app;
}

inline TaskData task_from_config(const AppConfig & app)
{
  const auto & cfg = app.cfg;
  TaskData task;
  task.schema.task_name = cfg.require("task", "name");
  task.schema.class_names = cfg.get_list("task", "classes");
  task.schema.is_pair = cfg.get_bool("task", "pair", false);
  task.schema.validate();
  task.train_path = app.resolve(cfg.require("task", "train"));
  task.test_path = app.resolve(cfg.require("task", "test"));
  if (const auto f = cfg.find("task", "format")) {
    task.format = parse_data_format(*f);
  }
  return task;
}

/// The [template] section when present, else the built-in template named
/// by task.template (or by the task name).
inline TemplateSpec template_from_app(const AppConfig & app, const TaskSchema & schema)
{
  const auto & cfg = app.cfg;
  TemplateSpec t;
  if (cfg.sections().count("template") > 0) {
    t = template_from_config(cfg, "template");
  } else {
    const auto name = cfg.get("task", "template", schema.task_name);
    const auto builtin = find_builtin_template(name);
    if (!builtin) {
      throw user_error("no template for task '" + schema.task_name +
                       "': add a [template] section or set task.template to a built-in name (see `palp templates list`)");
    }
    t = *builtin;
  }
  if (t.has_verbalizer()) {
    validate_template(t, schema.num_classes(), "template for '" + schema.task_name + "'");
  }
  return t;
}

inline EncoderProfile encoder_profile(const Config & cfg)
{
  EncoderProfile p;
  p.name = cfg.get("encoder", "name", cfg.get("encoder", "provider", "mock"));
  p.dim = static_cast<int>(cfg.get_int("encoder", "dim", p.dim));
  p.max_seq_len = static_cast<std::size_t>(cfg.get_int("encoder", "max_seq_len", static_cast<std::int64_t>(p.max_seq_len)));
  p.validate();
  return p;
}

inline std::string api_key_from_env()
{
  const char * v = std::getenv("PALP_API_KEY");
  return v == nullptr ? std::string() : std::string(v);
}

inline std::shared_ptr<EmbeddingProvider> make_provider(const AppConfig & app, const EncoderProfile & profile)
{
  const auto & cfg = app.cfg;
  const auto kind = cfg.get("encoder", "provider", "mock");
  if (kind == "mock") {
    std::optional<ClusterRig> rig;
    if (cfg.has("encoder", "rig_keys")) {
      rig = ClusterRig{cfg.get("encoder", "rig_anchor", ""), cfg.get_list("encoder", "rig_keys"),
                       cfg.get_double("encoder", "rig_gap", 10.0)};
    }
    return std::make_shared<MockProvider>(profile.dim, std::move(rig));
  }
  if (kind == "file") {
    return std::make_shared<StoreProvider>(StoreProvider::from_file(app.resolve(cfg.require("encoder", "store"))));
  }
  if (kind == "http") {
    return std::make_shared<HttpProvider>(
      cfg.require("encoder", "url"), cfg.get("encoder", "model", profile.name), api_key_from_env());
  }
  throw user_error("unknown encoder provider '" + kind + "' (expected mock, file or http)");
}

inline std::shared_ptr<EmbeddingCache> make_cache(const AppConfig & app)
{
  if (const auto dir = app.cfg.find("encoder", "cache_dir"); dir && !dir->empty()) {
    return std::make_shared<EmbeddingCache>(app.resolve(*dir), encoder_profile(app.cfg).name);
  }
  return std::make_shared<EmbeddingCache>();
}

inline Gateway make_gateway(const AppConfig & app)
{
  const auto & cfg = app.cfg;
  const auto profile = encoder_profile(cfg);
  GatewayOptions options;
  options.batch_size = static_cast<std::size_t>(cfg.get_int("encoder", "batch_size", 32));
  options.parallelism = static_cast<std::size_t>(cfg.get_int("encoder", "parallelism", 4));
  options.truncate = cfg.get_bool("encoder", "truncate", false);
  return Gateway(profile, make_provider(app, profile), make_cache(app), options);
}

inline std::unique_ptr<LogprobProvider> make_scorer(const AppConfig & app)
{
  const auto kind = app.cfg.get("scorer", "provider", "mock");
  if (kind == "mock") {
    return std::make_unique<CountingScorer>();
  }
  if (kind == "http") {
    return std::make_unique<HttpScorer>(
      app.cfg.require("scorer", "url"), app.cfg.get("scorer", "model", "default"), api_key_from_env());
  }
  throw user_error("unknown scorer provider '" + kind + "' (expected mock or http)");
}

/// Per-algorithm defaults, then [prober], then [<algorithm>]. Few-shot runs
/// default to batch size 2 and full-data runs to 16.
inline ProberConfig prober_from_config(const Config & cfg, Algorithm a, bool few_shot)
{
  ProberConfig p = ProberConfig::defaults(a);
  p.batch_size = few_shot ? 2 : 16;
  for (const auto & section : {std::string("prober"), algorithm_name(a)}) {
    p.learning_rate = cfg.get_double(section, "learning_rate", p.learning_rate);
    p.batch_size = static_cast<int>(cfg.get_int(section, "batch_size", p.batch_size));
    p.epochs = static_cast<int>(cfg.get_int(section, "epochs", p.epochs));
    p.l2 = cfg.get_double(section, "l2", p.l2);
    p.svm_c = cfg.get_double(section, "svm_c", p.svm_c);
    p.knn_k = static_cast<int>(cfg.get_int(section, "k", p.knn_k));
    p.early_stop_patience = static_cast<int>(cfg.get_int(section, "early_stop_patience", p.early_stop_patience));
    if (const auto o = cfg.find(section, "optimizer")) {
      p.optimizer = parse_optimizer(*o);
    }
    p.adam_beta1 = cfg.get_double(section, "adam_beta1", p.adam_beta1);
    p.adam_beta2 = cfg.get_double(section, "adam_beta2", p.adam_beta2);
    p.adam_eps = cfg.get_double(section, "adam_eps", p.adam_eps);
  }
  p.validate();
  return p;
}

inline std::vector<std::uint64_t> parse_seeds(const std::vector<std::string> & items)
{
  std::vector<std::uint64_t> seeds;
  for (const auto & s : items) {
    const auto v = Config::to_int("seed", s);
    if (v < 0) {
      throw user_error("seeds must be non-negative: " + s);
    }
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  return seeds;
}

inline std::optional<int> shots_from_config(const Config & cfg)
{
  const auto shots = cfg.get("experiment", "shots", "full");
  if (shots == "full") {
    return std::nullopt;
  }
  return static_cast<int>(Config::to_int("experiment.shots", shots));
}

/// Settings shared by every experiment of a config, for the given mode.
inline ExperimentSpec base_spec(const AppConfig & app, Mode mode)
{
  const auto & cfg = app.cfg;
  ExperimentSpec spec;
  spec.task = task_from_config(app);
  spec.mode = mode;
  if (mode == Mode::baseline) {
    // Baseline never renders the template; a missing one is fine.
    try {
      spec.template_spec = template_from_app(app, spec.task.schema);
    } catch (const Error &) {
      spec.template_spec = identity_template(" ");
    }
  } else {
    spec.template_spec = template_from_app(app, spec.task.schema);
  }
  spec.shots_per_class = shots_from_config(cfg);
  if (cfg.has("experiment", "seeds")) {
    spec.seeds = parse_seeds(cfg.get_list("experiment", "seeds"));
  }
  spec.prefix_plan.mode =
    cfg.get("plan", "prefix_mode", "permuted") == "unified" ? PrefixMode::unified : PrefixMode::permuted;
  if (const auto m = cfg.get("plan", "prefix_mode", "permuted"); m != "unified" && m != "permuted") {
    throw user_error("plan.prefix_mode must be unified or permuted, got '" + m + "'");
  }
  spec.prefix_plan.permutation_cap = static_cast<int>(cfg.get_int("plan", "permutation_cap", 24));
  spec.selection.stats = parse_selection_stats(cfg.get("plan", "selection_stats", "per_class"));
  spec.selection.raw_inputs = cfg.get_bool("plan", "raw_selection", false);
  spec.icl_separator = cfg.get("scorer", "separator", " ");
  spec.icl_shuffle = cfg.get_bool("experiment", "icl_shuffle", false);
  return spec;
}

/// The (mode x prober) matrix of a config; icl contributes one entry.
inline std::vector<ExperimentSpec> experiment_matrix(const AppConfig & app)
{
  const auto & cfg = app.cfg;
  auto modes = cfg.get_list("experiment", "modes");
  if (modes.empty()) {
    modes = {"baseline", "palp_t", "palp_d"};
  }
  auto probers = cfg.get_list("experiment", "probers");
  if (probers.empty()) {
    for (auto a : kAllAlgorithms) {
      probers.push_back(algorithm_name(a));
    }
  }
  std::vector<ExperimentSpec> out;
  for (const auto & m : modes) {
    const auto mode = parse_mode(m);
    const auto base = base_spec(app, mode);
    if (mode == Mode::icl) {
      out.push_back(base);
      continue;
    }
    for (const auto & p : probers) {
      auto spec = base;
      spec.prober = prober_from_config(cfg, parse_algorithm(p), spec.few_shot());
      out.push_back(std::move(spec));
    }
  }
  for (const auto & s : out) {
    s.validate();
  }
  return out;
}

}  // namespace palp

#endif  // PALP_APP_HPP_
