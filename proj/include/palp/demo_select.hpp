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

#ifndef PALP_DEMO_SELECT_HPP_
#define PALP_DEMO_SELECT_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/error.hpp"
#include "palp/gateway.hpp"
#include "palp/gaussian.hpp"
#include "palp/rng.hpp"
#include "palp/templating.hpp"

namespace palp
{

enum class SelectionStats
{
  per_class,
  tied,
  automatic,  ///< tied when the smallest class has fewer than 4 examples
};

inline SelectionStats parse_selection_stats(const std::string & s)
{
  if (s == "per_class") {
    return SelectionStats::per_class;
  }
  if (s == "tied") {
    return SelectionStats::tied;
  }
  if (s == "auto") {
    return SelectionStats::automatic;
  }
  throw user_error("unknown selection statistics '" + s + "' (expected per_class, tied or auto)");
}

inline std::string selection_stats_name(SelectionStats s)
{
  switch (s) {
    case SelectionStats::tied: return "tied";
    case SelectionStats::automatic: return "auto";
    case SelectionStats::per_class: break;
  }
  return "per_class";
}

struct SelectionOptions
{
  SelectionStats stats = SelectionStats::per_class;
  bool raw_inputs = false;  ///< select on raw text instead of templated inputs
};

struct Demonstration
{
  int class_id = 0;
  int example_id = 0;  ///< id within the split selection ran on
  int source_id = 0;
  double score = 0.0;  ///< squared Mahalanobis distance to the class mean
  std::string text;    ///< render_demonstration of the chosen example
};

/// One demonstration per class, indexed by class.
struct DemonstrationSet
{
  std::vector<Demonstration> entries;
  std::string joiner = "\n";

  std::size_t size() const { return entries.size(); }
};

/// Selection given precomputed embeddings (row i belongs to train example i).
/// For every class, the member with the smallest squared Mahalanobis
/// distance to its class Gaussian wins; ties go to the smaller id.
inline DemonstrationSet select_from_embeddings(
  const Split & train, const TemplateSpec & spec, const Matrix & embeddings, CovarianceMode mode)
{
  const int num_classes = train.schema.num_classes();
  if (static_cast<std::size_t>(embeddings.rows()) != train.size()) {
    throw user_error("select_demonstrations: embedding rows do not match the split");
  }
  const auto gaussians = fit_class_gaussians(embeddings, train.labels(), num_classes, mode, true);

  DemonstrationSet out;
  out.joiner = spec.joiner;
  out.entries.resize(static_cast<std::size_t>(num_classes));
  std::vector<double> best(static_cast<std::size_t>(num_classes), std::numeric_limits<double>::infinity());
  std::vector<int> best_row(static_cast<std::size_t>(num_classes), -1);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto & ex = train.examples[i];
    const auto c = static_cast<std::size_t>(ex.label);
    const double d = mahalanobis_sq(embeddings.row(static_cast<Eigen::Index>(i)).transpose(), gaussians[c]);
    const bool first = best_row[c] < 0;
    if (first || d < best[c] || (d == best[c] && ex.id < train.examples[static_cast<std::size_t>(best_row[c])].id)) {
      best[c] = d;
      best_row[c] = static_cast<int>(i);
    }
  }
  for (int c = 0; c < num_classes; ++c) {
    const auto & ex = train.examples[static_cast<std::size_t>(best_row[static_cast<std::size_t>(c)])];
    auto & e = out.entries[static_cast<std::size_t>(c)];
    e.class_id = c;
    e.example_id = ex.id;
    e.source_id = ex.source_id;
    e.score = best[static_cast<std::size_t>(c)];
    e.text = render_demonstration(spec, ex).text;
  }
  return out;
}

inline CovarianceMode resolve_selection_mode(SelectionStats stats, const Split & train)
{
  if (stats == SelectionStats::per_class) {
    return CovarianceMode::per_class;
  }
  if (stats == SelectionStats::tied) {
    return CovarianceMode::tied;
  }
  const auto hist = train.class_histogram();
  const auto smallest = *std::min_element(hist.begin(), hist.end());
  return smallest < 4 ? CovarianceMode::tied : CovarianceMode::per_class;
}

/// Embed the templated training inputs and pick the example closest to
/// each class centre.
inline DemonstrationSet select_demonstrations(
  const Split & train, const TemplateSpec & spec, Gateway & gateway, const SelectionOptions & options = {})
{
  if (!spec.has_verbalizer()) {
    throw user_error("demonstration selection needs a template with a verbalizer");
  }
  validate_template(spec, train.schema.num_classes());
  const auto hist = train.class_histogram();
  for (std::size_t c = 0; c < hist.size(); ++c) {
    if (hist[c] == 0) {
      throw user_error("class '" + train.schema.class_names[c] + "' has no training examples to select from");
    }
  }
  const TemplateSpec raw = identity_template(" ");
  std::vector<std::string> texts;
  texts.reserve(train.size());
  for (const auto & ex : train.examples) {
    texts.push_back(render_input(options.raw_inputs ? raw : spec, ex).text);
  }
  const auto embeddings = gateway.embed(texts);
  return select_from_embeddings(train, spec, embeddings, resolve_selection_mode(options.stats, train));
}

inline void check_permutation(std::span<const int> order, std::size_t n)
{
  if (order.size() != n) {
    throw user_error("prefix order has " + std::to_string(order.size()) + " entries, expected " + std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (int v : order) {
    if (v < 0 || static_cast<std::size_t>(v) >= n || seen[static_cast<std::size_t>(v)]) {
      throw user_error("prefix order is not a permutation of the class indices");
    }
    seen[static_cast<std::size_t>(v)] = true;
  }
}

/// D[order[0]] + joiner + ... + D[order[last]] + joiner.
inline std::string build_prefix(
  const DemonstrationSet & demos, std::span<const int> order, const std::optional<std::string> & joiner = std::nullopt)
{
  check_permutation(order, demos.size());
  const std::string & sep = joiner ? *joiner : demos.joiner;
  std::string out;
  for (int c : order) {
    out += demos.entries[static_cast<std::size_t>(c)].text;
    out += sep;
  }
  return out;
}

inline std::vector<int> identity_order(std::size_t n)
{
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

/// Ascending class order; used for inference and for full-data training.
inline std::string unified_inference_prefix(const DemonstrationSet & demos)
{
  return build_prefix(demos, identity_order(demos.size()));
}

enum class PrefixMode
{
  unified,
  permuted
};

struct PrefixPlan
{
  PrefixMode mode = PrefixMode::permuted;
  int permutation_cap = 24;
  std::uint64_t seed = 0;
  std::string joiner = "\n";
};

/// min(n!, cap) distinct orders of n classes. When n! <= cap all orders are
/// listed lexicographically. Otherwise an Rng seeded with `seed` shuffles
/// the identity order (Rng::shuffle) and duplicates are rejected until
/// `cap` distinct orders exist, kept in draw order.
inline std::vector<std::vector<int>> draw_permutations(int n, int cap, std::uint64_t seed)
{
  if (cap < 1) {
    throw user_error("permutation cap must be at least 1");
  }
  if (n < 1) {
    throw user_error("need at least one class to permute");
  }
  std::uint64_t factorial = 1;
  bool exceeds = false;
  for (int i = 2; i <= n && !exceeds; ++i) {
    factorial *= static_cast<std::uint64_t>(i);
    exceeds = factorial > static_cast<std::uint64_t>(cap);
  }
  std::vector<std::vector<int>> out;
  if (!exceeds) {
    auto order = identity_order(static_cast<std::size_t>(n));
    do {
      out.push_back(order);
    } while (std::next_permutation(order.begin(), order.end()));
    return out;
  }
  Rng rng(seed);
  std::set<std::vector<int>> seen;
  while (out.size() < static_cast<std::size_t>(cap)) {
    auto order = identity_order(static_cast<std::size_t>(n));
    rng.shuffle(std::span<int>(order));
    if (seen.insert(order).second) {
      out.push_back(std::move(order));
    }
  }
  return out;
}

struct AugmentedExample
{
  int source_id = 0;  ///< id of the training example within its split
  std::vector<int> prefix_order;
  std::string text;
  int label = 0;
};

/// Pair every training example with every drawn prefix order. Example i
/// starts at order i mod |orders| and cycles through all of them, so the
/// output holds |train| * min(|C|!, cap) prompts. A unified plan uses only
/// the ascending order.
inline std::vector<AugmentedExample> augment_training_set(
  const Split & train, const DemonstrationSet & demos, const PrefixPlan & plan, const TemplateSpec & spec)
{
  const int num_classes = static_cast<int>(demos.size());
  const auto orders = plan.mode == PrefixMode::permuted
                        ? draw_permutations(num_classes, plan.permutation_cap, plan.seed)
                        : std::vector<std::vector<int>>{identity_order(demos.size())};
  std::vector<std::string> prefixes;
  prefixes.reserve(orders.size());
  for (const auto & o : orders) {
    prefixes.push_back(build_prefix(demos, o, plan.joiner));
  }
  std::vector<AugmentedExample> out;
  out.reserve(train.size() * orders.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto & ex = train.examples[i];
    const auto input = render_input(spec, ex).text;
    for (std::size_t j = 0; j < orders.size(); ++j) {
      const auto p = (i + j) % orders.size();
      out.push_back({ex.id, orders[p], prefixes[p] + input, ex.label});
    }
  }
  return out;
}

// -- record file ---------------------------------------------------------------
// JSON lines: a header {"classes": C, "joiner": "..."} followed by one
// {"class", "id", "source_id", "score", "text"} per class.

inline std::string encode_demonstrations(const DemonstrationSet & demos)
{
  std::ostringstream out;
  out << nlohmann::json{{"classes", demos.size()}, {"joiner", demos.joiner}}.dump() << '\n';
  for (const auto & d : demos.entries) {
    out << nlohmann::json{{"class", d.class_id},
                          {"id", d.example_id},
                          {"source_id", d.source_id},
                          {"score", d.score},
                          {"text", d.text}}
             .dump()
        << '\n';
  }
  return out.str();
}

inline DemonstrationSet decode_demonstrations(const std::string & text, const std::string & origin)
{
  std::istringstream in(text);
  std::string line;
  DemonstrationSet out;
  try {
    if (!std::getline(in, line)) {
      throw user_error(origin + ": empty demonstration file");
    }
    const auto header = nlohmann::json::parse(line);
    const auto classes = header.at("classes").get<std::size_t>();
    out.joiner = header.at("joiner").get<std::string>();
    out.entries.resize(classes);
    std::vector<bool> seen(classes, false);
    while (std::getline(in, line)) {
      if (trim(line).empty()) {
        continue;
      }
      const auto rec = nlohmann::json::parse(line);
      Demonstration d;
      d.class_id = rec.at("class").get<int>();
      d.example_id = rec.at("id").get<int>();
      d.source_id = rec.value("source_id", d.example_id);
      d.score = rec.at("score").get<double>();
      d.text = rec.at("text").get<std::string>();
      if (d.class_id < 0 || static_cast<std::size_t>(d.class_id) >= classes || seen[static_cast<std::size_t>(d.class_id)]) {
        throw user_error(origin + ": duplicate or out-of-range class " + std::to_string(d.class_id));
      }
      seen[static_cast<std::size_t>(d.class_id)] = true;
      out.entries[static_cast<std::size_t>(d.class_id)] = std::move(d);
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw user_error(origin + ": missing a demonstration for some class");
    }
  } catch (const nlohmann::json::exception & e) {
    throw user_error(origin + ": malformed demonstration record (" + e.what() + ")");
  }
  return out;
}

inline void save_demonstrations(const DemonstrationSet & demos, const fs::path & path)
{
  write_file_atomic(path, encode_demonstrations(demos));
}

inline DemonstrationSet load_demonstrations(const fs::path & path)
{
  return decode_demonstrations(read_file(path), path.string());
}

}  // namespace palp

#endif  // PALP_DEMO_SELECT_HPP_
