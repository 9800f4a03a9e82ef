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

#ifndef PALP_TEMPLATING_HPP_
#define PALP_TEMPLATING_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "palp/config.hpp"
#include "palp/corpus.hpp"
#include "palp/error.hpp"

namespace palp
{

enum class Arity
{
  any,
  single,
  pair
};

/// A prompt template: prefix + text_a [+ infix + text_b] + postfix, where
/// the postfix ends at the (blank) answer slot. The verbalizer maps label
/// index to its answer word; it may be empty for tasks that are only used
/// with templates.
struct TemplateSpec
{
  std::string prefix;
  std::string infix;
  std::string postfix;
  std::vector<std::string> verbalizer;
  std::string joiner = "\n";
  Arity arity = Arity::any;

  bool has_verbalizer() const { return !verbalizer.empty(); }

  bool operator==(const TemplateSpec &) const = default;
};

enum class PromptKind
{
  input_only,
  demonstration
};

struct RenderedPrompt
{
  std::string text;
  PromptKind kind = PromptKind::input_only;
};

/// Pass-through template. Pair inputs are joined with `pair_separator`.
inline TemplateSpec identity_template(const std::string & pair_separator = "")
{
  TemplateSpec t;
  t.infix = pair_separator;
  return t;
}

/// Check verbalizer coverage against a class count. Entries containing
/// whitespace only trigger a warning: whether an answer word is a single
/// token is up to the encoder's tokenizer.
inline void validate_template(const TemplateSpec & spec, int num_classes, const std::string & name = "template")
{
  if (!spec.has_verbalizer()) {
    return;
  }
  if (static_cast<int>(spec.verbalizer.size()) != num_classes) {
    throw user_error(name + ": verbalizer has " + std::to_string(spec.verbalizer.size()) + " entries but the task has " +
                     std::to_string(num_classes) + " classes");
  }
  for (const auto & word : spec.verbalizer) {
    if (word.empty()) {
      throw user_error(name + ": empty verbalizer entry");
    }
    if (word.find_first_of(" \t\n") != std::string::npos) {
      warn(name + ": verbalizer entry '" + word + "' is probably not a single token");
    }
  }
}

inline RenderedPrompt render_input(const TemplateSpec & spec, const LabeledExample & ex)
{
  const bool pair = ex.text_b.has_value();
  if (spec.arity == Arity::pair && !pair) {
    throw user_error("sentence-pair template applied to a single-sentence example (id " + std::to_string(ex.id) + ")");
  }
  if (spec.arity == Arity::single && pair) {
    throw user_error("single-sentence template applied to a sentence-pair example (id " + std::to_string(ex.id) + ")");
  }
  std::string text = spec.prefix;
  text += ex.text_a;
  if (pair) {
    text += spec.infix;
    text += *ex.text_b;
  }
  text += spec.postfix;
  return {std::move(text), PromptKind::input_only};
}

/// render_input followed by one space and the verbalized label.
inline RenderedPrompt render_demonstration(const TemplateSpec & spec, const LabeledExample & ex)
{
  if (!spec.has_verbalizer()) {
    throw user_error("demonstrations need a verbalizer, but the template has none");
  }
  if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= spec.verbalizer.size()) {
    throw user_error("verbalizer has no entry for label " + std::to_string(ex.label));
  }
  auto out = render_input(spec, ex);
  out.text += ' ';
  out.text += spec.verbalizer[static_cast<std::size_t>(ex.label)];
  out.kind = PromptKind::demonstration;
  return out;
}

/// The template pattern with [sent1]/[sent2] placeholders.
inline std::string template_pattern(const TemplateSpec & spec)
{
  LabeledExample ex;
  ex.text_a = "[sent1]";
  if (spec.arity == Arity::pair) {
    ex.text_b = "[sent2]";
  }
  return render_input(spec, ex).text;
}

namespace detail
{
inline TemplateSpec single_task(std::string postfix, std::vector<std::string> verbalizer)
{
  TemplateSpec t;
  t.prefix = "Sentence 1: ";
  t.postfix = std::move(postfix);
  t.verbalizer = std::move(verbalizer);
  t.arity = Arity::single;
  return t;
}

inline TemplateSpec pair_task(std::string first, std::string second, std::vector<std::string> verbalizer)
{
  TemplateSpec t;
  t.prefix = std::move(first);
  t.infix = "\n" + std::move(second);
  t.postfix = "\nLabel:";
  t.verbalizer = std::move(verbalizer);
  t.arity = Arity::pair;
  return t;
}
}  // namespace detail

/// Templates and verbalizers for the fifteen benchmark tasks. Verbalizer
/// entries are listed in label-index order. CLINC, Banking, BoolQ and CB
/// have no verbalizer.
inline std::map<std::string, TemplateSpec> builtin_templates()
{
  using detail::pair_task;
  using detail::single_task;
  std::map<std::string, TemplateSpec> t;
  t["sst2"] = single_task("\nSentiment:", {"negative", "positive"});
  t["rotten_tomatoes"] = single_task("\nSentiment:", {"negative", "positive"});
  t["offensive"] = single_task("\nSentiment:", {"non-offensive", "offensive"});
  t["cola"] = single_task("\nSentiment:", {"correct", "wrong"});
  t["stance_atheism"] = single_task(" Label:", {"none", "against", "favor"});
  t["emotion"] = single_task("\nSentiment:", {"anger", "joy", "optimism", "sadness"});
  t["agnews"] = single_task("\nSentiment:", {"World", "Sports", "Business", "Technology"});
  t["trec"] =
    single_task("\nLabel:", {"Description", "Entity", "Expression", "Human", "Number", "Location"});
  t["banking77"] = single_task(" Label:", {});
  t["clinc150"] = single_task("\nLabel:", {});
  t["mnli"] = pair_task("Sentence 1: ", "Sentence 2: ", {"True", "Neither", "False"});
  t["mrpc"] = pair_task("Sentence 1: ", "Sentence 2: ", {"True", "False"});
  t["rte"] = pair_task("Premise: ", "Hypothesis: ", {"True", "False"});
  t["boolq"] = pair_task("Premise: ", "Hypothesis: ", {});
  t["cb"] = pair_task("Premise: ", "Hypothesis: ", {});
  return t;
}

inline std::optional<TemplateSpec> find_builtin_template(const std::string & name)
{
  const auto all = builtin_templates();
  const auto it = all.find(name);
  if (it == all.end()) {
    return std::nullopt;
  }
  return it->second;
}

inline Arity parse_arity(const std::string & s)
{
  if (s == "single") {
    return Arity::single;
  }
  if (s == "pair") {
    return Arity::pair;
  }
  if (s == "any" || s.empty()) {
    return Arity::any;
  }
  throw user_error("unknown template arity '" + s + "'");
}

inline std::string arity_name(Arity a)
{
  switch (a) {
    case Arity::single: return "single";
    case Arity::pair: return "pair";
    case Arity::any: break;
  }
  return "any";
}

/// Read a template section: prefix/infix/postfix/joiner strings, a
/// '|'-separated verbalizer, and an optional arity.
inline TemplateSpec template_from_config(const Config & cfg, const std::string & section)
{
  TemplateSpec t;
  t.prefix = cfg.get(section, "prefix", "");
  t.infix = cfg.get(section, "infix", "");
  t.postfix = cfg.get(section, "postfix", "");
  t.joiner = cfg.get(section, "joiner", "\n");
  t.verbalizer = cfg.get_list(section, "verbalizer", '|');
  t.arity = parse_arity(cfg.get(section, "arity", "any"));
  return t;
}

/// Load a template catalog file: one section per task.
inline std::map<std::string, TemplateSpec> load_template_file(const fs::path & path)
{
  const auto cfg = Config::load(path);
  std::map<std::string, TemplateSpec> out;
  for (const auto & [name, _] : cfg.sections()) {
    out[name] = template_from_config(cfg, name);
  }
  return out;
}

}  // namespace palp

#endif  // PALP_TEMPLATING_HPP_
