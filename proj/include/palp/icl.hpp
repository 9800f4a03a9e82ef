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

#ifndef PALP_ICL_HPP_
#define PALP_ICL_HPP_

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/embedding.hpp"
#include "palp/error.hpp"
#include "palp/http.hpp"
#include "palp/templating.hpp"

namespace palp
{

/// Next-position log-probabilities for a set of candidate continuations.
class LogprobProvider
{
public:
  virtual ~LogprobProvider() = default;

  /// One score per candidate, higher is more probable.
  virtual std::vector<double> score(const std::string & prompt, const std::vector<std::string> & candidates) = 0;

  virtual std::string kind() const = 0;
};

/// Scores a candidate by how often it occurs in the prompt, so the label
/// demonstrated most often wins.
class CountingScorer : public LogprobProvider
{
public:
  std::vector<double> score(const std::string & prompt, const std::vector<std::string> & candidates) override
  {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto & c : candidates) {
      std::size_t count = 0;
      if (!c.empty()) {
        for (auto pos = prompt.find(c); pos != std::string::npos; pos = prompt.find(c, pos + c.size())) {
          ++count;
        }
      }
      out.push_back(static_cast<double>(count));
    }
    return out;
  }

  std::string kind() const override { return "mock"; }
};

/// Remote scorer. POST <url>/score with {"model", "prompt", "candidates"};
/// the reply is {"logprobs": [...]}.
class HttpScorer : public LogprobProvider
{
public:
  HttpScorer(std::string url, std::string model, std::string api_key = {}, RetryPolicy retry = {})
  : endpoint_(Endpoint::parse(url)), model_(std::move(model)), api_key_(std::move(api_key)), retry_(retry)
  {
  }

  std::vector<double> score(const std::string & prompt, const std::vector<std::string> & candidates) override
  {
    const nlohmann::json body = {{"model", model_}, {"prompt", prompt}, {"candidates", candidates}};
    const auto reply = post_json(endpoint_, "/score", body, api_key_, retry_);
    if (!reply.contains("logprobs") || !reply["logprobs"].is_array()) {
      throw runtime_error("score response has no 'logprobs' array");
    }
    return reply["logprobs"].get<std::vector<double>>();
  }

  std::string kind() const override { return "http"; }

private:
  Endpoint endpoint_;
  std::string model_;
  std::string api_key_;
  RetryPolicy retry_;
};

struct IclPrompt
{
  std::string text;
  int shot_count = 0;
  std::size_t estimated_units = 0;
};

/// Demonstrations of every shot, in the given order and joined by the
/// template joiner, followed by the templated query. Fails with
/// LengthLimitError when the prompt exceeds the profile budget.
inline IclPrompt build_icl_input(
  const Split & shots, const LabeledExample & test_ex, const TemplateSpec & spec, const EncoderProfile & profile)
{
  if (!spec.has_verbalizer()) {
    throw user_error("in-context prompts need a template with a verbalizer");
  }
  IclPrompt out;
  for (const auto & ex : shots.examples) {
    out.text += render_demonstration(spec, ex).text;
    out.text += spec.joiner;
  }
  out.text += render_input(spec, test_ex).text;
  out.shot_count = static_cast<int>(shots.size());
  const auto check = length_check(profile, out.text);
  out.estimated_units = check.estimated_units;
  if (!check.ok) {
    throw LengthLimitError(check.estimated_units, static_cast<std::size_t>(profile.max_seq_len));
  }
  return out;
}

/// Score prompt + separator against every verbalizer entry and return the
/// best label; equal scores go to the smallest label.
inline int predict_icl(
  LogprobProvider & provider, const IclPrompt & prompt, const TemplateSpec & spec, const std::string & separator = " ")
{
  if (!spec.has_verbalizer()) {
    throw user_error("in-context prediction needs a template with a verbalizer");
  }
  const auto scores = provider.score(prompt.text + separator, spec.verbalizer);
  if (scores.size() != spec.verbalizer.size()) {
    throw runtime_error("scorer returned " + std::to_string(scores.size()) + " scores for " +
                        std::to_string(spec.verbalizer.size()) + " candidates");
  }
  std::size_t best = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (!std::isfinite(scores[c])) {
      throw runtime_error("scorer returned a non-finite score for candidate '" + spec.verbalizer[c] + "'");
    }
    if (scores[c] > scores[best]) {
      best = c;
    }
  }
  return static_cast<int>(best);
}

}  // namespace palp

#endif  // PALP_ICL_HPP_
