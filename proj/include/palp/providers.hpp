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

#ifndef PALP_PROVIDERS_HPP_
#define PALP_PROVIDERS_HPP_

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "palp/embedding.hpp"
#include "palp/error.hpp"
#include "palp/http.hpp"
#include "palp/io.hpp"
#include "palp/rng.hpp"

namespace palp
{

/// Black-box text encoder. Implementations must tolerate concurrent calls.
class EmbeddingProvider
{
public:
  virtual ~EmbeddingProvider() = default;

  /// One vector per text, in order. Dimension checks happen in the gateway.
  virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string> & texts) = 0;

  virtual std::string kind() const = 0;
};

/// Places prompts whose query segment starts with a known key word at a
/// separated cluster centre. The query segment is the text after the last
/// occurrence of `anchor`; its first word is looked up in `keys`, and key
/// i adds `gap` along coordinate i. Prompts without the anchor, or with an
/// unknown word, get no offset.
struct ClusterRig
{
  std::string anchor;
  std::vector<std::string> keys;
  double gap = 10.0;

  std::optional<std::size_t> match(const std::string & text) const
  {
    const auto pos = text.rfind(anchor);
    if (anchor.empty() || pos == std::string::npos) {
      return std::nullopt;
    }
    const auto start = pos + anchor.size();
    auto end = text.find_first_of(" \t\n", start);
    if (end == std::string::npos) {
      end = text.size();
    }
    const auto word = text.substr(start, end - start);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i] == word) {
        return i;
      }
    }
    return std::nullopt;
  }
};

/// Deterministic stand-in encoder.
///
/// A text is hashed with 64-bit FNV-1a, the hash seeds an Rng, and `dim`
/// normal() draws form the vector. Without a rig the vector is scaled to
/// unit norm, which makes distinct texts nearly orthogonal. With a rig the
/// draws stay unscaled (unit variance per coordinate) and the rig's cluster
/// offset is added.
class MockProvider : public EmbeddingProvider
{
public:
  explicit MockProvider(int dim, std::optional<ClusterRig> rig = std::nullopt) : dim_(dim), rig_(std::move(rig))
  {
    if (rig_ && rig_->keys.size() > static_cast<std::size_t>(dim)) {
      throw user_error("mock encoder: more rig keys than dimensions");
    }
  }

  std::vector<double> embed_one(const std::string & text) const
  {
    Rng rng(fnv1a64(text));
    std::vector<double> v(static_cast<std::size_t>(dim_));
    double norm2 = 0.0;
    for (auto & x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
    if (!rig_) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto & x : v) {
        x *= inv;
      }
      return v;
    }
    if (const auto k = rig_->match(text)) {
      v[*k] += rig_->gap;
    }
    return v;
  }

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string> & texts) override
  {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto & t : texts) {
      out.push_back(embed_one(t));
    }
    return out;
  }

  std::string kind() const override { return "mock"; }

private:
  int dim_;
  std::optional<ClusterRig> rig_;
};

/// Precomputed vectors keyed by the SHA-256 of the prompt bytes.
class StoreProvider : public EmbeddingProvider
{
public:
  StoreProvider() = default;

  /// Load a portable embedding file and its sidecar index.
  static StoreProvider from_file(const fs::path & path)
  {
    const auto idx_path = sidecar_path(path);
    if (!fs::exists(idx_path)) {
      throw user_error("embedding store needs a sidecar index: " + idx_path.string());
    }
    const auto file = import_embeddings(path);
    const auto dim = static_cast<std::size_t>(file.matrix.cols());
    StoreProvider store;
    for (const auto & [hash, offset] : load_sidecar(idx_path)) {
      if (offset < kEmbeddingHeaderBytes || (offset - kEmbeddingHeaderBytes) % (4 + 8 * dim) != 0) {
        throw runtime_error(idx_path.string() + ": offset " + std::to_string(offset) + " is not a record boundary");
      }
      const auto row = (offset - kEmbeddingHeaderBytes) / (4 + 8 * dim);
      if (row >= static_cast<std::size_t>(file.matrix.rows())) {
        throw runtime_error(idx_path.string() + ": offset " + std::to_string(offset) + " past the last record");
      }
      std::vector<double> v(dim);
      for (std::size_t j = 0; j < dim; ++j) {
        v[j] = file.matrix(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j));
      }
      store.by_hash_.emplace(hash, std::move(v));
    }
    return store;
  }

  void add(const std::string & text, std::vector<double> v) { by_hash_[sha256_hex(text)] = std::move(v); }

  std::size_t size() const { return by_hash_.size(); }

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string> & texts) override
  {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto & t : texts) {
      const auto it = by_hash_.find(sha256_hex(t));
      if (it == by_hash_.end()) {
        throw runtime_error("text not present in the embedding store: \"" + t.substr(0, 60) + "\"");
      }
      out.push_back(it->second);
    }
    return out;
  }

  std::string kind() const override { return "file"; }

private:
  std::map<std::string, std::vector<double>> by_hash_;
};

/// Remote encoder. POST <url>/embed with {"model", "inputs"}; the reply is
/// {"dim": n, "vectors": [[...], ...]}.
class HttpProvider : public EmbeddingProvider
{
public:
  HttpProvider(std::string url, std::string model, std::string api_key = {}, RetryPolicy retry = {})
  : endpoint_(Endpoint::parse(url)), model_(std::move(model)), api_key_(std::move(api_key)), retry_(retry)
  {
  }

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string> & texts) override
  {
    const nlohmann::json body = {{"model", model_}, {"inputs", texts}};
    const auto reply = post_json(endpoint_, "/embed", body, api_key_, retry_);
    if (!reply.contains("vectors") || !reply["vectors"].is_array()) {
      throw runtime_error("embed response has no 'vectors' array");
    }
    const auto & vectors = reply["vectors"];
    if (vectors.size() != texts.size()) {
      throw runtime_error("embed response has " + std::to_string(vectors.size()) + " vectors for " +
                          std::to_string(texts.size()) + " inputs");
    }
    std::vector<std::vector<double>> out;
    out.reserve(vectors.size());
    for (const auto & v : vectors) {
      out.push_back(v.get<std::vector<double>>());
    }
    if (reply.contains("dim")) {
      const auto dim = reply["dim"].get<std::size_t>();
      for (const auto & v : out) {
        if (v.size() != dim) {
          throw runtime_error("embed response: vector length disagrees with declared dim " + std::to_string(dim));
        }
      }
    }
    return out;
  }

  std::string kind() const override { return "http"; }

private:
  Endpoint endpoint_;
  std::string model_;
  std::string api_key_;
  RetryPolicy retry_;
};

}  // namespace palp

#endif  // PALP_PROVIDERS_HPP_
