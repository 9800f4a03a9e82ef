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

#ifndef PALP_GATEWAY_HPP_
#define PALP_GATEWAY_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "palp/embedding.hpp"
#include "palp/error.hpp"
#include "palp/io.hpp"
#include "palp/providers.hpp"

namespace palp
{

/// Cache key: SHA-256 over the encoder name, a NUL byte, and the exact
/// prompt bytes.
inline std::string cache_key(const std::string & encoder_name, const std::string & text)
{
  std::string buf;
  buf.reserve(encoder_name.size() + 1 + text.size());
  buf += encoder_name;
  buf.push_back('\0');
  buf += text;
  return sha256_hex(buf);
}

/// Content-addressed embedding cache, optionally persisted to one
/// append-only file per encoder:
///
///   record = key (64 hex chars) | dim u32 | dim x f64     (little-endian)
///
/// On load the last record for a key wins and a truncated tail record is
/// ignored. Readers share a lock; writers serialize.
class EmbeddingCache
{
public:
  EmbeddingCache() = default;

  /// Open (or create) the persistent cache for `encoder_name` under `dir`.
  EmbeddingCache(const fs::path & dir, const std::string & encoder_name)
  {
    std::string safe;
    for (char c : encoder_name) {
      safe.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    file_ = dir / (safe + ".cache");
    if (fs::exists(*file_)) {
      load(read_file(*file_));
    }
  }

  std::optional<std::vector<double>> get(const std::string & key, int dim) const
  {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end() || static_cast<int>(it->second.size()) != dim) {
      return std::nullopt;
    }
    return it->second;
  }

  void put_many(const std::vector<std::pair<std::string, std::vector<double>>> & items)
  {
    if (items.empty()) {
      return;
    }
    std::unique_lock lock(mutex_);
    ByteWriter w;
    for (const auto & [key, v] : items) {
      entries_[key] = v;
      w.raw(key);
      w.u32(static_cast<std::uint32_t>(v.size()));
      for (double x : v) {
        w.f64(x);
      }
    }
    if (file_) {
      std::ofstream out(*file_, std::ios::binary | std::ios::app);
      out.write(w.bytes().data(), static_cast<std::streamsize>(w.size()));
      if (!out) {
        throw runtime_error("cannot append to embedding cache " + file_->string());
      }
    }
  }

  std::size_t size() const
  {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  const std::optional<fs::path> & path() const { return file_; }

private:
  void load(const std::string & bytes)
  {
    ByteReader r(bytes, "embedding cache");
    while (r.remaining() >= 64 + 4) {
      const std::string key(r.raw(64));
      const auto dim = r.u32();
      if (r.remaining() < 8ULL * dim) {
        break;
      }
      std::vector<double> v(dim);
      for (auto & x : v) {
        x = r.f64();
      }
      entries_[key] = std::move(v);
    }
  }

  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::vector<double>> entries_;
  std::optional<fs::path> file_;
};

struct GatewayOptions
{
  std::size_t batch_size = 32;
  std::size_t parallelism = 4;
  bool truncate = false;  ///< cut over-budget prompts instead of failing
};

struct GatewayStats
{
  std::size_t texts_requested = 0;
  std::size_t cache_hits = 0;
  std::size_t texts_embedded = 0;
  std::size_t provider_calls = 0;
};

/// Front door to an encoder: length guard, cache, batching, bounded
/// parallel dispatch, dimension checks, order-preserving assembly.
class Gateway
{
public:
  Gateway(
    EncoderProfile profile, std::shared_ptr<EmbeddingProvider> provider,
    std::shared_ptr<EmbeddingCache> cache = std::make_shared<EmbeddingCache>(), GatewayOptions options = {})
  : profile_(std::move(profile)), provider_(std::move(provider)), cache_(std::move(cache)), options_(options)
  {
    profile_.validate();
    if (!provider_) {
      throw user_error("gateway needs a provider");
    }
    if (!cache_) {
      cache_ = std::make_shared<EmbeddingCache>();
    }
    options_.batch_size = std::max<std::size_t>(1, options_.batch_size);
    options_.parallelism = std::max<std::size_t>(1, options_.parallelism);
  }

  const EncoderProfile & profile() const { return profile_; }
  const GatewayOptions & options() const { return options_; }
  std::string provider_kind() const { return provider_->kind(); }

  GatewayStats stats() const
  {
    std::lock_guard lock(stats_mutex_);
    return stats_;
  }

  EmbeddingMatrix embed(const std::vector<std::string> & texts)
  {
    if (texts.empty()) {
      throw user_error("embed: no texts given");
    }
    const int dim = profile_.dim;
    std::vector<std::string> prompts;
    prompts.reserve(texts.size());
    for (const auto & t : texts) {
      const auto check = length_check(profile_, t);
      if (check.ok) {
        prompts.push_back(t);
      } else if (options_.truncate) {
        prompts.push_back(truncate_to_budget(t, profile_.max_seq_len));
      } else {
        throw LengthLimitError(check.estimated_units, profile_.max_seq_len);
      }
    }

    std::vector<std::string> keys;
    keys.reserve(prompts.size());
    std::unordered_map<std::string, std::vector<double>> resolved;
    std::vector<std::size_t> misses;  // index of first occurrence of each missing key
    std::unordered_set<std::string> pending;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      keys.push_back(cache_key(profile_.name, prompts[i]));
      if (resolved.count(keys[i]) > 0) {
        continue;
      }
      if (auto v = cache_->get(keys[i], dim)) {
        resolved.emplace(keys[i], std::move(*v));
        ++hits;
      } else if (pending.insert(keys[i]).second) {
        misses.push_back(i);
      }
    }

    const std::size_t n_batches = (misses.size() + options_.batch_size - 1) / options_.batch_size;
    std::vector<std::vector<std::vector<double>>> batch_out(n_batches);
    run_batches(prompts, misses, batch_out);

    std::vector<std::pair<std::string, std::vector<double>>> fresh;
    fresh.reserve(misses.size());
    for (std::size_t b = 0; b < n_batches; ++b) {
      for (std::size_t j = 0; j < batch_out[b].size(); ++j) {
        const auto idx = misses[b * options_.batch_size + j];
        fresh.emplace_back(keys[idx], std::move(batch_out[b][j]));
      }
    }
    cache_->put_many(fresh);
    for (auto & [k, v] : fresh) {
      resolved.emplace(k, std::move(v));
    }

    EmbeddingMatrix out(static_cast<Eigen::Index>(prompts.size()), dim);
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      const auto & v = resolved.at(keys[i]);
      for (int j = 0; j < dim; ++j) {
        out(static_cast<Eigen::Index>(i), j) = v[static_cast<std::size_t>(j)];
      }
    }

    std::lock_guard lock(stats_mutex_);
    stats_.texts_requested += texts.size();
    stats_.cache_hits += hits;
    stats_.texts_embedded += misses.size();
    stats_.provider_calls += n_batches;
    return out;
  }

private:
  void run_batches(
    const std::vector<std::string> & prompts, const std::vector<std::size_t> & misses,
    std::vector<std::vector<std::vector<double>>> & batch_out)
  {
    const std::size_t n_batches = batch_out.size();
    if (n_batches == 0) {
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
      while (true) {
        const std::size_t b = next.fetch_add(1);
        if (b >= n_batches) {
          return;
        }
        try {
          std::vector<std::string> batch;
          const std::size_t begin = b * options_.batch_size;
          const std::size_t end = std::min(misses.size(), begin + options_.batch_size);
          for (std::size_t i = begin; i < end; ++i) {
            batch.push_back(prompts[misses[i]]);
          }
          auto rows = provider_->embed_batch(batch);
          validate(rows, batch.size());
          batch_out[b] = std::move(rows);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) {
            failure = std::current_exception();
          }
          next.store(n_batches);
        }
      }
    };

    const std::size_t n_threads = std::min(options_.parallelism, n_batches);
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(n_threads);
      for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
      }
    }
    if (failure) {
      std::rethrow_exception(failure);
    }
  }

  void validate(const std::vector<std::vector<double>> & rows, std::size_t expected) const
  {
    if (rows.size() != expected) {
      throw runtime_error("encoder '" + profile_.name + "' returned " + std::to_string(rows.size()) +
                          " vectors for " + std::to_string(expected) + " texts");
    }
    for (const auto & v : rows) {
      if (static_cast<int>(v.size()) != profile_.dim) {
        throw runtime_error("dimension mismatch: encoder '" + profile_.name + "' returned " +
                            std::to_string(v.size()) + " dims, profile declares " + std::to_string(profile_.dim));
      }
      for (double x : v) {
        if (!std::isfinite(x)) {
          throw runtime_error("encoder '" + profile_.name + "' returned a non-finite value");
        }
      }
    }
  }

  EncoderProfile profile_;
  std::shared_ptr<EmbeddingProvider> provider_;
  std::shared_ptr<EmbeddingCache> cache_;
  GatewayOptions options_;
  mutable std::mutex stats_mutex_;
  GatewayStats stats_;
};

}  // namespace palp

#endif  // PALP_GATEWAY_HPP_
