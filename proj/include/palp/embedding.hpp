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

#ifndef PALP_EMBEDDING_HPP_
#define PALP_EMBEDDING_HPP_

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "palp/corpus.hpp"
#include "palp/error.hpp"
#include "palp/io.hpp"

namespace palp
{

/// Rows are examples, columns are feature dimensions.
using EmbeddingMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EncoderProfile
{
  std::string name = "mock";
  int dim = 256;
  std::size_t max_seq_len = 2048;  ///< budget in estimated units
  std::string charset_note = "utf-8";

  void validate() const
  {
    if (dim < 1) {
      throw user_error("encoder '" + name + "': dim must be >= 1");
    }
    if (max_seq_len < 1) {
      throw user_error("encoder '" + name + "': max_seq_len must be >= 1");
    }
  }
};

namespace detail
{
enum class UnitClass
{
  space,
  word,
  punct,
  other
};

inline UnitClass classify(unsigned char c)
{
  if (c < 0x80) {
    if (std::isspace(c)) {
      return UnitClass::space;
    }
    if (std::isalnum(c) || c == '_') {
      return UnitClass::word;
    }
    return UnitClass::punct;
  }
  return UnitClass::other;
}

/// Byte offset of the first byte of every unit.
inline std::vector<std::size_t> unit_starts(std::string_view text)
{
  std::vector<std::size_t> starts;
  bool in_word = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    switch (classify(c)) {
      case UnitClass::space:
        in_word = false;
        break;
      case UnitClass::word:
        if (!in_word) {
          starts.push_back(i);
        }
        in_word = true;
        break;
      case UnitClass::punct:
        starts.push_back(i);
        in_word = false;
        break;
      case UnitClass::other:
        // one unit per code point; UTF-8 continuation bytes are 10xxxxxx
        if ((c & 0xC0) != 0x80) {
          starts.push_back(i);
        }
        in_word = false;
        break;
    }
  }
  return starts;
}
}  // namespace detail

/// Approximate token count: every run of ASCII letters/digits is one unit,
/// every ASCII punctuation character is one unit, every non-ASCII code
/// point is one unit, whitespace is free. Subword tokenizers never produce
/// fewer tokens than words, so this does not overshoot on ASCII text.
inline std::size_t estimate_units(std::string_view text) { return detail::unit_starts(text).size(); }

struct LengthCheck
{
  bool ok = true;
  std::size_t estimated_units = 0;
};

inline LengthCheck length_check(const EncoderProfile & profile, std::string_view text)
{
  const auto units = estimate_units(text);
  return {units <= profile.max_seq_len, units};
}

/// Drop leading units so at most `budget` remain. Keeps the tail, which is
/// where the query sits in a prefixed prompt.
inline std::string truncate_to_budget(std::string_view text, std::size_t budget)
{
  const auto starts = detail::unit_starts(text);
  if (starts.size() <= budget) {
    return std::string(text);
  }
  if (budget == 0) {
    return {};
  }
  return std::string(text.substr(starts[starts.size() - budget]));
}

inline void check_finite(const EmbeddingMatrix & m, const std::string & what)
{
  if (!m.allFinite()) {
    throw user_error(what + ": non-finite value");
  }
}

inline EmbeddingMatrix rows_to_matrix(const std::vector<std::vector<double>> & rows, int dim)
{
  EmbeddingMatrix m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != dim) {
      throw runtime_error("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                          " values, expected " + std::to_string(dim));
    }
    for (int j = 0; j < dim; ++j) {
      m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

// -- portable embedding file -------------------------------------------------
//
//   "PALPEMB1"  magic, 8 bytes
//   n           u32   feature dimension
//   count       u64   number of records
//   count x { label i32, n x f64 }
//
// All integers and floats little-endian. The optional sidecar "<path>.idx"
// holds one "<sha256 of prompt bytes, hex> <record byte offset>" per line.

inline constexpr std::string_view kEmbeddingMagic = "PALPEMB1";
inline constexpr std::size_t kEmbeddingHeaderBytes = 8 + 4 + 8;

inline fs::path sidecar_path(const fs::path & path) { return fs::path(path.string() + ".idx"); }

inline std::string encode_embeddings(const EmbeddingMatrix & matrix, const Labels & labels)
{
  if (static_cast<std::size_t>(matrix.rows()) != labels.size()) {
    throw user_error("export: " + std::to_string(matrix.rows()) + " rows but " + std::to_string(labels.size()) +
                     " labels");
  }
  ByteWriter w;
  w.raw(kEmbeddingMagic);
  w.u32(static_cast<std::uint32_t>(matrix.cols()));
  w.u64(static_cast<std::uint64_t>(matrix.rows()));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    w.i32(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      w.f64(matrix(i, j));
    }
  }
  return w.bytes();
}

inline std::size_t record_offset(std::size_t index, std::size_t dim)
{
  return kEmbeddingHeaderBytes + index * (4 + 8 * dim);
}

/// Write the portable file; when prompts are given (one per row) also write
/// the sidecar index.
inline void export_embeddings(
  const EmbeddingMatrix & matrix, const Labels & labels, const fs::path & path,
  const std::vector<std::string> * prompts = nullptr)
{
  write_file_atomic(path, encode_embeddings(matrix, labels));
  if (prompts != nullptr) {
    if (prompts->size() != labels.size()) {
      throw user_error("export: prompt count does not match row count");
    }
    std::ostringstream idx;
    for (std::size_t i = 0; i < prompts->size(); ++i) {
      idx << sha256_hex((*prompts)[i]) << ' ' << record_offset(i, static_cast<std::size_t>(matrix.cols())) << '\n';
    }
    write_file_atomic(sidecar_path(path), idx.str());
  }
}

struct EmbeddingFile
{
  EmbeddingMatrix matrix;
  Labels labels;
};

inline EmbeddingFile decode_embeddings(std::string_view bytes, const std::string & origin)
{
  ByteReader r(bytes, origin);
  if (r.raw(kEmbeddingMagic.size()) != kEmbeddingMagic) {
    throw user_error(origin + ": not an embedding file (bad magic)");
  }
  const auto n = r.u32();
  const auto count = r.u64();
  const std::size_t expected = record_offset(count, n);
  if (bytes.size() != expected) {
    throw runtime_error(origin + ": size " + std::to_string(bytes.size()) + " does not match header (expected " +
                        std::to_string(expected) + ")");
  }
  EmbeddingFile out;
  out.matrix.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n));
  out.labels.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    out.labels[i] = r.i32();
    for (std::uint32_t j = 0; j < n; ++j) {
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.f64();
    }
  }
  return out;
}

inline EmbeddingFile import_embeddings(const fs::path & path)
{
  if (!fs::exists(path)) {
    throw user_error("embedding file not found: " + path.string());
  }
  return decode_embeddings(read_file(path), path.string());
}

/// Parse a sidecar index into prompt-hash -> record offset.
inline std::map<std::string, std::size_t> load_sidecar(const fs::path & path)
{
  std::map<std::string, std::size_t> out;
  std::istringstream in(read_file(path));
  std::string hash;
  std::size_t offset = 0;
  while (in >> hash >> offset) {
    out[hash] = offset;
  }
  return out;
}

}  // namespace palp

#endif  // PALP_EMBEDDING_HPP_
