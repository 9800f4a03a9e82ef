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

#ifndef PALP_IO_HPP_
#define PALP_IO_HPP_

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "palp/error.hpp"

namespace palp
{

namespace fs = std::filesystem;

/// Append-only little-endian byte buffer.
class ByteWriter
{
public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.append(s); }
  void str(std::string_view s)
  {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
  }

  const std::string & bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

private:
  template <typename U>
  void put_le(U v)
  {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
  }

  std::string bytes_;
};

/// Bounds-checked little-endian reader over a byte string. Running past
/// the end throws a runtime error naming `what`.
class ByteReader
{
public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get_le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::string_view raw(std::size_t n) { return take(n); }
  std::string str()
  {
    const auto n = u32();
    return std::string(take(n));
  }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

private:
  std::string_view take(std::size_t n)
  {
    if (n > remaining()) {
      throw runtime_error(what_ + ": truncated at byte " + std::to_string(pos_));
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename U>
  U get_le()
  {
    const auto s = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    }
    return v;
  }

  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const fs::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw user_error("cannot open file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write via a temp file in the same directory plus rename, so readers
/// never observe a partially written file.
inline void write_file_atomic(const fs::path & path, std::string_view bytes)
{
  const auto dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::random_device rd;
  const auto tmp = dir / (path.filename().string() + ".tmp" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw runtime_error("cannot write file: " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      throw runtime_error("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw runtime_error("cannot rename into place: " + path.string());
  }
}

using Digest = std::array<unsigned char, 32>;

inline Digest sha256(std::string_view data)
{
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw runtime_error("sha256 failed");
  }
  return out;
}

inline std::string to_hex(const Digest & d)
{
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(d.size() * 2);
  for (auto c : d) {
    s.push_back(kHex[c >> 4]);
    s.push_back(kHex[c & 0xF]);
  }
  return s;
}

inline std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view data)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace palp

#endif  // PALP_IO_HPP_
