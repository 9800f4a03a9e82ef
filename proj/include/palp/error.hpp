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

#ifndef PALP_ERROR_HPP_
#define PALP_ERROR_HPP_

#include <cstddef>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace palp
{

/// Coarse classification of failures. The CLI maps `user` to exit code 1
/// and everything else to exit code 2.
enum class ErrorKind
{
  user,          ///< bad input, bad config, unknown names
  runtime,       ///< numerical failure, I/O failure, permanent provider error
  transient,     ///< provider unreachable; retrying may help
  length_limit,  ///< prompt exceeds the encoder's length budget
};

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string & what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline Error user_error(const std::string & what) { return Error(ErrorKind::user, what); }
inline Error runtime_error(const std::string & what) { return Error(ErrorKind::runtime, what); }

/// Raised when a prompt does not fit the encoder's budget. Carries the
/// unit estimate so reports can show how far over the limit it was.
class LengthLimitError : public Error
{
public:
  LengthLimitError(std::size_t estimated_units, std::size_t budget)
  : Error(
      ErrorKind::length_limit,
      "prompt exceeds the length limit: ~" + std::to_string(estimated_units) +
        " units against a budget of " + std::to_string(budget)),
    estimated_units_(estimated_units),
    budget_(budget)
  {
  }

  std::size_t estimated_units() const noexcept { return estimated_units_; }
  std::size_t budget() const noexcept { return budget_; }

private:
  std::size_t estimated_units_;
  std::size_t budget_;
};

/// Prefix an error message with the phase it happened in, keeping its kind.
inline Error with_context(const Error & e, const std::string & phase)
{
  return Error(e.kind(), phase + ": " + e.what());
}

namespace detail
{
inline std::function<void(const std::string &)> & warning_sink()
{
  static std::function<void(const std::string &)> sink = [](const std::string & msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}
inline std::mutex & warning_mutex()
{
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Replace the process-wide warning sink (tests capture warnings this way).
inline void set_warning_sink(std::function<void(const std::string &)> sink)
{
  std::lock_guard lock(detail::warning_mutex());
  detail::warning_sink() = std::move(sink);
}

inline void warn(const std::string & msg)
{
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_sink()) {
    detail::warning_sink()(msg);
  }
}

}  // namespace palp

#endif  // PALP_ERROR_HPP_
