/*
 * Licensed to the Apache Software Foundation (ASF) under one
 * or more contributor license agreements.  See the NOTICE file
 * distributed with this work for additional information
 * regarding copyright ownership.  The ASF licenses this file
 * to you under the Apache License, Version 2.0 (the
 * "License"); you may not use this file except in compliance
 * with the License.  You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

/*!
 * \file schedscope/common.hpp
 * \brief Error type, deterministic random numbers and small formatting helpers
 *  shared by every module.
 */
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace schedscope {

enum class ErrorCode : int {
  kMalformedLine,
  kDuplicateRecordId,
  kUnknownTask,
  kInvalidStep,
  kUnknownRecord,
  kUnregisteredMetric,
  kNonNumericValue,
  kEmptyMatrix,
  kTooFewRows,
  kKTooLarge,
  kEmptyInput,
  kMissingLabel,
  kZeroBaseline,
  kNoBaseline,
  kCyclicTask,
  kTaskMismatch,
  kInvalidSpec,
  kInternal,
};

inline const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kDuplicateRecordId: return "DuplicateRecordId";
    case ErrorCode::kUnknownTask: return "UnknownTask";
    case ErrorCode::kInvalidStep: return "InvalidStep";
    case ErrorCode::kUnknownRecord: return "UnknownRecord";
    case ErrorCode::kUnregisteredMetric: return "UnregisteredMetric";
    case ErrorCode::kNonNumericValue: return "NonNumericValue";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kMissingLabel: return "MissingLabel";
    case ErrorCode::kZeroBaseline: return "ZeroBaseline";
    case ErrorCode::kNoBaseline: return "NoBaseline";
    case ErrorCode::kCyclicTask: return "CyclicTask";
    case ErrorCode::kTaskMismatch: return "TaskMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

/*!
 * \brief Error raised by every fallible operation.
 *
 * `subject` names the offending entity (record id, metric name, task id) and
 * `line` carries the 1-based input line for parse errors, 0 otherwise.
 */
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string subject, std::string detail = {}, int line = 0)
      : std::runtime_error(Compose(code, subject, detail, line)),
        code_(code),
        subject_(std::move(subject)),
        line_(line) {}

  ErrorCode code() const { return code_; }
  const std::string& subject() const { return subject_; }
  int line() const { return line_; }

 private:
  static std::string Compose(ErrorCode code, const std::string& subject,
                             const std::string& detail, int line) {
    std::string msg = ErrorCodeName(code);
    msg += "(";
    msg += line > 0 ? std::to_string(line) : subject;
    msg += ")";
    if (!detail.empty()) msg += ": " + detail;
    return msg;
  }

  ErrorCode code_;
  std::string subject_;
  int line_;
};

/*!
 * \brief Seeded generator whose output is identical on every platform.
 *
 * std::mt19937_64 is fully specified by the standard; the distributions are
 * not, so the uniform and normal draws are derived here.
 */
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  /*! \brief Uniform in [0, 1) with 53 random bits. */
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /*! \brief Uniform integer in [0, n). */
  size_t Index(size_t n) { return static_cast<size_t>(Uniform() * static_cast<double>(n)); }

  double Normal() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = Uniform();
    double u2 = Uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/*! \brief Shortest decimal text that parses back to the same double. */
inline std::string FormatDouble(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline std::optional<double> ParseDouble(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::string Trim(std::string_view text) {
  size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return std::string(text.substr(b, e - b));
}

inline std::vector<std::string> SplitString(std::string_view text, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == sep) {
      out.emplace_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/*! \brief Calls `fn(line_no, line)` for every line, 1-based, CR stripped. */
template <typename Fn>
void ForEachLine(std::string_view text, Fn&& fn) {
  int line_no = 0;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
    start = end + 1;
  }
}

/*! \brief 64-bit FNV-1a, used for content digests. */
class Fnv1a {
 public:
  void Update(std::string_view data) {
    for (unsigned char c : data) {
      hash_ ^= c;
      hash_ *= 0x100000001b3ULL;
    }
    // Field separator so ("ab","c") and ("a","bc") differ.
    hash_ ^= 0xff;
    hash_ *= 0x100000001b3ULL;
  }
  uint64_t value() const { return hash_; }
  std::string Hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[15 - i] = digits[(hash_ >> (4 * i)) & 0xf];
    return out;
  }

 private:
  uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace schedscope
