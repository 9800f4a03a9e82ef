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

#ifndef PALP_CORPUS_HPP_
#define PALP_CORPUS_HPP_

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "palp/error.hpp"
#include "palp/io.hpp"
#include "palp/rng.hpp"
#include "palp/strings.hpp"

namespace palp
{

using Labels = std::vector<int>;

struct TaskSchema
{
  std::string task_name;
  std::vector<std::string> class_names;
  bool is_pair = false;

  int num_classes() const { return static_cast<int>(class_names.size()); }

  void validate() const
  {
    if (class_names.size() < 2) {
      throw user_error("task '" + task_name + "': at least two classes are required");
    }
    const std::set<std::string> distinct(class_names.begin(), class_names.end());
    if (distinct.size() != class_names.size()) {
      throw user_error("task '" + task_name + "': class names must be distinct");
    }
  }

  /// Index of a class name, if present.
  std::optional<int> class_index(const std::string & name) const
  {
    const auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it == class_names.end()) {
      return std::nullopt;
    }
    return static_cast<int>(it - class_names.begin());
  }
};

struct LabeledExample
{
  int id = 0;         ///< dense index within the owning split
  int source_id = 0;  ///< index in the file the example was loaded from
  std::string text_a;
  std::optional<std::string> text_b;
  int label = 0;
};

struct Split
{
  TaskSchema schema;
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  Labels labels() const
  {
    Labels out;
    out.reserve(examples.size());
    for (const auto & ex : examples) {
      out.push_back(ex.label);
    }
    return out;
  }

  std::vector<std::size_t> class_histogram() const
  {
    std::vector<std::size_t> h(static_cast<std::size_t>(schema.num_classes()), 0);
    for (const auto & ex : examples) {
      ++h[static_cast<std::size_t>(ex.label)];
    }
    return h;
  }
};

struct FewShotSpec
{
  int shots_per_class = 0;
  std::uint64_t seed = 0;
  bool allow_deficit = false;  ///< take every member of a class that has fewer than k
};

enum class DataFormat
{
  jsonl,
  csv
};

inline DataFormat parse_data_format(const std::string & s)
{
  if (s == "jsonl" || s == "json") {
    return DataFormat::jsonl;
  }
  if (s == "csv") {
    return DataFormat::csv;
  }
  throw user_error("unknown dataset format '" + s + "' (expected jsonl or csv)");
}

/// Guess the format from the file extension (".csv" is csv, anything else jsonl).
inline DataFormat guess_data_format(const fs::path & path)
{
  return path.extension() == ".csv" ? DataFormat::csv : DataFormat::jsonl;
}

namespace detail
{

struct CsvRecord
{
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line on which the record starts
};

// RFC 4180: comma separated, fields optionally double-quoted, "" escapes a
// quote inside a quoted field, quoted fields may span lines.
inline std::vector<CsvRecord> parse_csv(const std::string & text, const std::string & origin)
{
  std::vector<CsvRecord> records;
  CsvRecord rec;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  rec.line = 1;

  auto end_field = [&] {
    rec.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
    if (!blank) {
      records.push_back(std::move(rec));
    }
    rec = CsvRecord{};
    rec.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') {
          ++line;
        }
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw user_error(origin + ": line " + std::to_string(line) + ": stray quote in unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) {
    throw user_error(origin + ": line " + std::to_string(rec.line) + ": unterminated quoted field");
  }
  if (field_started || !field.empty() || !rec.fields.empty()) {
    end_record();
  }
  return records;
}

inline int resolve_label_name(const TaskSchema & schema, const std::string & raw, const std::string & where)
{
  if (auto idx = schema.class_index(raw)) {
    return *idx;
  }
  try {
    std::size_t used = 0;
    const long v = std::stol(raw, &used);
    if (used == raw.size() && v >= 0 && v < schema.num_classes()) {
      return static_cast<int>(v);
    }
  } catch (const std::exception &) {
  }
  throw user_error(where + ": unknown label '" + raw + "'");
}

inline void check_example(const TaskSchema & schema, const LabeledExample & ex, const std::string & where)
{
  if (ex.text_a.empty()) {
    throw user_error(where + ": empty text");
  }
  if (schema.is_pair && (!ex.text_b || ex.text_b->empty())) {
    throw user_error(where + ": missing text2 on a sentence-pair task");
  }
  if (!schema.is_pair && ex.text_b) {
    throw user_error(where + ": text2 given on a single-sentence task");
  }
  if (ex.label < 0 || ex.label >= schema.num_classes()) {
    throw user_error(where + ": label " + std::to_string(ex.label) + " out of range");
  }
}

}  // namespace detail

/// Load a split from JSONL (`{"text":..., "text2":..., "label":...}` per
/// line) or CSV (header `text[,text2],label`). Labels may be integers or
/// class names. Ids follow file order.
inline Split load_dataset(const fs::path & path, DataFormat format, const TaskSchema & schema)
{
  schema.validate();
  if (!fs::exists(path)) {
    throw user_error("dataset not found: " + path.string());
  }
  const std::string text = read_file(path);
  const std::string origin = path.string();
  Split split{schema, {}};

  auto push = [&](LabeledExample ex, const std::string & where) {
    ex.id = static_cast<int>(split.examples.size());
    ex.source_id = ex.id;
    detail::check_example(schema, ex, where);
    split.examples.push_back(std::move(ex));
  };

  if (format == DataFormat::jsonl) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) {
        nl = text.size();
      }
      ++line_no;
      const std::string line = trim(std::string_view(text).substr(pos, nl - pos));
      pos = nl + 1;
      if (line.empty()) {
        continue;
      }
      const std::string where = origin + ": line " + std::to_string(line_no);
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error & e) {
        throw user_error(where + ": malformed JSON (" + e.what() + ")");
      }
      if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string() || !obj.contains("label")) {
        throw user_error(where + ": expected an object with string 'text' and 'label'");
      }
      LabeledExample ex;
      ex.text_a = obj["text"].get<std::string>();
      if (obj.contains("text2") && !obj["text2"].is_null()) {
        if (!obj["text2"].is_string()) {
          throw user_error(where + ": 'text2' must be a string");
        }
        ex.text_b = obj["text2"].get<std::string>();
      }
      const auto & lab = obj["label"];
      if (lab.is_number_integer()) {
        ex.label = lab.get<int>();
      } else if (lab.is_string()) {
        ex.label = detail::resolve_label_name(schema, lab.get<std::string>(), where);
      } else {
        throw user_error(where + ": label must be an integer or a class name");
      }
      push(std::move(ex), where);
    }
  } else {
    const auto records = detail::parse_csv(text, origin);
    if (records.empty()) {
      throw user_error(origin + ": empty dataset");
    }
    const auto & header = records.front().fields;
    auto column = [&](const std::string & name) -> std::optional<std::size_t> {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        return std::nullopt;
      }
      return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_text = column("text");
    const auto c_text2 = column("text2");
    const auto c_label = column("label");
    if (!c_text || !c_label) {
      throw user_error(origin + ": CSV header must contain 'text' and 'label' columns");
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto & rec = records[r];
      const std::string where = origin + ": line " + std::to_string(rec.line);
      if (rec.fields.size() != header.size()) {
        throw user_error(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(rec.fields.size()));
      }
      LabeledExample ex;
      ex.text_a = rec.fields[*c_text];
      if (c_text2 && !rec.fields[*c_text2].empty()) {
        ex.text_b = rec.fields[*c_text2];
      }
      ex.label = detail::resolve_label_name(schema, rec.fields[*c_label], where);
      push(std::move(ex), where);
    }
  }

  if (split.examples.empty()) {
    throw user_error(origin + ": empty dataset");
  }
  return split;
}

/// Draw exactly k examples per class without replacement.
///
/// One Rng is seeded with spec.seed. Classes are visited in ascending
/// index order; within a class the members (in id order) undergo a partial
/// Fisher-Yates: for i in [0, k), swap member i with member i + below(size - i).
/// The output is class-major in draw order, with fresh dense ids and the
/// original ids kept in source_id.
inline Split sample_few_shot(const Split & train, const FewShotSpec & spec)
{
  if (spec.shots_per_class < 0) {
    throw user_error("shots_per_class must be non-negative");
  }
  const auto k = static_cast<std::size_t>(spec.shots_per_class);
  const int num_classes = train.schema.num_classes();
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < train.examples.size(); ++i) {
    members[static_cast<std::size_t>(train.examples[i].label)].push_back(i);
  }
  if (!spec.allow_deficit) {
    for (int c = 0; c < num_classes; ++c) {
      const auto count = members[static_cast<std::size_t>(c)].size();
      if (count < k) {
        throw user_error("class '" + train.schema.class_names[static_cast<std::size_t>(c)] + "' has only " +
                         std::to_string(count) + " examples but " + std::to_string(k) + " shots were requested");
      }
    }
  }

  Rng rng(spec.seed);
  Split out{train.schema, {}};
  for (auto & pool : members) {
    const std::size_t take = std::min(k, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      LabeledExample ex = train.examples[pool[i]];
      ex.id = static_cast<int>(out.examples.size());
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace palp

#endif  // PALP_CORPUS_HPP_
