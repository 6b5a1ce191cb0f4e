// Copyright 2026 The maskbench Authors.
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

#pragma once

// Word recognition rate and the normalized total edit distance measure.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "maskbench/annotation_store.hpp"
#include "maskbench/error.hpp"
#include "maskbench/preprocess.hpp"
#include "maskbench/segmentation.hpp"

namespace maskbench {

/// Decodes UTF-8 into Unicode scalar values. Malformed sequences decode to
/// U+FFFD one byte at a time.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      else cp = (cp << 6) | (b & 0x3F);
    }
    if (ok && (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

/// Levenshtein distance with unit insert/delete/substitute costs.
inline std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  return edit_distance(decode_utf8(a), decode_utf8(b));
}

struct MatchOptions {
  bool case_insensitive = false;
};

namespace detail {

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\v' || c == U'\f' || c == 0x00A0;
}

// ASCII and Latin-1 only.
inline char32_t fold_case(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c >= 0x00C0 && c <= 0x00DE && c != 0x00D7) return c + 0x20;
  return c;
}

}  // namespace detail

/// Trims, collapses internal whitespace runs to one space and optionally
/// folds case.
inline std::u32string normalize_text(std::string_view s, const MatchOptions& options = {}) {
  const std::u32string in = decode_utf8(s);
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : in) {
    if (detail::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(options.case_insensitive ? detail::fold_case(c) : c);
  }
  return out;
}

inline bool words_match(std::string_view truth, std::string_view hyp, const MatchOptions& options = {}) {
  return normalize_text(truth, options) == normalize_text(hyp, options);
}

/// Edit distance between the normalized strings divided by the normalized
/// ground-truth length.
inline double normalized_distance(std::string_view truth, std::string_view hyp, const MatchOptions& options = {}) {
  const std::u32string t = normalize_text(truth, options);
  if (t.empty()) throw Error(ErrorCode::kEmptyTruth, "ground truth is empty after normalization");
  const std::u32string h = normalize_text(hyp, options);
  return static_cast<double>(edit_distance(t, h)) / static_cast<double>(t.size());
}

struct WordOutcome {
  std::string image_id;
  std::string truth;
  std::string hypothesis;
  bool correct = false;
  double norm_edit_distance = 0.0;

  friend bool operator==(const WordOutcome&, const WordOutcome&) = default;
};

struct EvalReport {
  std::string dataset_name;
  std::size_t n_images = 0;
  /// Percentage in [0, 100].
  double word_recognition_rate = 0.0;
  double total_edit_distance = 0.0;
  std::vector<WordOutcome> rows;
};

struct TruthEntry {
  std::string image_id;
  std::string ground_truth;
};

/// Scores one result per entry. Entries with no result, or whose result is not
/// ok, are scored against an empty hypothesis.
inline EvalReport score_dataset(std::string dataset_name, const std::vector<TruthEntry>& entries,
                                const std::vector<OcrResult>& results, const MatchOptions& options = {}) {
  if (entries.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot score an empty dataset");
  std::map<std::string, const OcrResult*, std::less<>> by_id;
  for (const OcrResult& r : results) {
    if (!by_id.emplace(r.image_id, &r).second) {
      throw Error(ErrorCode::kDuplicateResult, "more than one result for '" + r.image_id + "'");
    }
  }
  for (const auto& [id, r] : by_id) {
    const bool known = std::any_of(entries.begin(), entries.end(),
                                   [&](const TruthEntry& e) { return e.image_id == id; });
    if (!known) throw Error(ErrorCode::kUnknownImage, "result for '" + id + "' has no manifest entry");
  }

  EvalReport report;
  report.dataset_name = std::move(dataset_name);
  report.n_images = entries.size();
  std::size_t correct = 0;
  for (const TruthEntry& e : entries) {
    WordOutcome row{e.image_id, e.ground_truth, {}, false, 0.0};
    const auto it = by_id.find(e.image_id);
    if (it != by_id.end() && it->second->exit_status == OcrStatus::kOk) row.hypothesis = it->second->text;
    try {
      row.norm_edit_distance = normalized_distance(row.truth, row.hypothesis, options);
    } catch (const Error& err) {
      throw Error(err.code(), "entry '" + e.image_id + "': " + err.what());
    }
    row.correct = words_match(row.truth, row.hypothesis, options);
    correct += row.correct ? 1 : 0;
    report.total_edit_distance += row.norm_edit_distance;
    report.rows.push_back(std::move(row));
  }
  report.word_recognition_rate = 100.0 * static_cast<double>(correct) / static_cast<double>(entries.size());
  return report;
}

inline EvalReport score_dataset(const DatasetManifest& manifest, const std::vector<OcrResult>& results,
                                const MatchOptions& options = {}) {
  std::vector<TruthEntry> entries;
  for (const ManifestEntry& e : manifest.entries) entries.push_back({e.image_id, e.ground_truth});
  return score_dataset(manifest.name, entries, results, options);
}

// ---------------------------------------------------------------------------
// Report rendering

enum class TableFormat { kText, kCsv };

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed1(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

}  // namespace detail

/// Splits CSV text into records of fields (RFC 4180 quoting).
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
      }
      fields.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::kInvalidArgument, "csv: unterminated quoted field");
  if (any || !field.empty()) {
    fields.push_back(std::move(field));
    records.push_back(std::move(fields));
  }
  return records;
}

inline constexpr std::string_view kSummaryCsvHeader = "dataset,n,wrr,total_edit_distance";
inline constexpr std::string_view kRowsCsvHeader = "image_id,truth,hypothesis,correct,norm_edit_distance";

/// Table with columns Algorithm / Edit distance measure / Word recognition
/// rate. Text uses one decimal; CSV keeps full precision.
inline std::string render_table(const std::vector<EvalReport>& reports, TableFormat format) {
  if (reports.empty()) throw Error(ErrorCode::kInvalidArgument, "render_table needs at least one report");
  std::ostringstream os;
  if (format == TableFormat::kCsv) {
    os << kSummaryCsvHeader << "\n";
    for (const EvalReport& r : reports) {
      os << detail::csv_field(r.dataset_name) << ',' << r.n_images << ',' << format_real(r.word_recognition_rate)
         << ',' << format_real(r.total_edit_distance) << "\n";
    }
    return os.str();
  }

  const std::vector<std::string> header{"Algorithm", "Edit distance measure", "Word recognition rate"};
  std::vector<std::vector<std::string>> cells;
  for (const EvalReport& r : reports) {
    cells.push_back({r.dataset_name, detail::fixed1(r.total_edit_distance), detail::fixed1(r.word_recognition_rate)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], decode_utf8(row[c]).size());
  }
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t pad = width[c] - decode_utf8(row[c]).size();
      if (c > 0) os << " | ";
      if (c == 0) os << row[c] << std::string(pad, ' ');
      else os << std::string(pad, ' ') << row[c];
    }
    os << "\n";
  };
  emit(header);
  for (std::size_t c = 0; c < width.size(); ++c) {
    if (c > 0) os << "-+-";
    os << std::string(width[c], '-');
  }
  os << "\n";
  for (const auto& row : cells) emit(row);
  return os.str();
}

/// Per-image rows for the second CSV file.
inline std::string render_rows_csv(const EvalReport& report) {
  std::ostringstream os;
  os << kRowsCsvHeader << "\n";
  for (const WordOutcome& w : report.rows) {
    os << detail::csv_field(w.image_id) << ',' << detail::csv_field(w.truth) << ','
       << detail::csv_field(w.hypothesis) << ',' << (w.correct ? "true" : "false") << ','
       << format_real(w.norm_edit_distance) << "\n";
  }
  return os.str();
}

/// Reads summary rows written by render_table(..., kCsv). Rows are not
/// restored.
inline std::vector<EvalReport> parse_summary_csv(std::string_view text) {
  const auto records = parse_csv(text);
  if (records.empty() || records.front().size() != 4 || records.front()[0] != "dataset") {
    throw Error(ErrorCode::kInvalidArgument, "summary csv: missing header");
  }
  std::vector<EvalReport> out;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != 4) throw Error(ErrorCode::kInvalidArgument, "summary csv: expected 4 fields");
    EvalReport r;
    r.dataset_name = f[0];
    try {
      r.n_images = static_cast<std::size_t>(std::stoull(f[1]));
      r.word_recognition_rate = std::stod(f[2]);
      r.total_edit_distance = std::stod(f[3]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidArgument, "summary csv: bad number on line " + std::to_string(i + 1));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace maskbench
