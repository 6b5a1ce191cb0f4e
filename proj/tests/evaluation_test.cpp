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

#include <gtest/gtest.h>

#include <random>

#include "maskbench/evaluation.hpp"
#include "support/oracles.hpp"

namespace maskbench {
namespace {

std::u32string random_string(std::mt19937_64& rng, std::size_t max_len, const std::u32string& alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::u32string s(len(rng), U' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

OcrResult ok(std::string id, std::string text) { return OcrResult{std::move(id), std::move(text), "t", OcrStatus::kOk}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected maskbench::Error";
  return ErrorCode::kInvalidArgument;
}

// ---------------------------------------------------------------- UTF-8

TEST(DecodeUtf8, ScalarValuesAndReplacement) {
  EXPECT_EQ(decode_utf8("a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80"), (std::u32string{U'a', 0xE9, 0x20AC, 0x1F600}));
  EXPECT_EQ(decode_utf8("\xFF" "a"), (std::u32string{0xFFFD, U'a'}));
  EXPECT_EQ(decode_utf8("\xC3"), std::u32string{0xFFFD});
  EXPECT_EQ(decode_utf8("\xC0\xAF"), (std::u32string{0xFFFD, 0xFFFD}));    // overlong
  EXPECT_EQ(decode_utf8("\xED\xA0\x80"), (std::u32string{0xFFFD, 0xFFFD, 0xFFFD}));  // surrogate
}

// ---------------------------------------------------------------- edit distance

TEST(EditDistance, Examples) {
  EXPECT_EQ(edit_distance("ROAD", "ROAD"), 0u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("caf\xC3\xA9", "cafe"), 1u);  // one scalar value, not two bytes
}

TEST(EditDistance, MatchesRecursiveOracle) {
  std::mt19937_64 rng(301);
  const std::u32string alphabet = U"abcAB é中";
  for (int trial = 0; trial < 500; ++trial) {
    const std::u32string a = random_string(rng, 12, alphabet);
    const std::u32string b = random_string(rng, 12, alphabet);
    ASSERT_EQ(edit_distance(a, b), oracle::edit_distance_recursive(a, b)) << trial;
  }
}

TEST(EditDistance, MetricProperties) {
  std::mt19937_64 rng(302);
  const std::u32string alphabet = U"abcd";
  for (int trial = 0; trial < 1000; ++trial) {
    const std::u32string a = random_string(rng, 10, alphabet);
    const std::u32string b = random_string(rng, 10, alphabet);
    const std::u32string c = random_string(rng, 10, alphabet);
    const std::size_t ab = edit_distance(a, b);
    ASSERT_EQ(ab, edit_distance(b, a));
    ASSERT_EQ(ab == 0, a == b);
    ASSERT_LE(edit_distance(a, c), ab + edit_distance(b, c));
    ASSERT_LE(ab, std::max(a.size(), b.size()));
  }
}

// ---------------------------------------------------------------- normalization

TEST(Normalize, TrimAndCollapseWhitespace) {
  EXPECT_EQ(normalize_text("  MAIN \t\n ST  "), U"MAIN ST");
  EXPECT_EQ(normalize_text("A\xC2\xA0" "B"), U"A B");
  EXPECT_EQ(normalize_text("   "), U"");
  EXPECT_EQ(normalize_text("Caf\xC3\x89", {true}), U"café");
  EXPECT_EQ(normalize_text("Caf\xC3\x89"), U"CafÉ");
}

TEST(NormalizedDistance, Examples) {
  EXPECT_EQ(normalized_distance("abc", "abd"), 1.0 / 3.0);
  EXPECT_EQ(normalized_distance("WORD", "WORD"), 0.0);
  EXPECT_EQ(normalized_distance("ab", ""), 1.0);
  EXPECT_EQ(normalized_distance(" PARK ", "PARK"), 0.0);
  EXPECT_EQ(normalized_distance("STOP", "stop", {true}), 0.0);
  EXPECT_EQ(code_of([] { normalized_distance(" \t", "x"); }), ErrorCode::kEmptyTruth);
}

TEST(NormalizedDistance, FullDeletionIsExactlyOne) {
  std::mt19937_64 rng(303);
  for (int i = 0; i < 100; ++i) {
    std::u32string t = random_string(rng, 12, U"xyz");
    if (t.empty()) t = U"x";
    std::string utf8;
    for (char32_t c : t) utf8 += static_cast<char>(c);
    EXPECT_EQ(normalized_distance(utf8, ""), 1.0);
  }
}

TEST(WordsMatch, CorrectImpliesZeroDistance) {
  std::mt19937_64 rng(304);
  for (int i = 0; i < 300; ++i) {
    std::string a, b;
    for (char32_t c : random_string(rng, 5, U"aA b")) a += static_cast<char>(c);
    for (char32_t c : random_string(rng, 5, U"aA b")) b += static_cast<char>(c);
    if (normalize_text(a).empty()) continue;
    for (bool fold : {false, true}) {
      if (words_match(a, b, {fold})) {
        ASSERT_EQ(normalized_distance(a, b, {fold}), 0.0);
      }
      ASSERT_EQ(normalized_distance(a, b, {fold}) == 0.0, words_match(a, b, {fold}));
    }
  }
}

// ---------------------------------------------------------------- scoring

TEST(ScoreDataset, AllCorrect) {
  const std::vector<TruthEntry> entries{{"a", "ROAD"}, {"b", "EXIT"}, {"c", "STOP"}, {"d", "PARK"}};
  const auto r = score_dataset("d", entries, {ok("a", "ROAD"), ok("b", "EXIT"), ok("c", "STOP"), ok("d", "PARK")});
  EXPECT_EQ(r.word_recognition_rate, 100.0);
  EXPECT_EQ(r.total_edit_distance, 0.0);
  EXPECT_EQ(r.n_images, 4u);
}

TEST(ScoreDataset, HalfCorrectOneEmpty) {
  const auto r = score_dataset("d", {{"a", "ROAD"}, {"b", "EXIT"}}, {ok("a", "ROAD"), ok("b", "")});
  EXPECT_EQ(r.word_recognition_rate, 50.0);
  EXPECT_EQ(r.total_edit_distance, 1.0);
}

TEST(ScoreDataset, TenScriptedPairs) {
  // Hand-scored: distances 0, 1/4, 1/4, 0, 0, 1, 0, 1, 2/4, 1/4 -> 3.25;
  // matches at rows 1, 4, 5, 7 -> 40%.
  const std::vector<std::pair<std::string, std::string>> pairs{
      {"ROAD", "ROAD"}, {"EXIT", "EXT"},      {"STOP", "ST0P"},     {"HOTEL", "HOTEL"},
      {"PARK", "PARK "}, {"CAFE", "cafe"},    {"MAIN ST", "MAIN  ST"}, {"BANK", ""},
      {"OPEN", "OPENED"}, {"caf\xC3\xA9", "cafe"},
  };
  std::vector<TruthEntry> entries;
  std::vector<OcrResult> results;
  double oracle_total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string id = "p" + std::to_string(i);
    entries.push_back({id, pairs[i].first});
    results.push_back(ok(id, pairs[i].second));
    const std::u32string t = normalize_text(pairs[i].first);
    oracle_total += static_cast<double>(oracle::edit_distance_recursive(t, normalize_text(pairs[i].second))) /
                    static_cast<double>(t.size());
  }
  std::reverse(results.begin(), results.end());  // order of results is irrelevant
  const auto r = score_dataset("scripted", entries, results);
  EXPECT_EQ(r.word_recognition_rate, 40.0);
  EXPECT_EQ(r.total_edit_distance, 3.25);
  EXPECT_EQ(r.total_edit_distance, oracle_total);
  ASSERT_EQ(r.rows.size(), 10u);
  EXPECT_EQ(r.rows[0].image_id, "p0");
  EXPECT_EQ(r.rows[8].norm_edit_distance, 0.5);

  const auto folded = score_dataset("scripted", entries, results, {true});
  EXPECT_EQ(folded.word_recognition_rate, 50.0);
  EXPECT_EQ(folded.total_edit_distance, 2.25);
}

TEST(ScoreDataset, MissingAndFailedResultsCountAsEmpty) {
  std::vector<OcrResult> results{ok("a", "ROAD")};
  results.push_back(OcrResult{"b", "", "t", OcrStatus::kTimeout});
  const auto r = score_dataset("d", {{"a", "ROAD"}, {"b", "EXIT"}, {"c", "STOP"}}, results);
  EXPECT_EQ(r.total_edit_distance, 2.0);
  EXPECT_EQ(r.rows[1].hypothesis, "");
  EXPECT_EQ(r.rows[2].hypothesis, "");
}

TEST(ScoreDataset, Errors) {
  const std::vector<TruthEntry> entries{{"a", "ROAD"}};
  EXPECT_EQ(code_of([&] { score_dataset("d", entries, {ok("a", "ROAD"), ok("a", "ROAD")}); }),
            ErrorCode::kDuplicateResult);
  EXPECT_EQ(code_of([&] { score_dataset("d", entries, {ok("zz", "ROAD")}); }), ErrorCode::kUnknownImage);
  EXPECT_EQ(code_of([&] { score_dataset("d", {}, {}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { score_dataset("d", {{"a", "  "}}, {}); }), ErrorCode::kEmptyTruth);
}

// ---------------------------------------------------------------- rendering

EvalReport report(std::string name, std::size_t n, double wrr, double total) {
  EvalReport r;
  r.dataset_name = std::move(name);
  r.n_images = n;
  r.word_recognition_rate = wrr;
  r.total_edit_distance = total;
  return r;
}

TEST(RenderTable, TextUsesOneDecimal) {
  const std::string text = render_table({report("street-signs", 31, 100.0 * 26 / 31, 12.0 / 7.0)}, TableFormat::kText);
  EXPECT_NE(text.find("Algorithm"), std::string::npos);
  EXPECT_NE(text.find("Edit distance measure"), std::string::npos);
  EXPECT_NE(text.find("Word recognition rate"), std::string::npos);
  EXPECT_NE(text.find("83.9"), std::string::npos);
  EXPECT_NE(text.find("1.7"), std::string::npos);
  EXPECT_EQ(text.find("83.87"), std::string::npos);
  // header, rule, one data row
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(RenderTable, ColumnsAreAligned) {
  const std::string text =
      render_table({report("a", 1, 100.0, 0.0), report("longer name", 2, 5.5, 12.25)}, TableFormat::kText);
  std::istringstream in(text);
  std::string line;
  std::vector<std::size_t> bars;
  while (std::getline(in, line)) {
    const auto first = line.find_first_of("|+");
    bars.push_back(first);
  }
  ASSERT_EQ(bars.size(), 4u);
  for (std::size_t b : bars) EXPECT_EQ(b, bars[0]);
}

TEST(RenderTable, CsvRoundTripsExactly) {
  const std::vector<EvalReport> reports{report("plain", 10, 60.0, 2.5),
                                        report("needs, \"quoting\"", 3, 100.0 / 3.0, 1.0 / 3.0 + 0.125)};
  const std::string csv = render_table(reports, TableFormat::kCsv);
  EXPECT_TRUE(csv.starts_with(std::string(kSummaryCsvHeader) + "\n"));
  const auto back = parse_summary_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].dataset_name, reports[i].dataset_name);
    EXPECT_EQ(back[i].n_images, reports[i].n_images);
    EXPECT_EQ(back[i].word_recognition_rate, reports[i].word_recognition_rate);
    EXPECT_EQ(back[i].total_edit_distance, reports[i].total_edit_distance);
  }
}

TEST(RenderTable, EmptyReportListRejected) {
  EXPECT_EQ(code_of([] { render_table({}, TableFormat::kText); }), ErrorCode::kInvalidArgument);
}

TEST(RenderRowsCsv, OneRowPerImage) {
  const auto r = score_dataset("d", {{"a", "ROAD"}, {"b", "Hi, \"you\""}}, {ok("a", "ROAD"), ok("b", "Hi")});
  const auto records = parse_csv(render_rows_csv(r));
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0], (std::vector<std::string>{"image_id", "truth", "hypothesis", "correct", "norm_edit_distance"}));
  EXPECT_EQ(records[1], (std::vector<std::string>{"a", "ROAD", "ROAD", "true", "0"}));
  EXPECT_EQ(records[2][1], "Hi, \"you\"");
  EXPECT_EQ(records[2][3], "false");
  EXPECT_EQ(std::stod(records[2][4]), r.rows[1].norm_edit_distance);
}

TEST(ParseCsv, QuotingAndLineEndings) {
  const auto rec = parse_csv("a,\"b,c\",\"d\"\"e\"\r\n,\n\"multi\nline\",x");
  ASSERT_EQ(rec.size(), 3u);
  EXPECT_EQ(rec[0], (std::vector<std::string>{"a", "b,c", "d\"e"}));
  EXPECT_EQ(rec[1], (std::vector<std::string>{"", ""}));
  EXPECT_EQ(rec[2], (std::vector<std::string>{"multi\nline", "x"}));
  EXPECT_THROW(parse_csv("\"open"), Error);
  EXPECT_THROW(parse_summary_csv("x,y\n"), Error);
}

}  // namespace
}  // namespace maskbench
