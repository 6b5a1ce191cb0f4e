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

// Batch drivers behind `maskbench candidates` and `maskbench evaluate`.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskbench/annotation_store.hpp"
#include "maskbench/codec.hpp"
#include "maskbench/evaluation.hpp"
#include "maskbench/mask_ops.hpp"
#include "maskbench/preprocess.hpp"
#include "maskbench/segmentation.hpp"

namespace maskbench {

/// Exit codes shared by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Binary mask as a viewable PNG (foreground 255).
inline Bytes encode_mask_png(const BinaryMask& mask) {
  Grid<std::uint8_t> gray(mask.width(), mask.height(), std::uint8_t{0});
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask[i] ? 255 : 0;
  return encode_png_gray8(gray);
}

inline nlohmann::json bank_descriptor(const CandidateBank& bank, std::uint64_t seed) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const Candidate& c : bank.candidates) {
    std::ostringstream file;
    file << "cand_" << std::setw(2) << std::setfill('0') << c.index << ".png";
    candidates.push_back({{"index", c.index},
                          {"method", c.method},
                          {"degenerate", c.degenerate},
                          {"foreground", count_foreground(c.mask)},
                          {"file", file.str()}});
  }
  const BinaryMask& first = bank.candidates.front().mask;
  return {{"version", 1},
          {"image_id", bank.image_id},
          {"polarity", to_string(bank.polarity)},
          {"seed", seed},
          {"width", first.width()},
          {"height", first.height()},
          {"candidates", std::move(candidates)}};
}

/// Writes `<dir>/cand_01.png` .. `cand_16.png` and `<dir>/bank.json`.
inline void write_bank(const CandidateBank& bank, std::uint64_t seed, const fs::path& dir) {
  const nlohmann::json descriptor = bank_descriptor(bank, seed);
  for (std::size_t i = 0; i < bank.candidates.size(); ++i) {
    write_file_atomic(dir / descriptor["candidates"][i]["file"].get<std::string>(),
                      encode_mask_png(bank.candidates[i].mask));
  }
  write_file_atomic(dir / "bank.json", descriptor.dump(2) + "\n");
}

struct CandidatesOptions {
  fs::path manifest_path;
  fs::path out_dir;
  Polarity polarity = Polarity::kNormal;
  std::uint64_t seed = 0;
  bool keep_going = false;
};

inline int cmd_candidates(const CandidatesOptions& opts, std::ostream& out, std::ostream& err) {
  DatasetManifest manifest;
  try {
    manifest = load_manifest(opts.manifest_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  std::size_t failed = 0;
  for (const ManifestEntry& e : manifest.entries) {
    try {
      const WordImage img = load_image(e.image_path, e.image_id);
      const CandidateBank bank = build_bank(img, opts.polarity, opts.seed);
      write_bank(bank, opts.seed, opts.out_dir / e.image_id);
      const auto degenerate = std::count_if(bank.candidates.begin(), bank.candidates.end(),
                                            [](const Candidate& c) { return c.degenerate; });
      out << e.image_id << ": " << img.width() << "x" << img.height() << ", " << bank.candidates.size()
          << " candidates, " << degenerate << " degenerate\n";
    } catch (const Error& ex) {
      err << "error: image '" << e.image_id << "': " << ex.what() << "\n";
      ++failed;
      if (!opts.keep_going) return kExitFailure;
    }
  }
  out << manifest.size() - failed << " of " << manifest.size() << " images processed\n";
  return kExitOk;
}

/// Mask for evaluation: a labelled mask with sidecar, or any 8-bit grey PNG
/// where non-zero is foreground.
inline BinaryMask load_eval_mask(const fs::path& png) {
  if (fs::exists(mask_sidecar_path(png))) return to_binary(load_mask(png));
  const Grid<std::uint8_t> gray = decode_png_gray8(read_file(png));
  BinaryMask mask(gray.width(), gray.height(), std::uint8_t{0});
  for (std::size_t i = 0; i < gray.size(); ++i) mask[i] = gray[i] ? 1 : 0;
  return mask;
}

struct EvaluateOptions {
  fs::path manifest_path;
  fs::path masks_dir;
  OcrAdapterConfig adapter;
  /// Summary CSV; `<stem>.rows.csv` and `<stem>.txt` are written beside it.
  fs::path out_path;
  bool lenient = false;
  MatchOptions match;
  unsigned jobs = 1;
};

struct EvaluateArtifacts {
  fs::path summary_csv;
  fs::path rows_csv;
  fs::path table_txt;
};

inline EvaluateArtifacts evaluate_artifacts(const fs::path& out_path) {
  const fs::path dir = out_path.parent_path();
  const std::string stem = out_path.stem().string();
  return {out_path, dir / (stem + ".rows.csv"), dir / (stem + ".txt")};
}

/// pad -> render -> recognize -> score, then writes the report files.
inline int cmd_evaluate(const EvaluateOptions& opts, std::ostream& out, std::ostream& err) {
  DatasetManifest manifest;
  try {
    manifest = load_manifest(opts.manifest_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  if (manifest.entries.empty()) {
    err << "usage error: manifest " << opts.manifest_path << " has no entries\n";
    return kExitUsage;
  }

  std::vector<std::string> missing;
  for (const ManifestEntry& e : manifest.entries) {
    if (!fs::exists(opts.masks_dir / (e.image_id + ".png"))) missing.push_back(e.image_id);
  }
  if (!missing.empty()) {
    err << (opts.lenient ? "warning" : "error") << ": " << missing.size() << " image(s) have no mask:";
    for (const std::string& id : missing) err << " " << id;
    err << "\n";
    if (!opts.lenient) return kExitFailure;
  }

  char work_template[] = "/tmp/maskbench-ocr-XXXXXX";
  if (::mkdtemp(work_template) == nullptr) {
    err << "error: cannot create a work directory\n";
    return kExitFailure;
  }
  const fs::path work_dir = work_template;

  int status = kExitOk;
  try {
    std::vector<OcrJob> jobs;
    for (const ManifestEntry& e : manifest.entries) {
      if (std::find(missing.begin(), missing.end(), e.image_id) != missing.end()) continue;
      const PaddedImage padded = pad(load_eval_mask(opts.masks_dir / (e.image_id + ".png")));
      const fs::path rendered = work_dir / (e.image_id + ".png");
      render_for_ocr(padded, rendered);
      jobs.push_back({e.image_id, rendered});
    }
    const std::vector<OcrResult> results = recognize_all(jobs, opts.adapter, opts.jobs);
    for (const OcrResult& r : results) {
      if (r.exit_status != OcrStatus::kOk) {
        err << "warning: " << r.image_id << ": OCR " << to_string(r.exit_status) << "\n";
      }
    }
    const EvalReport report = score_dataset(manifest, results, opts.match);
    const EvaluateArtifacts files = evaluate_artifacts(opts.out_path);
    const std::string table = render_table({report}, TableFormat::kText);
    write_file_atomic(files.summary_csv, render_table({report}, TableFormat::kCsv));
    write_file_atomic(files.rows_csv, render_rows_csv(report));
    write_file_atomic(files.table_txt, table);
    out << table;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    status = kExitFailure;
  }
  std::error_code ec;
  fs::remove_all(work_dir, ec);
  return status;
}

}  // namespace maskbench
