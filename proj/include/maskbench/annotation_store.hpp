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

// Dataset manifests and per-image annotation state. Records live as one
// `<image_id>.ann.json` document beside the image's mask; the in-memory index
// is rebuilt from those files whenever a store is opened.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskbench/codec.hpp"
#include "maskbench/error.hpp"
#include "maskbench/mask_ops.hpp"
#include "maskbench/segmentation.hpp"

namespace maskbench {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string image_id;
  /// As written in the manifest, relative to the manifest's directory.
  std::string relative_path;
  fs::path image_path;
  std::string ground_truth;
};

struct DatasetManifest {
  std::string name;
  fs::path root;
  std::vector<ManifestEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }

  std::optional<std::size_t> index_of(std::string_view image_id) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].image_id == image_id) return i;
    }
    return std::nullopt;
  }

  const ManifestEntry& entry(std::string_view image_id) const {
    const auto idx = index_of(image_id);
    if (!idx) throw Error(ErrorCode::kUnknownImage, "image '" + std::string(image_id) + "' is not in the manifest");
    return entries[*idx];
  }
};

/// Image ids double as file names, so they are restricted to a portable set.
inline bool is_valid_image_id(std::string_view id) {
  if (id.empty() || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
           c == '.';
  });
}

/// Parses `image_id <TAB> relative/path <TAB> ground truth` lines. Blank
/// lines and `#` comments are skipped; `# dataset: NAME` names the dataset
/// (default: the manifest file's stem).
inline DatasetManifest parse_manifest(std::istream& in, const fs::path& root, std::string default_name) {
  DatasetManifest manifest{std::move(default_name), root, {}};
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    return Error(ErrorCode::kManifestParseError, "line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view kDirective = "# dataset:";
      if (line.starts_with(kDirective)) {
        std::string name = line.substr(kDirective.size());
        const auto first = name.find_first_not_of(" \t");
        manifest.name = first == std::string::npos ? "" : name.substr(first);
      }
      continue;
    }
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw fail("expected 3 tab-separated fields");
    if (line.find('\t', tab2 + 1) != std::string::npos) throw fail("too many tab-separated fields");
    ManifestEntry e;
    e.image_id = line.substr(0, tab1);
    e.relative_path = line.substr(tab1 + 1, tab2 - tab1 - 1);
    e.ground_truth = line.substr(tab2 + 1);
    if (!is_valid_image_id(e.image_id)) throw fail("invalid image_id '" + e.image_id + "'");
    if (e.relative_path.empty()) throw fail("empty image path");
    if (!seen.insert(e.image_id).second) throw fail("duplicate image_id '" + e.image_id + "'");
    e.image_path = root / e.relative_path;
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kManifestParseError, "cannot open manifest " + path.string());
  DatasetManifest manifest = parse_manifest(in, path.parent_path(), path.stem().string());
  for (const ManifestEntry& e : manifest.entries) {
    std::error_code ec;
    if (!fs::is_regular_file(e.image_path, ec)) {
      throw Error(ErrorCode::kMissingImage, "entry '" + e.image_id + "': " + e.image_path.string() + " not found");
    }
  }
  return manifest;
}

enum class Direction { kNext, kPrev };

struct SessionCursor {
  const DatasetManifest* manifest = nullptr;
  std::size_t position = 0;

  const ManifestEntry& current() const { return manifest->entries[position]; }
};

inline SessionCursor make_cursor(const DatasetManifest& manifest, std::size_t position = 0) {
  if (manifest.entries.empty()) throw Error(ErrorCode::kInvalidArgument, "manifest has no entries");
  if (position >= manifest.size()) throw Error(ErrorCode::kInvalidArgument, "cursor position out of range");
  return SessionCursor{&manifest, position};
}

/// NEXT/PREV, clamped at both ends. Navigation never changes record status.
inline SessionCursor advance(SessionCursor cursor, Direction direction) {
  if (direction == Direction::kNext) {
    if (cursor.position + 1 < cursor.manifest->size()) ++cursor.position;
  } else if (cursor.position > 0) {
    --cursor.position;
  }
  return cursor;
}

enum class Status { kUntagged, kSkipped, kTagged };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::kUntagged: return "untagged";
    case Status::kSkipped: return "skipped";
    case Status::kTagged: return "tagged";
  }
  return "untagged";
}

inline Status parse_status(std::string_view s) {
  if (s == "untagged") return Status::kUntagged;
  if (s == "skipped") return Status::kSkipped;
  if (s == "tagged") return Status::kTagged;
  throw Error(ErrorCode::kInvalidArgument, "unknown status '" + std::string(s) + "'");
}

struct AnnotationRecord {
  std::string image_id;
  Status status = Status::kUntagged;
  Polarity polarity = Polarity::kNormal;
  /// 0 = none of the candidates was acceptable.
  int selected_candidate = 0;
  /// Method descriptor of the selected candidate, empty for 0.
  std::string selected_method;
  std::vector<EditOp> edits;
  /// Relative to the dataset root.
  std::optional<std::string> mask_path;
  std::string updated_at;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

inline constexpr int kRecordFormatVersion = 1;

inline nlohmann::json to_json(const AnnotationRecord& r) {
  nlohmann::json edits = nlohmann::json::array();
  for (const EditOp& op : r.edits) edits.push_back(to_json(op));
  return {
      {"version", kRecordFormatVersion},
      {"image_id", r.image_id},
      {"status", to_string(r.status)},
      {"polarity", to_string(r.polarity)},
      {"selected_candidate", r.selected_candidate},
      {"selected_method", r.selected_method},
      {"edits", std::move(edits)},
      {"mask_path", r.mask_path ? nlohmann::json(*r.mask_path) : nlohmann::json(nullptr)},
      {"updated_at", r.updated_at},
  };
}

inline AnnotationRecord record_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != kRecordFormatVersion) {
    throw Error(ErrorCode::kStorageError, "unsupported annotation record version");
  }
  AnnotationRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.status = parse_status(j.at("status").get<std::string>());
  r.polarity = parse_polarity(j.at("polarity").get<std::string>());
  r.selected_candidate = j.at("selected_candidate").get<int>();
  r.selected_method = j.value("selected_method", "");
  for (const auto& e : j.at("edits")) r.edits.push_back(edit_from_json(e));
  if (!j.at("mask_path").is_null()) r.mask_path = j.at("mask_path").get<std::string>();
  r.updated_at = j.at("updated_at").get<std::string>();
  return r;
}

/// Invariants every persisted record satisfies.
inline void check_record(const AnnotationRecord& r) {
  auto violation = [&](const std::string& why) {
    return Error(ErrorCode::kInvariantViolation, "record '" + r.image_id + "': " + why);
  };
  if (r.selected_candidate < 0 || r.selected_candidate > kBankSize) {
    throw violation("selected_candidate must be in 0..16");
  }
  int last = 0;
  for (const EditOp& op : r.edits) {
    if (op.sequence <= last) throw violation("edit sequence numbers must strictly increase from 1");
    last = op.sequence;
  }
  if (r.status == Status::kTagged) {
    if (!r.mask_path) throw violation("tagged record has no mask");
    if (r.selected_candidate == 0 && r.edits.empty()) {
      throw violation("candidate 0 with no edits produces no mask");
    }
  }
}

inline std::string utc_timestamp() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const std::time_t secs = system_clock::to_time_t(now);
  const auto millis = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(millis));
  return buf;
}

/// Advisory single-writer lock: an exclusively created file removed on
/// release. A stale lock from a crashed session must be deleted by hand.
class SessionLock {
 public:
  SessionLock() = default;
  explicit SessionLock(fs::path path) : path_(std::move(path)) {
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd < 0) {
      throw Error(ErrorCode::kLockHeld, "another writing session holds " + path_.string());
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
    held_ = true;
  }
  ~SessionLock() { release(); }
  SessionLock(SessionLock&& other) noexcept
      : path_(std::move(other.path_)), held_(std::exchange(other.held_, false)) {}
  SessionLock& operator=(SessionLock&& other) noexcept {
    if (this != &other) {
      release();
      path_ = std::move(other.path_);
      held_ = std::exchange(other.held_, false);
    }
    return *this;
  }
  SessionLock(const SessionLock&) = delete;
  SessionLock& operator=(const SessionLock&) = delete;

  bool held() const noexcept { return held_; }

 private:
  void release() noexcept {
    if (!held_) return;
    std::error_code ec;
    fs::remove(path_, ec);
    held_ = false;
  }

  fs::path path_;
  bool held_ = false;
};

/// Uncommitted working state for one image (selection plus patches).
struct Draft {
  Polarity polarity = Polarity::kNormal;
  int selected_candidate = 0;
  std::string selected_method;
  std::vector<EditOp> edits;
  BinaryMask working;
};

struct StatusCounts {
  std::size_t untagged = 0;
  std::size_t skipped = 0;
  std::size_t tagged = 0;
};

struct StoreOptions {
  bool read_only = false;
  /// Where records and masks live; defaults to `<manifest dir>/annotations`.
  std::optional<fs::path> annotations_dir;
};

class AnnotationStore {
 public:
  static constexpr const char* kLockName = ".maskbench.lock";

  explicit AnnotationStore(const fs::path& manifest_path, StoreOptions options = {})
      : manifest_(load_manifest(manifest_path)), read_only_(options.read_only) {
    dir_ = options.annotations_dir.value_or(manifest_.root / "annotations");
    if (!read_only_) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) throw Error(ErrorCode::kStorageError, "cannot create " + dir_.string() + ": " + ec.message());
      lock_ = SessionLock(dir_ / kLockName);
    }
    rebuild_index();
  }

  const DatasetManifest& manifest() const noexcept { return manifest_; }
  bool read_only() const noexcept { return read_only_; }
  const fs::path& annotations_dir() const noexcept { return dir_; }

  fs::path record_path(std::string_view image_id) const { return dir_ / (std::string(image_id) + ".ann.json"); }
  fs::path mask_file(std::string_view image_id) const { return dir_ / (std::string(image_id) + ".png"); }

  /// Latest committed record; untagged default when none exists.
  AnnotationRecord record(std::string_view image_id) const {
    const ManifestEntry& e = manifest_.entry(image_id);
    std::lock_guard lock(mutex_);
    const auto it = records_.find(e.image_id);
    if (it != records_.end()) return it->second;
    AnnotationRecord fresh;
    fresh.image_id = e.image_id;
    return fresh;
  }

  /// SAVE: persists `mask` and marks the record tagged.
  AnnotationRecord commit_annotation(AnnotationRecord record, const SegMask& mask) {
    require_writable();
    std::lock_guard writer(write_mutex_);
    manifest_.entry(record.image_id);
    const fs::path png = mask_file(record.image_id);
    record.status = Status::kTagged;
    record.mask_path = fs::relative(png, manifest_.root).generic_string();
    record.updated_at = utc_timestamp();
    check_record(record);

    std::lock_guard lock(mutex_);
    save_mask(mask, png, MaskMetadata{record.polarity, record.selected_method, record.edits});
    persist(record);
    records_[record.image_id] = record;
    drafts_.erase(record.image_id);
    return record;
  }

  /// RELOAD: the stored record and, when tagged, its mask.
  std::pair<AnnotationRecord, std::optional<SegMask>> reload_annotation(std::string_view image_id) const {
    AnnotationRecord r = record(image_id);
    if (r.status != Status::kTagged) return {std::move(r), std::nullopt};
    SegMask mask = load_mask(manifest_.root / *r.mask_path);
    return {std::move(r), std::move(mask)};
  }

  /// Explicit skip. Only untagged images change status.
  AnnotationRecord skip(std::string_view image_id) {
    require_writable();
    std::lock_guard writer(write_mutex_);
    AnnotationRecord r = record(image_id);
    if (r.status != Status::kUntagged) return r;
    r.status = Status::kSkipped;
    r.updated_at = utc_timestamp();
    std::lock_guard lock(mutex_);
    persist(r);
    records_[r.image_id] = r;
    return r;
  }

  StatusCounts counts() const {
    StatusCounts c;
    std::lock_guard lock(mutex_);
    for (const ManifestEntry& e : manifest_.entries) {
      const auto it = records_.find(e.image_id);
      const Status s = it == records_.end() ? Status::kUntagged : it->second.status;
      if (s == Status::kTagged) ++c.tagged;
      else if (s == Status::kSkipped) ++c.skipped;
      else ++c.untagged;
    }
    return c;
  }

  // Drafts back the interactive select/patch loop; nothing is written until
  // commit_draft().

  /// Starts a draft from candidate `candidate` of `bank` (0 = empty mask).
  Draft select(std::string_view image_id, int candidate, const CandidateBank& bank) {
    require_writable();
    std::lock_guard writer(write_mutex_);
    manifest_.entry(image_id);
    if (candidate < 0 || candidate > kBankSize) {
      throw Error(ErrorCode::kInvalidArgument, "selection must be in 0..16, got " + std::to_string(candidate));
    }
    if (bank.candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "empty candidate bank");
    Draft d;
    d.polarity = bank.polarity;
    d.selected_candidate = candidate;
    if (candidate == 0) {
      const BinaryMask& any = bank.candidates.front().mask;
      d.working = BinaryMask(any.width(), any.height(), std::uint8_t{0});
    } else {
      d.selected_method = bank.at(candidate).method;
      d.working = bank.at(candidate).mask;
    }
    std::lock_guard lock(mutex_);
    drafts_[std::string(image_id)] = d;
    return d;
  }

  /// ADD PATCH / DELETE PATCH on the current draft.
  Draft patch(std::string_view image_id, EditKind kind, Polygon polygon) {
    require_writable();
    std::lock_guard writer(write_mutex_);
    std::lock_guard lock(mutex_);
    const auto it = drafts_.find(std::string(image_id));
    if (it == drafts_.end()) {
      throw Error(ErrorCode::kInvariantViolation, "no working mask for '" + std::string(image_id) + "'; select first");
    }
    Draft& d = it->second;
    const int sequence = d.edits.empty() ? 1 : d.edits.back().sequence + 1;
    EditOp op{kind, std::move(polygon), sequence};
    d.working = apply_patch(d.working, op);
    d.edits.push_back(std::move(op));
    return d;
  }

  std::optional<Draft> draft(std::string_view image_id) const {
    std::lock_guard lock(mutex_);
    const auto it = drafts_.find(std::string(image_id));
    if (it == drafts_.end()) return std::nullopt;
    return it->second;
  }

  /// Labels the draft's working mask and commits it.
  AnnotationRecord commit_draft(std::string_view image_id) {
    require_writable();
    std::lock_guard writer(write_mutex_);
    const std::optional<Draft> d = draft(image_id);
    if (!d) throw Error(ErrorCode::kInvariantViolation, "nothing to commit for '" + std::string(image_id) + "'");
    AnnotationRecord r = record(image_id);
    r.polarity = d->polarity;
    r.selected_candidate = d->selected_candidate;
    r.selected_method = d->selected_method;
    r.edits = d->edits;
    return commit_annotation(std::move(r), label_components(d->working));
  }

 private:
  void require_writable() const {
    if (read_only_) throw Error(ErrorCode::kStorageError, "store is open read-only");
  }

  void persist(const AnnotationRecord& r) const { write_file_atomic(record_path(r.image_id), to_json(r).dump(2) + "\n"); }

  void rebuild_index() {
    records_.clear();
    for (const ManifestEntry& e : manifest_.entries) {
      const fs::path p = record_path(e.image_id);
      std::error_code ec;
      if (!fs::exists(p, ec)) continue;
      try {
        const Bytes raw = read_file(p);
        AnnotationRecord r = record_from_json(nlohmann::json::parse(raw.begin(), raw.end()));
        if (r.image_id != e.image_id) throw Error(ErrorCode::kStorageError, "image_id mismatch");
        records_.emplace(e.image_id, std::move(r));
      } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::kStorageError, p.string() + ": " + ex.what());
      }
    }
  }

  DatasetManifest manifest_;
  bool read_only_ = false;
  fs::path dir_;
  SessionLock lock_;
  mutable std::mutex mutex_;
  // Serializes mutations; recursive because commit_draft commits.
  std::recursive_mutex write_mutex_;
  std::map<std::string, AnnotationRecord, std::less<>> records_;
  std::map<std::string, Draft, std::less<>> drafts_;
};

}  // namespace maskbench
