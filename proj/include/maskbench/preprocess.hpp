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

// Margin padding before recognition, rendering for the OCR engine, and the
// external-command OCR adapter.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "maskbench/codec.hpp"
#include "maskbench/error.hpp"
#include "maskbench/raster.hpp"

namespace maskbench {

struct PaddedImage {
  BinaryMask base;
  /// Background rows added above and below.
  int pad_rows = 0;
  /// Background columns added left and right.
  int pad_cols = 0;
  BinaryMask padded;
};

/// Surrounds the mask with ceil(H/2) background rows top and bottom and
/// ceil(W/2) background columns left and right.
inline PaddedImage pad(const BinaryMask& mask) {
  PaddedImage out;
  out.base = mask;
  out.pad_rows = (mask.height() + 1) / 2;
  out.pad_cols = (mask.width() + 1) / 2;
  out.padded = BinaryMask(mask.width() + 2 * out.pad_cols, mask.height() + 2 * out.pad_rows, std::uint8_t{0});
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.padded(x + out.pad_cols, y + out.pad_rows) = mask(x, y) ? 1 : 0;
  }
  return out;
}

inline constexpr int kOcrDpi = 300;

/// Black text on white: foreground -> 0, background -> 255, tagged 300 DPI.
/// Polarity is normalized here whatever the annotation polarity was.
inline Bytes encode_for_ocr(const PaddedImage& p) {
  Grid<std::uint8_t> gray(p.padded.width(), p.padded.height(), std::uint8_t{255});
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = p.padded[i] ? 0 : 255;
  return encode_png_gray8(gray, kOcrDpi);
}

inline void render_for_ocr(const PaddedImage& p, const std::filesystem::path& path) {
  write_file_atomic(path, encode_for_ocr(p));
}

enum class OcrStatus { kOk, kEngineError, kTimeout };

inline const char* to_string(OcrStatus s) {
  switch (s) {
    case OcrStatus::kOk: return "ok";
    case OcrStatus::kEngineError: return "engine_error";
    case OcrStatus::kTimeout: return "timeout";
  }
  return "engine_error";
}

struct OcrAdapterConfig {
  /// Shell command; every `{input}` is replaced by the quoted image path.
  std::string command_template;
  double timeout_seconds = 30.0;
  std::string engine_tag = "external";
};

struct OcrResult {
  std::string image_id;
  /// Empty unless exit_status is ok.
  std::string text;
  std::string engine_tag;
  OcrStatus exit_status = OcrStatus::kEngineError;
};

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline std::string expand_command(const std::string& tmpl, const std::filesystem::path& input) {
  constexpr std::string_view kPlaceholder = "{input}";
  const std::string quoted = shell_quote(input.string());
  std::string out;
  std::size_t at = 0;
  for (;;) {
    const std::size_t hit = tmpl.find(kPlaceholder, at);
    if (hit == std::string::npos) break;
    out.append(tmpl, at, hit - at);
    out += quoted;
    at = hit + kPlaceholder.size();
  }
  out.append(tmpl, at);
  return out;
}

struct CommandOutput {
  std::string stdout_text;
  int exit_code = -1;
  bool timed_out = false;
  bool spawn_failed = false;
};

// Runs `sh -c command` in its own process group with stdout captured and
// stderr discarded. On timeout the whole group is killed.
inline CommandOutput run_command(const std::string& command, double timeout_seconds) {
  CommandOutput result;
  int pipe_fds[2];
  if (::pipe2(pipe_fds, O_CLOEXEC) != 0) {
    result.spawn_failed = true;
    return result;
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(pipe_fds[0]);
    ::close(pipe_fds[1]);
    result.spawn_failed = true;
    return result;
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(pipe_fds[1], STDOUT_FILENO);
    const int devnull = ::open("/dev/null", O_RDWR);
    if (devnull >= 0) {
      ::dup2(devnull, STDERR_FILENO);
      ::dup2(devnull, STDIN_FILENO);
    }
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(pipe_fds[1]);

  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(timeout_seconds));
  char buf[4096];
  for (;;) {
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (remaining <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd pfd{pipe_fds[0], POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) continue;
    const ssize_t n = ::read(pipe_fds[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    result.stdout_text.append(buf, static_cast<std::size_t>(n));
  }
  ::close(pipe_fds[0]);
  if (result.timed_out) ::kill(-pid, SIGKILL);

  int status = 0;
  if (!result.timed_out) {
    // stdout closed; give the process until the deadline to exit.
    for (;;) {
      const pid_t done = ::waitpid(pid, &status, WNOHANG);
      if (done == pid) break;
      if (done < 0 && errno != EINTR) break;
      if (Clock::now() >= deadline) {
        result.timed_out = true;
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  } else {
    ::waitpid(pid, &status, 0);
  }
  if (!result.timed_out && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

}  // namespace detail

/// Runs the adapter on one rendered image. Never throws for engine failures;
/// they are reported through exit_status.
inline OcrResult recognize(const std::filesystem::path& input, const OcrAdapterConfig& config,
                           std::string image_id = {}) {
  if (config.command_template.empty()) throw Error(ErrorCode::kInvalidArgument, "empty OCR command template");
  OcrResult result{std::move(image_id), {}, config.engine_tag, OcrStatus::kEngineError};
  const detail::CommandOutput out =
      detail::run_command(detail::expand_command(config.command_template, input), config.timeout_seconds);
  if (out.timed_out) {
    result.exit_status = OcrStatus::kTimeout;
    return result;
  }
  if (out.spawn_failed || out.exit_code != 0) return result;
  result.text = out.stdout_text;
  while (!result.text.empty() && (result.text.back() == '\n' || result.text.back() == '\r')) result.text.pop_back();
  result.exit_status = OcrStatus::kOk;
  return result;
}

struct OcrJob {
  std::string image_id;
  std::filesystem::path input;
};

/// Recognizes every job with up to `max_parallel` engine processes. Results
/// come back in job order, one per job.
inline std::vector<OcrResult> recognize_all(const std::vector<OcrJob>& jobs, const OcrAdapterConfig& config,
                                            unsigned max_parallel = 1) {
  std::vector<OcrResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      results[i] = recognize(jobs[i].input, config, jobs[i].image_id);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(max_parallel, static_cast<unsigned>(jobs.size())));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  return results;
}

}  // namespace maskbench
