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

// maskbench: candidate generation, OCR evaluation, padding, report tables and
// the local annotation service.

#include <pthread.h>
#include <signal.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "maskbench/maskbench.hpp"
#include "maskbench/service.hpp"

namespace {

using namespace maskbench;

int run_pad(const fs::path& mask_path, const fs::path& out_path) {
  const BinaryMask mask = load_eval_mask(mask_path);
  const PaddedImage padded = pad(mask);
  render_for_ocr(padded, out_path);
  std::cout << mask.width() << "x" << mask.height() << " -> " << padded.padded.width() << "x"
            << padded.padded.height() << " (" << padded.pad_rows << " rows, " << padded.pad_cols
            << " columns per side)\n";
  return kExitOk;
}

int run_report(const std::vector<fs::path>& inputs, const std::string& format) {
  std::vector<EvalReport> reports;
  for (const fs::path& p : inputs) {
    const Bytes raw = read_file(p);
    for (EvalReport& r : parse_summary_csv(std::string(raw.begin(), raw.end()))) reports.push_back(std::move(r));
  }
  std::cout << render_table(reports, format == "csv" ? TableFormat::kCsv : TableFormat::kText);
  return kExitOk;
}

int run_serve(ServiceConfig config) {
  // Signals are taken by a dedicated thread so shutdown releases the session
  // lock through normal destructors.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  AnnotationService service(std::move(config));
  const int port = service.bind();
  std::jthread waiter([&service, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  std::cout << "serving " << service.store().manifest().name << " (" << service.store().manifest().size()
            << " images) on port " << port << (service.store().read_only() ? " [read-only]" : "") << std::endl;
  service.listen_after_bind();
  // Wake the waiter if the server stopped for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  return kExitOk;
}

OcrAdapterConfig adapter_from(const std::string& command, double timeout, const std::string& tag) {
  return OcrAdapterConfig{command, timeout, tag};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation bank, annotation service and OCR benchmarking for cropped word images"};
  app.require_subcommand(1);

  CandidatesOptions cand;
  std::string cand_polarity = "normal";
  auto* candidates = app.add_subcommand("candidates", "Write the 16 candidate masks for every manifest image");
  candidates->add_option("--manifest", cand.manifest_path, "Dataset manifest (TSV)")->required()->check(CLI::ExistingFile);
  candidates->add_option("--out", cand.out_dir, "Output directory")->required();
  candidates->add_option("--polarity", cand_polarity, "normal | inverted")
      ->check(CLI::IsMember({"normal", "inverted"}));
  candidates->add_option("--seed", cand.seed, "Cluster seed");
  candidates->add_flag("--keep-going", cand.keep_going, "Continue past unreadable images");

  EvaluateOptions eval;
  std::string adapter_cmd;
  double timeout = 30.0;
  std::string engine_tag = "external";
  bool case_insensitive = false;
  auto* evaluate = app.add_subcommand("evaluate", "Pad, render, recognize and score every manifest image");
  evaluate->add_option("--manifest", eval.manifest_path, "Dataset manifest (TSV)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--masks", eval.masks_dir, "Directory of <image_id>.png masks")->required();
  evaluate->add_option("--adapter", adapter_cmd, "OCR command template, e.g. 'tesseract {input} - --psm 8'")
      ->required();
  evaluate->add_option("--timeout", timeout, "Per-image OCR timeout in seconds");
  evaluate->add_option("--engine-tag", engine_tag, "Label for the OCR engine");
  evaluate->add_option("--out", eval.out_path, "Summary CSV path (rows and text table are written beside it)")
      ->required();
  evaluate->add_option("--jobs", eval.jobs, "Parallel OCR processes");
  evaluate->add_flag("--lenient", eval.lenient, "Score images without masks as empty hypotheses");
  evaluate->add_flag("--case-insensitive", case_insensitive, "Case-insensitive word match");

  fs::path pad_in;
  fs::path pad_out;
  auto* pad_cmd = app.add_subcommand("pad", "Pad a mask and render it black-on-white for OCR");
  pad_cmd->add_option("--mask", pad_in, "Mask PNG")->required()->check(CLI::ExistingFile);
  pad_cmd->add_option("--out", pad_out, "Rendered PNG")->required();

  std::vector<fs::path> report_inputs;
  std::string report_format = "text";
  auto* report = app.add_subcommand("report", "Combine summary CSVs into one table");
  report->add_option("csv", report_inputs, "Summary CSV files")->required()->check(CLI::ExistingFile);
  report->add_option("--format", report_format, "text | csv")->check(CLI::IsMember({"text", "csv"}));

  ServiceConfig serve_cfg;
  std::string listen = "127.0.0.1:8080";
  auto* serve = app.add_subcommand("serve", "Run the local annotation service");
  serve->add_option("--root", serve_cfg.dataset_root, "Dataset root containing the manifest")->required();
  serve->add_option("--manifest-name", serve_cfg.manifest_name, "Manifest file name inside the root");
  serve->add_option("--listen", listen, "host:port");
  serve->add_flag("--allow-remote", serve_cfg.allow_remote, "Permit a non-loopback listen address");
  serve->add_flag("--read-only", serve_cfg.read_only, "Serve without taking the session lock");
  serve->add_option("--seed", serve_cfg.seed, "Cluster seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*candidates) {
      cand.polarity = parse_polarity(cand_polarity);
      return cmd_candidates(cand, std::cout, std::cerr);
    }
    if (*evaluate) {
      eval.adapter = adapter_from(adapter_cmd, timeout, engine_tag);
      eval.match.case_insensitive = case_insensitive;
      return cmd_evaluate(eval, std::cout, std::cerr);
    }
    if (*pad_cmd) return run_pad(pad_in, pad_out);
    if (*report) return run_report(report_inputs, report_format);
    if (*serve) {
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "usage error: --listen expects host:port\n";
        return kExitUsage;
      }
      serve_cfg.host = listen.substr(0, colon);
      serve_cfg.port = std::stoi(listen.substr(colon + 1));
      return run_serve(std::move(serve_cfg));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
