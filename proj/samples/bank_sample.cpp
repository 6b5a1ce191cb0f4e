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

// Builds the candidate bank for one image and prints the method descriptors.
//
//   bank_sample word.png [inverted]

#include <iostream>

#include "maskbench/maskbench.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: bank_sample IMAGE [normal|inverted]\n";
    return 2;
  }
  try {
    const maskbench::WordImage img = maskbench::load_image(argv[1]);
    const auto polarity = argc > 2 ? maskbench::parse_polarity(argv[2]) : maskbench::Polarity::kNormal;
    const maskbench::CandidateBank bank = maskbench::build_bank(img, polarity, std::uint64_t{0});
    for (const maskbench::Candidate& c : bank.candidates) {
      std::cout << c.index << "\t" << c.method << "\t" << maskbench::count_foreground(c.mask)
                << (c.degenerate ? "\tdegenerate" : "") << "\n";
    }
  } catch (const maskbench::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
