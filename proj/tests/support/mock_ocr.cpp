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

// Stand-in OCR engine for tests. Reads a black-on-white block-font word from
// the PNG given as argv[1] and prints it. An optional substitution file
// (argv[2], lines `read<TAB>emit`) rewrites specific readings to simulate
// recognition errors. Exits 3 if any text pixel touches the image border.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "support/test_support.hpp"

int main(int argc, char** argv) {
  using namespace maskbench;
  if (argc < 2) {
    std::cerr << "usage: mock_ocr IMAGE [SUBSTITUTIONS]\n";
    return 2;
  }
  try {
    const WordImage img = load_image(argv[1]);
    BinaryMask dark(img.width(), img.height(), std::uint8_t{0});
    for (std::size_t i = 0; i < dark.size(); ++i) dark[i] = luma(img.pixels[i]) < 128.0 ? 1 : 0;
    for (int x = 0; x < dark.width(); ++x) {
      if (dark(x, 0) || dark(x, dark.height() - 1)) return 3;
    }
    for (int y = 0; y < dark.height(); ++y) {
      if (dark(0, y) || dark(dark.width() - 1, y)) return 3;
    }
    std::string text = testing::read_word(dark);
    if (argc > 2) {
      std::ifstream subs(argv[2]);
      std::string line;
      while (std::getline(subs, line)) {
        const auto tab = line.find('\t');
        if (tab != std::string::npos && line.substr(0, tab) == text) {
          text = line.substr(tab + 1);
          break;
        }
      }
    }
    std::cout << text << "\n";
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
