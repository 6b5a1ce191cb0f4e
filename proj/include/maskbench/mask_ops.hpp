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

// Polygon patch editing, reading-order component labelling, overlay
// rendering, and the persisted mask format (8-bit label PNG plus a
// `.mask.json` sidecar).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskbench/codec.hpp"
#include "maskbench/error.hpp"
#include "maskbench/raster.hpp"
#include "maskbench/segmentation.hpp"

namespace maskbench {

struct Vertex {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

struct Polygon {
  std::vector<Vertex> vertices;

  /// Signed shoelace area.
  double signed_area() const {
    double twice = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vertex& a = vertices[i];
      const Vertex& b = vertices[(i + 1) % n];
      twice += a.x * b.y - b.x * a.y;
    }
    return twice / 2.0;
  }

  void validate() const {
    if (vertices.size() < 3) {
      throw Error(ErrorCode::kDegeneratePolygon,
                  "polygon needs at least 3 vertices, got " + std::to_string(vertices.size()));
    }
    for (const Vertex& v : vertices) {
      if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
        throw Error(ErrorCode::kDegeneratePolygon, "polygon vertex is not finite");
      }
    }
    if (signed_area() == 0.0) throw Error(ErrorCode::kDegeneratePolygon, "polygon has zero area");
  }

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

enum class EditKind { kAdd, kDelete };

inline const char* to_string(EditKind k) { return k == EditKind::kAdd ? "add" : "delete"; }

inline EditKind parse_edit_kind(std::string_view s) {
  if (s == "add") return EditKind::kAdd;
  if (s == "delete") return EditKind::kDelete;
  throw Error(ErrorCode::kInvalidArgument, "edit kind must be add or delete, got '" + std::string(s) + "'");
}

struct EditOp {
  EditKind kind = EditKind::kAdd;
  Polygon polygon;
  /// Strictly increasing within a record, starting at 1.
  int sequence = 1;

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

/// Scanline fill, even-odd rule, sampled at pixel centres (x + 0.5, y + 0.5).
/// Parts of the polygon outside the image are clipped.
inline BinaryMask rasterize(const Polygon& poly, int width, int height) {
  poly.validate();
  BinaryMask mask(width, height, std::uint8_t{0});
  const std::vector<Vertex>& v = poly.vertices;
  const std::size_t n = v.size();
  std::vector<double> crossings;
  for (int y = 0; y < height; ++y) {
    const double py = y + 0.5;
    crossings.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      if ((v[i].y > py) != (v[j].y > py)) {
        crossings.push_back((v[j].x - v[i].x) * (py - v[i].y) / (v[j].y - v[i].y) + v[i].x);
      }
    }
    std::sort(crossings.begin(), crossings.end());
    // A centre is inside when an odd number of crossings lie strictly to its
    // right, i.e. crossings[2k] <= px < crossings[2k+1].
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      const double lo = crossings[k];
      const double hi = crossings[k + 1];
      if (hi <= 0.0 || lo >= width) continue;
      int x = static_cast<int>(std::max(0.0, std::floor(lo - 0.5)));
      while (x < width && x + 0.5 < lo) ++x;
      for (; x < width && x + 0.5 < hi; ++x) mask(x, y) = 1;
    }
  }
  return mask;
}

inline BinaryMask apply_patch(const BinaryMask& mask, const EditOp& op) {
  const BinaryMask patch = rasterize(op.polygon, mask.width(), mask.height());
  BinaryMask out = mask;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!patch[i]) continue;
    out[i] = op.kind == EditKind::kAdd ? 1 : 0;
  }
  return out;
}

/// Labelled foreground: 0 is background, 1..component_count are 8-connected
/// components in reading order.
struct SegMask {
  Grid<std::uint32_t> labels;
  int component_count = 0;

  int width() const noexcept { return labels.width(); }
  int height() const noexcept { return labels.height(); }

  friend bool operator==(const SegMask&, const SegMask&) = default;
};

inline BinaryMask to_binary(const SegMask& mask) {
  BinaryMask out(mask.width(), mask.height(), std::uint8_t{0});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.labels[i] != 0 ? 1 : 0;
  return out;
}

/// 8-connected components ordered by minimum column, then minimum row, then
/// the topmost row within the minimum column (which no two components share).
inline SegMask label_components(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  SegMask out{Grid<std::uint32_t>(w, h, 0u), 0};

  struct Extent {
    int min_col;
    int min_row;
    int top_at_min_col;
  };
  std::vector<Extent> extents;
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!mask(x0, y0) || out.labels(x0, y0) != 0) continue;
      const auto provisional = static_cast<std::uint32_t>(extents.size() + 1);
      Extent e{x0, y0, y0};
      out.labels(x0, y0) = provisional;
      stack.assign(1, {x0, y0});
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        if (x < e.min_col) {
          e.min_col = x;
          e.top_at_min_col = y;
        } else if (x == e.min_col) {
          e.top_at_min_col = std::min(e.top_at_min_col, y);
        }
        e.min_row = std::min(e.min_row, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!mask(nx, ny) || out.labels(nx, ny) != 0) continue;
            out.labels(nx, ny) = provisional;
            stack.emplace_back(nx, ny);
          }
        }
      }
      extents.push_back(e);
    }
  }

  std::vector<std::uint32_t> order(extents.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const Extent& ea = extents[a];
    const Extent& eb = extents[b];
    return std::tie(ea.min_col, ea.min_row, ea.top_at_min_col) <
           std::tie(eb.min_col, eb.min_row, eb.top_at_min_col);
  });
  std::vector<std::uint32_t> remap(extents.size() + 1, 0u);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    remap[order[rank] + 1] = static_cast<std::uint32_t>(rank + 1);
  }
  for (auto& l : out.labels) l = remap[l];
  out.component_count = static_cast<int>(extents.size());
  return out;
}

/// Per-component tint colours, cycled by label. No channel is 127 or 128, so
/// the complementary-tint fallback in overlay() always changes the pixel.
inline constexpr std::array<Rgb, 10> kComponentPalette{{
    {230, 25, 75},
    {60, 180, 75},
    {0, 130, 200},
    {245, 130, 48},
    {145, 30, 180},
    {70, 240, 240},
    {240, 50, 230},
    {210, 245, 60},
    {0, 0, 0},
    {255, 225, 25},
}};

inline Rgb component_color(std::uint32_t label) {
  return kComponentPalette[(label - 1) % kComponentPalette.size()];
}

namespace detail {

inline Rgb blend_half(Rgb p, Rgb c) {
  return Rgb{static_cast<std::uint8_t>((p.r + c.r) / 2), static_cast<std::uint8_t>((p.g + c.g) / 2),
             static_cast<std::uint8_t>((p.b + c.b) / 2)};
}

}  // namespace detail

/// VIEW MASK: 50% blend of each labelled pixel with its component colour.
/// A pixel the blend would leave unchanged gets the complementary colour.
inline WordImage overlay(const WordImage& img, const SegMask& mask) {
  if (!img.pixels.same_shape(mask.labels)) {
    throw Error(ErrorCode::kDimensionMismatch, "overlay: image and mask dimensions differ");
  }
  WordImage out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const std::uint32_t label = mask.labels[i];
    if (label == 0) continue;
    const Rgb p = img.pixels[i];
    const Rgb c = component_color(label);
    Rgb blended = detail::blend_half(p, c);
    if (blended == p) {
      blended = detail::blend_half(p, Rgb{static_cast<std::uint8_t>(255 - c.r), static_cast<std::uint8_t>(255 - c.g),
                                          static_cast<std::uint8_t>(255 - c.b)});
    }
    out.pixels[i] = blended;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr int kMaskFormatVersion = 1;
inline constexpr int kMaxPersistedComponents = 255;

struct MaskMetadata {
  Polarity polarity = Polarity::kNormal;
  /// Method descriptor of the selected candidate; empty when none.
  std::string method;
  std::vector<EditOp> edits;

  friend bool operator==(const MaskMetadata&, const MaskMetadata&) = default;
};

inline nlohmann::json to_json(const EditOp& op) {
  nlohmann::json vertices = nlohmann::json::array();
  for (const Vertex& v : op.polygon.vertices) vertices.push_back({v.x, v.y});
  return {{"kind", to_string(op.kind)}, {"sequence", op.sequence}, {"vertices", std::move(vertices)}};
}

inline EditOp edit_from_json(const nlohmann::json& j) {
  EditOp op;
  op.kind = parse_edit_kind(j.at("kind").get<std::string>());
  op.sequence = j.at("sequence").get<int>();
  for (const auto& v : j.at("vertices")) {
    if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::kInvalidArgument, "vertex must be [x, y]");
    op.polygon.vertices.push_back(Vertex{v[0].get<double>(), v[1].get<double>()});
  }
  return op;
}

/// `word.png` -> `word.mask.json`.
inline std::filesystem::path mask_sidecar_path(const std::filesystem::path& png_path) {
  std::filesystem::path p = png_path;
  p.replace_extension(".mask.json");
  return p;
}

inline void save_mask(const SegMask& mask, const std::filesystem::path& path, const MaskMetadata& meta = {}) {
  if (mask.component_count > kMaxPersistedComponents) {
    throw Error(ErrorCode::kInvalidArgument,
                "mask has " + std::to_string(mask.component_count) + " components; at most 255 can be stored");
  }
  Grid<std::uint8_t> pixels(mask.width(), mask.height(), std::uint8_t{0});
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(mask.labels[i]);

  nlohmann::json edits = nlohmann::json::array();
  for (const EditOp& op : meta.edits) edits.push_back(to_json(op));
  const nlohmann::json sidecar{
      {"version", kMaskFormatVersion},
      {"width", mask.width()},
      {"height", mask.height()},
      {"component_count", mask.component_count},
      {"polarity", to_string(meta.polarity)},
      {"method", meta.method.empty() ? nlohmann::json(nullptr) : nlohmann::json(meta.method)},
      {"edits", std::move(edits)},
  };
  write_file_atomic(path, encode_png_gray8(pixels));
  write_file_atomic(mask_sidecar_path(path), sidecar.dump(2) + "\n");
}

struct LoadedMask {
  SegMask mask;
  MaskMetadata metadata;
};

inline LoadedMask load_mask_with_metadata(const std::filesystem::path& path) {
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorCode::kCorruptMaskFile, path.string() + ": " + why);
  };
  nlohmann::json sidecar;
  try {
    const Bytes raw = read_file(mask_sidecar_path(path));
    sidecar = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("sidecar: ") + e.what());
  } catch (const Error& e) {
    throw corrupt(std::string("sidecar: ") + e.what());
  }

  Grid<std::uint8_t> pixels;
  try {
    pixels = decode_png_gray8(read_file(path));
  } catch (const Error& e) {
    throw corrupt(e.what());
  }

  LoadedMask out;
  try {
    if (sidecar.at("version").get<int>() != kMaskFormatVersion) throw corrupt("unsupported version");
    if (sidecar.at("width").get<int>() != pixels.width() || sidecar.at("height").get<int>() != pixels.height()) {
      throw corrupt("sidecar dimensions do not match the label image");
    }
    out.mask.component_count = sidecar.at("component_count").get<int>();
    out.metadata.polarity = parse_polarity(sidecar.at("polarity").get<std::string>());
    if (!sidecar.at("method").is_null()) out.metadata.method = sidecar.at("method").get<std::string>();
    for (const auto& e : sidecar.at("edits")) out.metadata.edits.push_back(edit_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("sidecar: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptMaskFile) throw;
    throw corrupt(e.what());
  }

  const int count = out.mask.component_count;
  if (count < 0 || count > kMaxPersistedComponents) throw corrupt("component_count out of range");
  std::vector<bool> seen(static_cast<std::size_t>(count) + 1, false);
  out.mask.labels = Grid<std::uint32_t>(pixels.width(), pixels.height(), 0u);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const std::uint8_t l = pixels[i];
    if (l > count) throw corrupt("label " + std::to_string(l) + " exceeds component_count");
    seen[l] = true;
    out.mask.labels[i] = l;
  }
  for (int l = 1; l <= count; ++l) {
    if (!seen[static_cast<std::size_t>(l)]) throw corrupt("label set has a gap at " + std::to_string(l));
  }
  return out;
}

inline SegMask load_mask(const std::filesystem::path& path) { return load_mask_with_metadata(path).mask; }

}  // namespace maskbench
