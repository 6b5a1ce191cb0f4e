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

// Image representation and colour-space conversions shared by every other
// module. Planes hold real-valued samples; quantization happens only where a
// histogram is needed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "maskbench/error.hpp"

namespace maskbench {

/// Row-major 2-D grid with value semantics.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(ErrorCode::kInvalidArgument, "grid dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1 ||
        data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorCode::kInvalidArgument, "grid data does not match dimensions");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(int width, int height) const noexcept {
    return width_ == width && height_ == height;
  }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return same_shape(other.width(), other.height());
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

/// A cropped word: the unit of annotation and recognition.
struct WordImage {
  std::string id;
  Grid<Rgb> pixels;

  int width() const noexcept { return pixels.width(); }
  int height() const noexcept { return pixels.height(); }

  friend bool operator==(const WordImage&, const WordImage&) = default;
};

enum class PlaneTag { R, G, B, H, S, V, L, a, b, Intensity };

inline const char* to_string(PlaneTag tag) {
  switch (tag) {
    case PlaneTag::R: return "R";
    case PlaneTag::G: return "G";
    case PlaneTag::B: return "B";
    case PlaneTag::H: return "H";
    case PlaneTag::S: return "S";
    case PlaneTag::V: return "V";
    case PlaneTag::L: return "L";
    case PlaneTag::a: return "a";
    case PlaneTag::b: return "b";
    case PlaneTag::Intensity: return "I";
  }
  return "?";
}

struct GrayPlane {
  Grid<double> values;
  PlaneTag tag = PlaneTag::Intensity;

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
};

/// 0 = background, 1 = foreground.
using BinaryMask = Grid<std::uint8_t>;

using PlaneTriple = std::array<GrayPlane, 3>;

inline std::size_t count_foreground(const BinaryMask& mask) {
  return static_cast<std::size_t>(
      std::count_if(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; }));
}

namespace detail {

template <typename Fn>
GrayPlane map_plane(const WordImage& img, PlaneTag tag, Fn&& fn) {
  GrayPlane plane{Grid<double>(img.width(), img.height()), tag};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) plane.values[i] = fn(img.pixels[i]);
  return plane;
}

template <typename Fn>
PlaneTriple map_planes(const WordImage& img, std::array<PlaneTag, 3> tags, Fn&& fn) {
  PlaneTriple out{GrayPlane{Grid<double>(img.width(), img.height()), tags[0]},
                  GrayPlane{Grid<double>(img.width(), img.height()), tags[1]},
                  GrayPlane{Grid<double>(img.width(), img.height()), tags[2]}};
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::array<double, 3> v = fn(img.pixels[i]);
    for (int c = 0; c < 3; ++c) out[c].values[i] = v[c];
  }
  return out;
}

inline double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
  constexpr double kDelta = 6.0 / 29.0;
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

// sRGB primaries, D65. The reference white is the matrix image of (1,1,1) so
// neutral greys land on a = b = 0.
inline constexpr std::array<std::array<double, 3>, 3> kSrgbToXyz{{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

}  // namespace detail

inline PlaneTriple split_rgb(const WordImage& img) {
  return detail::map_planes(img, {PlaneTag::R, PlaneTag::G, PlaneTag::B}, [](Rgb p) {
    return std::array<double, 3>{double(p.r), double(p.g), double(p.b)};
  });
}

/// Hexcone HSV: H in [0,360), S and V in [0,1]. Achromatic pixels get H = S = 0.
inline std::array<double, 3> rgb_to_hsv(Rgb p) {
  const int mx = std::max({p.r, p.g, p.b});
  const int mn = std::min({p.r, p.g, p.b});
  const double v = mx / 255.0;
  if (mx == mn) return {0.0, 0.0, v};
  const double delta = mx - mn;
  const double s = delta / mx;
  double h;
  if (mx == p.r) {
    h = 60.0 * ((p.g - p.b) / delta);
  } else if (mx == p.g) {
    h = 60.0 * ((p.b - p.r) / delta + 2.0);
  } else {
    h = 60.0 * ((p.r - p.g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return {h, s, v};
}

inline PlaneTriple to_hsv(const WordImage& img) {
  return detail::map_planes(img, {PlaneTag::H, PlaneTag::S, PlaneTag::V}, rgb_to_hsv);
}

/// CIE L*a*b* for sRGB input under D65.
inline std::array<double, 3> rgb_to_lab(Rgb p) {
  using detail::kSrgbToXyz;
  const std::array<double, 3> lin{detail::srgb_to_linear(p.r / 255.0),
                                  detail::srgb_to_linear(p.g / 255.0),
                                  detail::srgb_to_linear(p.b / 255.0)};
  std::array<double, 3> xyz{};
  std::array<double, 3> white{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      xyz[r] += kSrgbToXyz[r][c] * lin[c];
      white[r] += kSrgbToXyz[r][c];
    }
  }
  const double fx = detail::lab_f(xyz[0] / white[0]);
  const double fy = detail::lab_f(xyz[1] / white[1]);
  const double fz = detail::lab_f(xyz[2] / white[2]);
  const double l = std::clamp(116.0 * fy - 16.0, 0.0, 100.0);
  return {l, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline PlaneTriple to_lab(const WordImage& img) {
  return detail::map_planes(img, {PlaneTag::L, PlaneTag::a, PlaneTag::b}, rgb_to_lab);
}

// Integer numerator keeps uniform greys exact: (v,v,v) -> v.
inline double luma(Rgb p) { return (299 * p.r + 587 * p.g + 114 * p.b) / 1000.0; }

/// Rec. 601 luma.
inline GrayPlane intensity(const WordImage& img) {
  return detail::map_plane(img, PlaneTag::Intensity, luma);
}

}  // namespace maskbench
