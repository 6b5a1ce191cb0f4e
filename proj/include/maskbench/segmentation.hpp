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

// The 16-candidate segmentation bank: per-plane Otsu over RGB, HSV and Lab
// (9), the six singleton/pairwise unions of a 3-cluster RGB partition (6) and
// a gradient-weighted global threshold on intensity (1).

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "maskbench/error.hpp"
#include "maskbench/raster.hpp"

namespace maskbench {

enum class Polarity { kNormal, kInverted };

inline const char* to_string(Polarity p) { return p == Polarity::kNormal ? "normal" : "inverted"; }

inline Polarity parse_polarity(std::string_view s) {
  if (s == "normal") return Polarity::kNormal;
  if (s == "inverted") return Polarity::kInverted;
  throw Error(ErrorCode::kInvalidArgument, "polarity must be normal or inverted, got '" + std::string(s) + "'");
}

struct ThresholdResult {
  double threshold = 0.0;
  BinaryMask mask;
  bool degenerate = false;
};

/// Shortest decimal text that round-trips to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline BinaryMask invert_mask(const BinaryMask& mask) {
  BinaryMask out = mask;
  for (auto& bit : out) bit = bit ? 0 : 1;
  return out;
}

/// Affine rescale to [0,255] then round to the nearest bin. A constant plane
/// maps entirely to bin 0.
inline Grid<std::uint8_t> quantize_plane(const GrayPlane& plane) {
  const auto [lo_it, hi_it] = std::minmax_element(plane.values.begin(), plane.values.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  Grid<std::uint8_t> q(plane.width(), plane.height(), std::uint8_t{0});
  if (span <= 0.0) return q;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const long bin = std::lround((plane.values[i] - lo) * 255.0 / span);
    q[i] = static_cast<std::uint8_t>(std::clamp(bin, 0L, 255L));
  }
  return q;
}

namespace detail {

using u128 = unsigned __int128;

// Three-way comparison of a/b and c/d without overflow (continued-fraction
// expansion). b and d must be non-zero.
inline int compare_fractions(u128 a, u128 b, u128 c, u128 d) {
  int sign = 1;
  for (;;) {
    const u128 qa = a / b;
    const u128 qc = c / d;
    if (qa != qc) return qa < qc ? -sign : sign;
    const u128 ra = a % b;
    const u128 rc = c % d;
    if (ra == 0 && rc == 0) return 0;
    if (ra == 0) return -sign;
    if (rc == 0) return sign;
    // ra/b < rc/d  <=>  b/ra > d/rc
    a = b;
    b = ra;
    c = d;
    d = rc;
    sign = -sign;
  }
}

}  // namespace detail

/// Otsu's threshold over a 256-bin histogram of the rescaled plane. The
/// threshold is a bin index; mask = 1 where bin > threshold. Between-class
/// variances are compared exactly, and the lowest maximizing threshold wins.
inline ThresholdResult otsu_threshold(const GrayPlane& plane) {
  const Grid<std::uint8_t> q = quantize_plane(plane);
  std::array<std::int64_t, 256> hist{};
  for (std::uint8_t v : q) ++hist[v];
  const auto total = static_cast<std::int64_t>(q.size());
  std::int64_t sum = 0;
  for (int i = 0; i < 256; ++i) sum += hist[i] * i;

  ThresholdResult result{0.0, BinaryMask(plane.width(), plane.height(), std::uint8_t{0}), false};
  if (hist[0] == total) {
    result.degenerate = true;
    return result;
  }

  // sigma_B^2 * N^2 = (N*S0 - n0*S)^2 / (n0*n1)
  detail::u128 best_num = 0;
  detail::u128 best_den = 1;
  int best_t = 0;
  std::int64_t n0 = 0;
  std::int64_t s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[t];
    s0 += hist[t] * t;
    const std::int64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const std::int64_t diff = total * s0 - n0 * sum;
    const auto mag = static_cast<detail::u128>(diff < 0 ? -diff : diff);
    const detail::u128 num = mag * mag;
    const detail::u128 den = static_cast<detail::u128>(n0) * static_cast<detail::u128>(n1);
    if (detail::compare_fractions(num, den, best_num, best_den) > 0) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  result.threshold = best_t;
  for (std::size_t i = 0; i < q.size(); ++i) result.mask[i] = q[i] > best_t ? 1 : 0;
  return result;
}

/// Per-pixel gradient magnitude from central differences with replicated
/// borders.
inline Grid<double> gradient_magnitude(const GrayPlane& plane) {
  const int w = plane.width();
  const int h = plane.height();
  const auto& v = plane.values;
  Grid<double> mag(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    const int up = std::max(y - 1, 0);
    const int down = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int left = std::max(x - 1, 0);
      const int right = std::min(x + 1, w - 1);
      const double gx = (v(right, y) - v(left, y)) / 2.0;
      const double gy = (v(x, down) - v(x, up)) / 2.0;
      mag(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return mag;
}

/// Robust automatic threshold selection: the gradient-weighted mean of the
/// plane. mask = 1 where value > threshold.
inline ThresholdResult rats_threshold(const GrayPlane& plane) {
  const Grid<double> weight = gradient_magnitude(plane);
  double weighted = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weighted += weight[i] * plane.values[i];
    total += weight[i];
  }
  ThresholdResult result{0.0, BinaryMask(plane.width(), plane.height(), std::uint8_t{0}), false};
  if (total == 0.0) {
    result.degenerate = true;
    return result;
  }
  result.threshold = weighted / total;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    result.mask[i] = plane.values[i] > result.threshold ? 1 : 0;
  }
  return result;
}

using Point3 = std::array<double, 3>;

struct ClusterModel {
  std::array<Point3, 3> centroids{};
  /// Per-pixel cluster label in {1,2,3}.
  Grid<std::uint8_t> labels;
  double inertia = 0.0;
  /// Inertia after each assignment step; non-increasing.
  std::vector<double> inertia_log;
  std::array<bool, 3> empty{};
  /// Fewer than three distinct colours in the image.
  bool degenerate = false;
  int iterations = 0;
};

struct ClusterOptions {
  std::uint64_t seed = 0;
  /// Perturbs initial centroids by U(-0.5, 0.5) per channel from `seed`.
  bool jitter = false;
  int max_iterations = 100;
};

namespace detail {

inline Point3 to_point(Rgb p) { return {double(p.r), double(p.g), double(p.b)}; }

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dr = a[0] - b[0];
  const double dg = a[1] - b[1];
  const double db = a[2] - b[2];
  return dr * dr + dg * dg + db * db;
}

inline int nearest_centroid(const Point3& p, const std::array<Point3, 3>& centroids) {
  int best = 0;
  double best_d = squared_distance(p, centroids[0]);
  for (int k = 1; k < 3; ++k) {
    const double d = squared_distance(p, centroids[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

// Deterministic seeding: pixels of minimum, median and maximum intensity
// (ties by scan order). Repeated colours are replaced by farthest-point picks.
inline std::vector<Point3> initial_centroids(const WordImage& img) {
  const std::size_t n = img.pixels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return luma(img.pixels[a]) < luma(img.pixels[b]);
  });

  std::vector<Rgb> chosen;
  auto add_unique = [&](Rgb c) {
    if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
  };
  add_unique(img.pixels[order.front()]);
  add_unique(img.pixels[order[(n - 1) / 2]]);
  add_unique(img.pixels[order.back()]);

  while (chosen.size() < 3) {
    double best_d = 0.0;
    const Rgb* best = nullptr;
    for (std::size_t idx : order) {
      const Rgb& c = img.pixels[idx];
      double d = std::numeric_limits<double>::infinity();
      for (const Rgb& s : chosen) d = std::min(d, squared_distance(to_point(c), to_point(s)));
      if (d > best_d) {
        best_d = d;
        best = &c;
      }
    }
    if (best == nullptr) break;  // fewer than three distinct colours
    chosen.push_back(*best);
  }

  std::vector<Point3> out;
  for (const Rgb& c : chosen) out.push_back(to_point(c));
  return out;
}

inline double assign(const WordImage& img, const std::array<Point3, 3>& centroids,
                     Grid<std::uint8_t>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const Point3 p = to_point(img.pixels[i]);
    const int k = nearest_centroid(p, centroids);
    labels[i] = static_cast<std::uint8_t>(k + 1);
    inertia += squared_distance(p, centroids[k]);
  }
  return inertia;
}

}  // namespace detail

/// Lloyd's algorithm with three clusters in RGB. Runs until the assignment is
/// stable or `max_iterations` updates have been made. Clusters that never
/// receive a pixel keep their seed centroid and are flagged empty.
inline ClusterModel fit_three_clusters(const WordImage& img, const ClusterOptions& options = {}) {
  ClusterModel model;
  const std::vector<Point3> seeds = detail::initial_centroids(img);
  model.degenerate = seeds.size() < 3;
  for (int k = 0; k < static_cast<int>(seeds.size()); ++k) model.centroids[k] = seeds[k];
  if (options.jitter) {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    for (int k = 0; k < static_cast<int>(seeds.size()); ++k) {
      for (double& c : model.centroids[k]) c += jitter(rng);
    }
  }
  // Missing clusters duplicate cluster 1; nearest-centroid ties go to the
  // lowest index so they stay empty.
  for (int k = static_cast<int>(seeds.size()); k < 3; ++k) model.centroids[k] = model.centroids[0];

  model.labels = Grid<std::uint8_t>(img.width(), img.height(), std::uint8_t{1});
  model.inertia_log.push_back(detail::assign(img, model.centroids, model.labels));

  Grid<std::uint8_t> next = model.labels;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    std::array<Point3, 3> sums{};
    std::array<std::size_t, 3> counts{};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      const int k = model.labels[i] - 1;
      const Point3 p = detail::to_point(img.pixels[i]);
      for (int c = 0; c < 3; ++c) sums[k][c] += p[c];
      ++counts[k];
    }
    std::array<Point3, 3> updated = model.centroids;
    for (int k = 0; k < 3; ++k) {
      if (counts[k] == 0) continue;
      for (int c = 0; c < 3; ++c) updated[k][c] = sums[k][c] / static_cast<double>(counts[k]);
    }
    const double inertia = detail::assign(img, updated, next);
    model.centroids = updated;
    model.inertia_log.push_back(inertia);
    model.iterations = iter + 1;
    const bool stable = next == model.labels;
    std::swap(model.labels, next);
    if (stable) break;
  }

  model.inertia = model.inertia_log.back();
  for (int k = 0; k < 3; ++k) {
    model.empty[k] = std::none_of(model.labels.begin(), model.labels.end(),
                                  [k](std::uint8_t l) { return l == k + 1; });
  }
  return model;
}

inline ClusterModel fit_three_clusters(const WordImage& img, std::uint64_t seed) {
  return fit_three_clusters(img, ClusterOptions{seed});
}

/// Cluster subsets in bank order: {1},{2},{3},{1,2},{1,3},{2,3}.
inline constexpr std::array<std::array<int, 2>, 6> kClusterSubsets{{
    {1, 0}, {2, 0}, {3, 0}, {1, 2}, {1, 3}, {2, 3},
}};

inline std::array<BinaryMask, 6> cluster_masks(const ClusterModel& model) {
  std::array<BinaryMask, 6> masks;
  for (std::size_t s = 0; s < kClusterSubsets.size(); ++s) {
    const auto [first, second] = kClusterSubsets[s];
    BinaryMask m(model.labels.width(), model.labels.height(), std::uint8_t{0});
    for (std::size_t i = 0; i < m.size(); ++i) {
      const int label = model.labels[i];
      m[i] = (label == first || label == second) ? 1 : 0;
    }
    masks[s] = std::move(m);
  }
  return masks;
}

struct Candidate {
  /// 1..16.
  int index = 0;
  /// e.g. `otsu:R:t=142`, `cluster:{1,3}`, `rats:t=117.4`.
  std::string method;
  BinaryMask mask;
  bool degenerate = false;
};

inline constexpr int kBankSize = 16;

struct CandidateBank {
  std::string image_id;
  Polarity polarity = Polarity::kNormal;
  std::vector<Candidate> candidates;

  /// 1-based, matching the selection protocol (0 means "none").
  const Candidate& at(int index) const {
    if (index < 1 || index > static_cast<int>(candidates.size())) {
      throw Error(ErrorCode::kInvalidArgument, "candidate index out of range 1..16: " + std::to_string(index));
    }
    return candidates[static_cast<std::size_t>(index - 1)];
  }
};

namespace detail {

// Threshold candidates take the dark side (<= t) under normal polarity, where
// text is darker than its background. Degenerate results stay all-zero.
inline Candidate threshold_candidate(int index, std::string method, const ThresholdResult& r) {
  Candidate c{index, std::move(method), r.mask, r.degenerate};
  if (!r.degenerate) c.mask = invert_mask(r.mask);
  return c;
}

}  // namespace detail

/// Generates the fixed-order bank. Deterministic in (img, polarity, options).
inline CandidateBank build_bank(const WordImage& img, Polarity polarity, const ClusterOptions& options = {}) {
  CandidateBank bank{img.id, polarity, {}};
  bank.candidates.reserve(kBankSize);

  const std::array<PlaneTriple, 3> spaces{split_rgb(img), to_hsv(img), to_lab(img)};
  for (const PlaneTriple& planes : spaces) {
    for (const GrayPlane& plane : planes) {
      const ThresholdResult r = otsu_threshold(plane);
      const int index = static_cast<int>(bank.candidates.size()) + 1;
      bank.candidates.push_back(detail::threshold_candidate(
          index, std::string("otsu:") + to_string(plane.tag) + ":t=" + format_real(r.threshold), r));
    }
  }

  const ClusterModel model = fit_three_clusters(img, options);
  const std::array<BinaryMask, 6> masks = cluster_masks(model);
  for (std::size_t s = 0; s < masks.size(); ++s) {
    const auto [first, second] = kClusterSubsets[s];
    std::string method = "cluster:{" + std::to_string(first);
    if (second != 0) method += "," + std::to_string(second);
    method += "}";
    const bool all_empty = model.empty[first - 1] && (second == 0 || model.empty[second - 1]);
    const int index = static_cast<int>(bank.candidates.size()) + 1;
    bank.candidates.push_back(Candidate{index, std::move(method), masks[s], all_empty});
  }

  const ThresholdResult rats = rats_threshold(intensity(img));
  bank.candidates.push_back(detail::threshold_candidate(kBankSize, "rats:t=" + format_real(rats.threshold), rats));

  if (polarity == Polarity::kInverted) {
    for (Candidate& c : bank.candidates) c.mask = invert_mask(c.mask);
  }
  return bank;
}

inline CandidateBank build_bank(const WordImage& img, Polarity polarity, std::uint64_t seed) {
  return build_bank(img, polarity, ClusterOptions{seed});
}

}  // namespace maskbench
