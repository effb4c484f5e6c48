#pragma once

// Generators and brute-force reference implementations shared by the tests.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "digcrowd/scene.hpp"

namespace testsupport {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("digcrowd-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random interior breakpoints on [0, width]; vertex heights in [ylo, yhi].
/// Monotone polylines have sorted heights (ascending or descending).
inline digcrowd::Polyline random_polyline(Rng& rng, double width, int segments, double ylo,
                                          double yhi, bool monotone) {
  std::vector<double> xs{0.0, width};
  while (static_cast<int>(xs.size()) < segments + 1) {
    const double x = std::round(uniform(rng, 0.0, width) * 8.0) / 8.0;
    if (x > 0.0 && x < width && std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  std::vector<double> ys;
  for (std::size_t i = 0; i < xs.size(); ++i) ys.push_back(uniform(rng, ylo, yhi));
  if (monotone) {
    std::sort(ys.begin(), ys.end());
    if (rng() & 1) std::reverse(ys.begin(), ys.end());
  }
  std::vector<digcrowd::Point2> v;
  for (std::size_t i = 0; i < xs.size(); ++i) v.push_back({xs[i], ys[i]});
  return digcrowd::Polyline::from_vertices(v);
}

/// Monotone polyline over [0, width] with |slope| <= max_slope and vertices
/// in [ylo, yhi].
inline digcrowd::Polyline bounded_slope_polyline(Rng& rng, double width, int segments, double ylo,
                                                 double yhi, double max_slope) {
  std::vector<double> xs{0.0};
  for (int i = 1; i < segments; ++i) xs.push_back(width * i / segments + uniform(rng, -0.2, 0.2) * width / segments);
  xs.push_back(width);
  const double dir = (rng() & 1) ? 1.0 : -1.0;
  std::vector<digcrowd::Point2> v{{0.0, uniform(rng, ylo, yhi)}};
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double dx = xs[i] - xs[i - 1];
    double y = v.back().y + dir * uniform(rng, 0.0, max_slope) * dx;
    y = std::clamp(y, ylo, yhi);
    v.push_back({xs[i], y});
  }
  return digcrowd::Polyline::from_vertices(v);
}

/// The same line in a grid scaled by `factor` in both axes.
inline digcrowd::Polyline scale_polyline(const digcrowd::Polyline& p, double factor) {
  std::vector<digcrowd::PolylineSegment> segs;
  for (const auto& s : p.segments()) {
    segs.push_back({s.x_start * factor, s.x_end * factor, s.slope, s.intercept * factor});
  }
  return digcrowd::Polyline(segs);
}

/// Region label of the point (x, y) read from a mask rasterized at `factor`
/// times the resolution of a width x height grid.
struct SupersampledMask {
  digcrowd::RegionMask mask;
  double factor;

  SupersampledMask(const digcrowd::Polyline& p, int width, int height, int f)
      : mask(digcrowd::mask_from_polyline(scale_polyline(p, f), {width * f, height * f})),
        factor(f) {}

  digcrowd::Region at(double x, double y) const {
    return mask.at(static_cast<int>(std::floor(x * factor)), static_cast<int>(std::floor(y * factor)));
  }
};

inline std::vector<digcrowd::HeadPoint> random_heads(Rng& rng, std::size_t n, double width,
                                                     double height) {
  std::vector<digcrowd::HeadPoint> heads(n);
  for (auto& h : heads) h = {uniform(rng, 0.0, width), uniform(rng, 0.0, height)};
  return heads;
}

/// All-pairs mean distance to the m = min(k, n-1) nearest other heads.
inline std::vector<double> brute_knn_mean(const std::vector<digcrowd::HeadPoint>& heads, int k,
                                          std::vector<std::vector<double>>* dists = nullptr) {
  std::vector<double> means;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < heads.size(); ++j) {
      if (i == j) continue;
      d.push_back(std::hypot(heads[i].x - heads[j].x, heads[i].y - heads[j].y));
    }
    std::sort(d.begin(), d.end());
    const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(k), d.size());
    d.resize(m);
    double s = 0.0;
    for (double v : d) s += v;
    means.push_back(m ? s / static_cast<double>(m) : std::nan(""));
    if (dists) dists->push_back(d);
  }
  return means;
}

/// Two-class Otsu threshold by exhaustive search over midpoints between
/// distinct sorted values; the smallest best candidate wins.
inline std::optional<double> brute_otsu(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> distinct = v;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) return std::nullopt;
  double best_t = 0.0, best = -1.0;
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    const double t = 0.5 * (distinct[i] + distinct[i + 1]);
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (double x : v) {
      if (x < t) { ++n0; s0 += x; } else { ++n1; s1 += x; }
    }
    const double m0 = s0 / n0, m1 = s1 / n1;
    const double var = n0 * n1 * (m0 - m1) * (m0 - m1);
    if (var > best * (1.0 + 1e-12)) {
      best = var;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace testsupport
