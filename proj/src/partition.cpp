#include "digcrowd/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "digcrowd/simd/kernels.hpp"

namespace digcrowd {

namespace {

constexpr double kCenterResidualTol = 1e-4;

std::uint8_t far_u8() { return static_cast<std::uint8_t>(Region::Far); }
std::uint8_t near_u8() { return static_cast<std::uint8_t>(Region::Near); }

double gradient_sq(const DepthMap& d, int x, int y) {
  const auto& s = d.shape();
  const int xl = std::max(x - 1, 0), xr = std::min(x + 1, s.width - 1);
  const int yu = std::max(y - 1, 0), yd = std::min(y + 1, s.height - 1);
  const double gx = static_cast<double>(d.at(xr, y)) - d.at(xl, y);
  const double gy = static_cast<double>(d.at(x, yd)) - d.at(x, yu);
  return gx * gx + gy * gy;
}

std::vector<ClusterFeature> seed_centers(const DepthMap& depth, double step) {
  const auto& s = depth.shape();
  int nx = std::max(1, static_cast<int>(std::lround(s.width / step)));
  int ny = std::max(1, static_cast<int>(std::lround(s.height / step)));
  if (nx * ny < 2) {
    if (s.height >= s.width) ny = 2;
    else nx = 2;
  }
  std::vector<ClusterFeature> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double sx = (i + 0.5) * s.width / nx;
      const double sy = (j + 0.5) * s.height / ny;
      const int px = std::clamp(static_cast<int>(std::floor(sx)), 0, s.width - 1);
      const int py = std::clamp(static_cast<int>(std::floor(sy)), 0, s.height - 1);
      int bx = px, by = py;
      double best = gradient_sq(depth, px, py);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int qx = px + dx, qy = py + dy;
          if (qx < 0 || qy < 0 || qx >= s.width || qy >= s.height) continue;
          const double g = gradient_sq(depth, qx, qy);
          if (g < best) {
            best = g;
            bx = qx;
            by = qy;
          }
        }
      }
      if (bx == px && by == py) {
        centers.push_back({depth.at(px, py), sx, sy});
      } else {
        centers.push_back({depth.at(bx, by), bx + 0.5, by + 0.5});
      }
    }
  }
  return centers;
}

simd::ClusterCenter as_kernel_center(const ClusterFeature& c) { return {c.feature, c.px, c.py}; }

// Exhaustive nearest center for one pixel, ties to the lower id.
std::pair<double, std::int32_t> nearest_center(const std::vector<ClusterFeature>& centers,
                                               double f, double x, double y, double w2) {
  double best = std::numeric_limits<double>::infinity();
  std::int32_t id = -1;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto& c = centers[k];
    const double d2 = joint_distance_sq(f - c.feature, x - c.px, y - c.py, w2);
    if (d2 < best) {
      best = d2;
      id = static_cast<std::int32_t>(k);
    }
  }
  return {best, id};
}

}  // namespace

double joint_distance_sq(double feature_delta, double dx, double dy, double spatial_weight_sq) {
  // Same operation order as the assignment kernels so results compare exactly.
  const double dy2 = dy * dy;
  return feature_delta * feature_delta + spatial_weight_sq * (dx * dx + dy2);
}

ClusterState cluster_depth(const DepthMap& depth, int target_cluster_count, double compactness,
                           int max_iters) {
  const GridShape shape = depth.shape();
  const std::size_t n = shape.pixel_count();
  if (n < 2) throw std::invalid_argument("cluster_depth: degenerate single-pixel grid");
  if (target_cluster_count < 2 || static_cast<std::size_t>(target_cluster_count) > n) {
    throw std::invalid_argument("cluster_depth: cluster count must lie in [2, pixel count]");
  }
  if (!(compactness > 0.0)) throw std::invalid_argument("cluster_depth: compactness must be > 0");
  if (max_iters < 0) throw std::invalid_argument("cluster_depth: max_iters must be >= 0");

  ClusterState st;
  st.shape = shape;
  st.compactness = compactness;
  st.grid_step = std::sqrt(static_cast<double>(n) / target_cluster_count);
  st.centers = seed_centers(depth, st.grid_step);
  const double w2 = (compactness / st.grid_step) * (compactness / st.grid_step);
  const double step = st.grid_step;

  const auto& kern = simd::kernels();
  const float* feature = depth.values().data();
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  st.assignments.assign(n, -1);

  auto energy = [&] {
    double e = 0.0;
    for (double v : best) e += v;
    return e;
  };

  // Initial assignment: every pixel to its nearest seed.
  for (std::size_t k = 0; k < st.centers.size(); ++k) {
    const auto c = as_kernel_center(st.centers[k]);
    for (int y = 0; y < shape.height; ++y) {
      const std::size_t row = shape.index(0, y);
      kern.assign_row(feature + row, static_cast<std::size_t>(shape.width), 0.5, y + 0.5, c, w2,
                      static_cast<std::int32_t>(k), best.data() + row, st.assignments.data() + row);
    }
  }
  st.energy_history.push_back(energy());

  const std::size_t kc = st.centers.size();
  std::vector<double> sum_f(kc), sum_x(kc), sum_y(kc);
  std::vector<std::size_t> count(kc);
  std::vector<std::uint8_t> covered(n);

  for (int iter = 0; iter < max_iters; ++iter) {
    std::fill(sum_f.begin(), sum_f.end(), 0.0);
    std::fill(sum_x.begin(), sum_x.end(), 0.0);
    std::fill(sum_y.begin(), sum_y.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        const std::size_t p = shape.index(x, y);
        const auto k = static_cast<std::size_t>(st.assignments[p]);
        sum_f[k] += feature[p];
        sum_x[k] += x + 0.5;
        sum_y[k] += y + 0.5;
        ++count[k];
      }
    }
    double residual = 0.0;
    for (std::size_t k = 0; k < kc; ++k) {
      if (count[k] == 0) continue;  // empty cluster keeps its center
      const double inv = 1.0 / static_cast<double>(count[k]);
      ClusterFeature next{sum_f[k] * inv, sum_x[k] * inv, sum_y[k] * inv};
      const auto& prev = st.centers[k];
      residual = std::max(residual, std::sqrt(joint_distance_sq(next.feature - prev.feature,
                                                                next.px - prev.px,
                                                                next.py - prev.py, w2)));
      st.centers[k] = next;
    }

    // A pixel's current center (at its new position) is always a candidate,
    // which keeps the energy from increasing.
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        const std::size_t p = shape.index(x, y);
        const auto& c = st.centers[static_cast<std::size_t>(st.assignments[p])];
        best[p] = joint_distance_sq(feature[p] - c.feature, (x + 0.5) - c.px, (y + 0.5) - c.py, w2);
      }
    }
    std::fill(covered.begin(), covered.end(), 0);
    for (std::size_t k = 0; k < kc; ++k) {
      const auto& c = st.centers[k];
      const int x_lo = std::max(0, static_cast<int>(std::ceil(c.px - step - 0.5)));
      const int x_hi = std::min(shape.width - 1, static_cast<int>(std::floor(c.px + step - 0.5)));
      const int y_lo = std::max(0, static_cast<int>(std::ceil(c.py - step - 0.5)));
      const int y_hi = std::min(shape.height - 1, static_cast<int>(std::floor(c.py + step - 0.5)));
      if (x_lo > x_hi || y_lo > y_hi) continue;
      const auto span_len = static_cast<std::size_t>(x_hi - x_lo + 1);
      for (int y = y_lo; y <= y_hi; ++y) {
        const std::size_t row = shape.index(x_lo, y);
        kern.assign_row(feature + row, span_len, x_lo + 0.5, y + 0.5, as_kernel_center(c), w2,
                        static_cast<std::int32_t>(k), best.data() + row,
                        st.assignments.data() + row);
        std::fill_n(covered.begin() + static_cast<std::ptrdiff_t>(row), span_len, std::uint8_t{1});
      }
    }
    // Orphans: pixels no window reached go to their globally nearest center.
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        const std::size_t p = shape.index(x, y);
        if (covered[p]) continue;
        const auto [d2, id] = nearest_center(st.centers, feature[p], x + 0.5, y + 0.5, w2);
        if (d2 < best[p] || (d2 == best[p] && id < st.assignments[p])) {
          best[p] = d2;
          st.assignments[p] = id;
        }
      }
    }
    st.energy_history.push_back(energy());
    st.iterations = iter + 1;
    if (residual < kCenterResidualTol) break;
  }
  return st;
}

std::optional<double> otsu_threshold(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty() || sorted.front() == sorted.back()) return std::nullopt;

  const double n = static_cast<double>(sorted.size());
  double total = 0.0;
  for (double v : sorted) total += v;

  std::optional<double> best_t;
  double best_var = -1.0;
  double below_sum = 0.0;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    below_sum += sorted[i];
    if (sorted[i] == sorted[i + 1]) continue;
    const double n0 = static_cast<double>(i + 1);
    const double n1 = n - n0;
    const double mu0 = below_sum / n0;
    const double mu1 = (total - below_sum) / n1;
    const double var = (n0 / n) * (n1 / n) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = 0.5 * (sorted[i] + sorted[i + 1]);
    }
  }
  return best_t;
}

ClusterClassification classify_clusters(const ClusterState& state, const DepthMap& depth,
                                        std::optional<double> threshold) {
  if (!(state.shape == depth.shape()) || state.assignments.size() != depth.values().size()) {
    throw std::invalid_argument("classify_clusters: cluster state does not match the depth map");
  }
  const std::size_t kc = state.centers.size();
  std::vector<double> sums(kc, 0.0);
  std::vector<std::size_t> counts(kc, 0);
  const auto values = depth.values();
  for (std::size_t p = 0; p < values.size(); ++p) {
    const auto k = static_cast<std::size_t>(state.assignments[p]);
    sums[k] += values[p];
    ++counts[k];
  }

  ClusterClassification out;
  out.mean_depths.resize(kc);
  std::vector<double> populated;
  for (std::size_t k = 0; k < kc; ++k) {
    out.mean_depths[k] = counts[k] ? sums[k] / static_cast<double>(counts[k]) : state.centers[k].feature;
    if (counts[k]) populated.push_back(out.mean_depths[k]);
  }

  if (threshold) {
    out.threshold = *threshold;
  } else {
    const auto t = otsu_threshold(populated);
    if (!t) {
      throw PartitionError("no depth contrast between clusters; configure a manual polyline");
    }
    out.threshold = *t;
  }
  out.labels.resize(kc);
  for (std::size_t k = 0; k < kc; ++k) {
    out.labels[k] = out.mean_depths[k] >= out.threshold ? Region::Far : Region::Near;
  }
  return out;
}

std::vector<std::uint8_t> clean_far_region(const GridShape& shape,
                                           std::span<const std::uint8_t> labels) {
  const int w = shape.width, h = shape.height;
  std::vector<std::int32_t> comp(shape.pixel_count(), -1);
  std::deque<std::pair<int, int>> queue;
  std::int32_t best_comp = -1;
  std::size_t best_size = 0;
  std::int32_t next_comp = 0;

  auto flood = [&](int sx, int sy, auto&& accept, std::int32_t id) {
    std::size_t size = 0;
    queue.clear();
    queue.emplace_back(sx, sy);
    comp[shape.index(sx, sy)] = id;
    while (!queue.empty()) {
      const auto [x, y] = queue.front();
      queue.pop_front();
      ++size;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const std::size_t qi = shape.index(q[0], q[1]);
        if (comp[qi] != -1 || !accept(qi)) continue;
        comp[qi] = id;
        queue.emplace_back(q[0], q[1]);
      }
    }
    return size;
  };

  auto is_far = [&](std::size_t i) { return labels[i] == far_u8(); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = shape.index(x, y);
      if (comp[i] != -1 || !is_far(i)) continue;
      const std::size_t size = flood(x, y, is_far, next_comp);
      if (size > best_size) {
        best_size = size;
        best_comp = next_comp;
      }
      ++next_comp;
    }
  }

  std::vector<std::uint8_t> out(shape.pixel_count(), near_u8());
  if (best_comp < 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (comp[i] == best_comp) out[i] = far_u8();
  }

  // Near pixels unreachable from the border are holes of the far component.
  std::fill(comp.begin(), comp.end(), -1);
  auto is_near = [&](std::size_t i) { return out[i] == near_u8(); };
  constexpr std::int32_t kOutside = 1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x != 0 && y != 0 && x != w - 1 && y != h - 1) continue;
      const std::size_t i = shape.index(x, y);
      if (comp[i] == -1 && is_near(i)) flood(x, y, is_near, kOutside);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == near_u8() && comp[i] != kOutside) out[i] = far_u8();
  }
  return out;
}

Polyline simplify_boundary(std::span<const double> heights, double tol) {
  if (heights.empty()) throw std::invalid_argument("simplify_boundary: no columns");
  const std::size_t n = heights.size();
  const double width = static_cast<double>(n);
  if (n == 1) return Polyline::horizontal(heights[0], 0.0, width);

  // Vertical-distance Douglas-Peucker over samples at column centers.
  std::vector<bool> keep(n, false);
  keep.front() = keep.back() = true;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    if (b <= a + 1) continue;
    const double xa = a + 0.5, xb = b + 0.5;
    const double slope = (heights[b] - heights[a]) / (xb - xa);
    double worst = -1.0;
    std::size_t worst_i = a;
    for (std::size_t i = a + 1; i < b; ++i) {
      const double dev = std::abs(heights[a] + slope * ((i + 0.5) - xa) - heights[i]);
      if (dev > worst) {
        worst = dev;
        worst_i = i;
      }
    }
    if (worst > tol) {
      keep[worst_i] = true;
      stack.emplace_back(a, worst_i);
      stack.emplace_back(worst_i, b);
    }
  }

  std::vector<Point2> vertices;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) vertices.push_back({i + 0.5, heights[i]});
  }
  // Stretch the outer vertices to the image edges along their segments.
  auto extend = [](const Point2& anchor, const Point2& other, double x) {
    const double slope = (other.y - anchor.y) / (other.x - anchor.x);
    return Point2{x, anchor.y + slope * (x - anchor.x)};
  };
  const Point2 first = extend(vertices[0], vertices[1], 0.0);
  const Point2 last = extend(vertices[vertices.size() - 1], vertices[vertices.size() - 2], width);
  vertices.front() = first;
  vertices.back() = last;
  return Polyline::from_vertices(vertices);
}

PolylineExtraction extract_polyline(std::span<const Region> cluster_labels,
                                    const ClusterState& state, const GridShape& shape,
                                    double simplify_tol) {
  if (!(state.shape == shape)) throw std::invalid_argument("extract_polyline: shape mismatch");
  if (cluster_labels.size() != state.centers.size()) {
    throw std::invalid_argument("extract_polyline: one label per cluster required");
  }
  const bool any_far = std::find(cluster_labels.begin(), cluster_labels.end(), Region::Far) != cluster_labels.end();
  const bool any_near = std::find(cluster_labels.begin(), cluster_labels.end(), Region::Near) != cluster_labels.end();
  if (!any_far || !any_near) {
    throw PartitionError("extract_polyline: need at least one near and one far cluster");
  }

  std::vector<std::uint8_t> raw(shape.pixel_count());
  for (std::size_t p = 0; p < raw.size(); ++p) {
    raw[p] = static_cast<std::uint8_t>(cluster_labels[static_cast<std::size_t>(state.assignments[p])]);
  }
  const auto cleaned = clean_far_region(shape, raw);
  if (std::find(cleaned.begin(), cleaned.end(), far_u8()) == cleaned.end()) {
    throw PartitionError("extract_polyline: far clusters cover no pixels");
  }

  std::vector<int> leading(static_cast<std::size_t>(shape.width), 0);
  std::vector<int> envelope(static_cast<std::size_t>(shape.width), 0);
  bool band = true;
  for (int x = 0; x < shape.width; ++x) {
    int lead = 0;
    while (lead < shape.height && cleaned[shape.index(x, lead)] == far_u8()) ++lead;
    int lowest = 0;
    for (int y = 0; y < shape.height; ++y) {
      if (cleaned[shape.index(x, y)] == far_u8()) lowest = y + 1;
    }
    if (lowest > lead) band = false;
    leading[static_cast<std::size_t>(x)] = lead;
    envelope[static_cast<std::size_t>(x)] = lowest;
  }

  PolylineExtraction out{Polyline::horizontal(0.0, 0.0, 1.0), band ? leading : envelope, !band};
  std::vector<double> heights(out.boundary.begin(), out.boundary.end());
  out.polyline = simplify_boundary(heights, simplify_tol);
  return out;
}

PartitionResult partition(const DepthMap& depth, const SceneConfig& cfg) {
  const std::string tag = "scene '" + cfg.scene_id + "': ";
  if (cfg.polyline) {
    try {
      return PartitionResult{mask_from_polyline(*cfg.polyline, depth.shape()), *cfg.polyline,
                             {}, std::nullopt, true, {}, std::nullopt};
    } catch (const ConfigError& e) {
      throw ConfigError(tag + e.what());
    }
  }
  try {
    const auto& cp = cfg.clustering;
    const int k = static_cast<int>(std::min<std::size_t>(
        static_cast<std::size_t>(cp.target_cluster_count), depth.shape().pixel_count()));
    ClusterState state = cluster_depth(depth, k, cp.compactness, cp.max_iters);
    auto cls = classify_clusters(state, depth, cfg.depth_threshold);
    auto ext = extract_polyline(cls.labels, state, depth.shape(), cp.simplify_tol);
    PartitionResult result{mask_from_polyline(ext.polyline, depth.shape()), ext.polyline,
                           std::move(cls.mean_depths), cls.threshold, false, {}, std::move(state)};
    if (ext.envelope_fallback) {
      result.warnings.push_back(
          "segmentation quality: far region is not an upper band; used the column-wise upper envelope");
    }
    return result;
  } catch (const std::exception& e) {
    throw PartitionError(tag + e.what());
  }
}

}  // namespace digcrowd
