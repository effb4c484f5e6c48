#include "digcrowd/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace digcrowd {

namespace {

constexpr double kContinuityTol = 1e-6;

std::string interval(double a, double b) {
  std::ostringstream os;
  os << "[" << a << ", " << b << "]";
  return os.str();
}

}  // namespace

void validate(const GridShape& shape) {
  if (shape.width < 1 || shape.height < 1) {
    throw std::invalid_argument("grid shape must be at least 1x1, got " +
                                std::to_string(shape.width) + "x" +
                                std::to_string(shape.height));
  }
}

const char* to_string(Region r) { return r == Region::Far ? "far" : "near"; }

DepthMap::DepthMap(GridShape shape, std::vector<float> values,
                   std::optional<double> metric_scale)
    : shape_(shape), values_(std::move(values)), metric_scale_(metric_scale) {
  validate(shape_);
  if (values_.size() != shape_.pixel_count()) {
    throw std::invalid_argument("depth map has " + std::to_string(values_.size()) +
                                " values for a " + std::to_string(shape_.width) + "x" +
                                std::to_string(shape_.height) + " grid");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const float v = values_[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw std::invalid_argument("depth value out of [0,1] at index " + std::to_string(i));
    }
  }
  if (metric_scale_ && !(*metric_scale_ > 0.0)) {
    throw std::invalid_argument("depth metric scale must be positive");
  }
}

Polyline::Polyline(std::vector<PolylineSegment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw ConfigError("polyline has no segments");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (!std::isfinite(s.x_start) || !std::isfinite(s.x_end) || !std::isfinite(s.slope) ||
        !std::isfinite(s.intercept)) {
      throw ConfigError("polyline segment " + std::to_string(i) + " has non-finite values");
    }
    if (!(s.x_start < s.x_end)) {
      throw ConfigError("polyline segment " + std::to_string(i) + " has empty interval " +
                        interval(s.x_start, s.x_end));
    }
    if (i == 0) continue;
    const auto& prev = segments_[i - 1];
    if (prev.x_end != s.x_start) {
      throw ConfigError("polyline segments " + std::to_string(i - 1) + " and " +
                        std::to_string(i) + " are not contiguous");
    }
    const double left = prev.eval(s.x_start);
    const double right = s.eval(s.x_start);
    if (std::abs(left - right) > kContinuityTol * std::max(1.0, std::abs(left))) {
      throw ConfigError("polyline is discontinuous at x=" + std::to_string(s.x_start));
    }
  }
}

Polyline Polyline::from_vertices(std::span<const Point2> vertices) {
  if (vertices.size() < 2) throw ConfigError("polyline needs at least two vertices");
  std::vector<PolylineSegment> segs;
  segs.reserve(vertices.size() - 1);
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    const Point2 a = vertices[i - 1];
    const Point2 b = vertices[i];
    if (!(a.x < b.x)) throw ConfigError("polyline vertices must have increasing x");
    const double k = (b.y - a.y) / (b.x - a.x);
    // Anchor the intercept at the shared vertex so neighbours agree there.
    segs.push_back({a.x, b.x, k, a.y - k * a.x});
  }
  return Polyline(std::move(segs));
}

Polyline Polyline::horizontal(double y, double x_begin, double x_end) {
  return Polyline({{x_begin, x_end, 0.0, y}});
}

std::optional<std::size_t> Polyline::segment_index(double x) const {
  if (!(x >= x_begin() && x <= x_end())) return std::nullopt;
  auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                             [](double v, const PolylineSegment& s) { return v < s.x_end; });
  if (it == segments_.end()) return segments_.size() - 1;  // x == x_end, closed last interval
  return static_cast<std::size_t>(it - segments_.begin());
}

double Polyline::operator()(double x) const {
  const auto idx = segment_index(x);
  if (!idx) {
    throw std::domain_error("x=" + std::to_string(x) + " outside polyline domain " +
                            interval(x_begin(), x_end()));
  }
  return segments_[*idx].eval(x);
}

double polyline_eval(const Polyline& p, double x) { return p(x); }

RegionMask::RegionMask(GridShape shape, std::vector<std::uint8_t> labels)
    : shape_(shape), labels_(std::move(labels)) {
  validate(shape_);
  if (labels_.size() != shape_.pixel_count()) {
    throw std::invalid_argument("region mask label count does not match its shape");
  }
  for (auto l : labels_) {
    if (l > 1) throw std::invalid_argument("region mask label must be 0 (near) or 1 (far)");
  }
}

Region RegionMask::at_point(double x, double y) const {
  const int px = std::clamp(static_cast<int>(std::floor(x)), 0, shape_.width - 1);
  const int py = std::clamp(static_cast<int>(std::floor(y)), 0, shape_.height - 1);
  return at(px, py);
}

std::size_t RegionMask::count(Region r) const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), static_cast<std::uint8_t>(r)));
}

RegionMask mask_from_polyline(const Polyline& p, const GridShape& shape) {
  validate(shape);
  const double w = shape.width;
  if (p.x_begin() > 0.0 || p.x_end() < w) {
    const double lo = p.x_begin() > 0.0 ? 0.0 : p.x_end();
    const double hi = p.x_begin() > 0.0 ? std::min(p.x_begin(), w) : w;
    throw ConfigError("polyline domain " + interval(p.x_begin(), p.x_end()) +
                      " leaves image columns " + interval(lo, hi) + " uncovered");
  }
  std::vector<std::uint8_t> labels(shape.pixel_count(), static_cast<std::uint8_t>(Region::Near));
  for (int x = 0; x < shape.width; ++x) {
    const double boundary = p(x + 0.5);
    for (int y = 0; y < shape.height && y + 0.5 < boundary; ++y) {
      labels[shape.index(x, y)] = static_cast<std::uint8_t>(Region::Far);
    }
  }
  return RegionMask(shape, std::move(labels));
}

void SceneConfig::validate() const {
  auto fail = [this](const std::string& what) {
    throw ConfigError("scene '" + scene_id + "': " + what);
  };
  if (scene_id.empty()) throw ConfigError("scene_id must not be empty");
  if (depth_threshold && !(*depth_threshold >= 0.0 && *depth_threshold <= 1.0)) {
    fail("depth_threshold must lie in [0,1]");
  }
  if (knn_k < 1) fail("knn_k must be >= 1");
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (!(truncation_radius >= 1.0)) fail("truncation_radius must be >= 1");
  if (!(sigma_floor > 0.0)) fail("sigma_floor must be > 0");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) fail("score_threshold must lie in [0,1]");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) fail("nms_iou must lie in [0,1]");
  if (clustering.target_cluster_count < 2) fail("cluster count must be >= 2");
  if (!(clustering.compactness > 0.0)) fail("compactness must be > 0");
  if (clustering.max_iters < 0) fail("max_iters must be >= 0");
  if (!(clustering.simplify_tol >= 0.0)) fail("simplify_tol must be >= 0");
}

}  // namespace digcrowd
