#pragma once

// Core domain types shared by every pipeline stage.
//
// Coordinates are image pixels with x to the right and y increasing downward.
// Pixel (x, y) covers [x, x+1) x [y, y+1); its center is (x+0.5, y+0.5).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace digcrowd {

/// Malformed or inconsistent scene configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, truncated payload, shape mismatch).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridShape {
  int width = 0;
  int height = 0;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x < width && y < height;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Throws std::invalid_argument unless width >= 1 and height >= 1.
void validate(const GridShape& shape);

enum class Region : std::uint8_t { Near = 0, Far = 1 };

const char* to_string(Region r);

/// Relative depth grid, 0 = nearest, 1 = farthest.
class DepthMap {
 public:
  DepthMap(GridShape shape, std::vector<float> values,
           std::optional<double> metric_scale = std::nullopt);

  const GridShape& shape() const { return shape_; }
  std::span<const float> values() const { return values_; }
  float at(int x, int y) const { return values_[shape_.index(x, y)]; }
  std::optional<double> metric_scale() const { return metric_scale_; }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;

 private:
  GridShape shape_;
  std::vector<float> values_;
  std::optional<double> metric_scale_;
};

struct HeadPoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const HeadPoint&, const HeadPoint&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double score = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const {
    return x_min < x_max && y_min < y_max && score >= 0.0 && score <= 1.0;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// One piece y = slope * x + intercept on [x_start, x_end).
struct PolylineSegment {
  double x_start = 0.0;
  double x_end = 0.0;
  double slope = 0.0;
  double intercept = 0.0;

  double eval(double x) const { return slope * x + intercept; }
  friend bool operator==(const PolylineSegment&, const PolylineSegment&) = default;
};

/// Piecewise-linear split line. Segments are contiguous and continuous; every
/// interval is half-open on the right except the last, which is closed.
class Polyline {
 public:
  explicit Polyline(std::vector<PolylineSegment> segments);

  /// Builds the polyline through the given vertices (strictly increasing x).
  static Polyline from_vertices(std::span<const Point2> vertices);
  static Polyline horizontal(double y, double x_begin, double x_end);

  const std::vector<PolylineSegment>& segments() const { return segments_; }
  double x_begin() const { return segments_.front().x_start; }
  double x_end() const { return segments_.back().x_end; }
  bool in_domain(double x) const { return x >= x_begin() && x <= x_end(); }

  /// Index of the segment whose interval contains x, or nullopt outside the domain.
  std::optional<std::size_t> segment_index(double x) const;

  /// Throws std::domain_error outside [x_begin, x_end].
  double operator()(double x) const;

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  std::vector<PolylineSegment> segments_;
};

/// polyline value at x; std::domain_error when x is outside the domain.
double polyline_eval(const Polyline& p, double x);

class RegionMask {
 public:
  RegionMask(GridShape shape, std::vector<std::uint8_t> labels);

  const GridShape& shape() const { return shape_; }
  /// Raw labels, one byte per pixel, values of Region.
  std::span<const std::uint8_t> labels() const { return labels_; }
  Region at(int x, int y) const { return static_cast<Region>(labels_[shape_.index(x, y)]); }
  /// Label of the pixel containing the point; the point must lie inside the grid.
  Region at_point(double x, double y) const;
  std::size_t count(Region r) const;

  friend bool operator==(const RegionMask&, const RegionMask&) = default;

 private:
  GridShape shape_;
  std::vector<std::uint8_t> labels_;
};

/// Far iff (y + 0.5) < p(x + 0.5). Throws ConfigError when p's domain does not
/// cover [0, width].
RegionMask mask_from_polyline(const Polyline& p, const GridShape& shape);

struct ClusterParams {
  int target_cluster_count = 256;
  double compactness = 0.1;
  int max_iters = 10;
  double simplify_tol = 2.0;
};

struct SceneConfig {
  std::string scene_id;
  std::optional<Polyline> polyline;        ///< manual split line; overrides partitioning
  std::optional<double> depth_threshold;   ///< nullopt selects the automatic threshold
  int knn_k = 3;
  double beta = 0.3;
  double truncation_radius = 3.0;          ///< in multiples of sigma
  double sigma_floor = 1.0;
  double score_threshold = 0.2;
  double nms_iou = 0.5;
  ClusterParams clustering;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct PredictionRefs {
  std::optional<std::filesystem::path> tensor;
  std::optional<std::filesystem::path> detections;
  std::optional<std::filesystem::path> density;
};

struct SceneRecord {
  SceneConfig config;
  DepthMap depth;
  std::vector<HeadPoint> heads;
  PredictionRefs external_predictions;
  double ground_truth_count = 0.0;
};

}  // namespace digcrowd
