#pragma once

// Depth-guided near/far partition.
//
// The depth map is over-segmented by local k-means in the joint
// (depth, x, y) space, each cluster is labelled near or far by its mean depth,
// and the column-wise upper edge of the far band is simplified into the split
// polyline.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "digcrowd/scene.hpp"

namespace digcrowd {

/// A partition failure tagged with the scene it belongs to.
class PartitionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClusterFeature {
  double feature = 0.0;  ///< depth
  double px = 0.0;       ///< center x in pixel coordinates (pixel centers at +0.5)
  double py = 0.0;
};

struct ClusterState {
  GridShape shape;
  std::vector<std::int32_t> assignments;  ///< per pixel, dense ids in [0, centers.size())
  std::vector<ClusterFeature> centers;
  double grid_step = 0.0;                 ///< S_c
  double compactness = 0.0;
  /// Sum of squared joint distances after the initial assignment and after
  /// every iteration.
  std::vector<double> energy_history;
  int iterations = 0;

  int cluster_count() const { return static_cast<int>(centers.size()); }
};

/// Squared joint distance used by the clustering.
double joint_distance_sq(double feature_delta, double dx, double dy, double spatial_weight_sq);

/// Local k-means over (depth, x, y) with D^2 = d_depth^2 + (compactness/S)^2 * d_xy^2
/// and S = sqrt(pixels / target_cluster_count). Centers are seeded on a regular
/// grid, nudged to the lowest-gradient pixel of their 3x3 neighbourhood, and
/// every pixel starts on its nearest seed. Each iteration moves centers to their
/// cluster means and lets each center claim pixels inside its 2S x 2S window.
/// Stops after max_iters or once no center moves by 1e-4 or more.
ClusterState cluster_depth(const DepthMap& depth, int target_cluster_count, double compactness,
                           int max_iters);

struct ClusterClassification {
  std::vector<Region> labels;        ///< per cluster
  std::vector<double> mean_depths;   ///< per cluster
  double threshold = 0.0;
};

/// Two-class threshold maximizing between-class variance over the given
/// values (each value one sample). Candidates are midpoints between
/// consecutive distinct values; the smallest best candidate wins. nullopt
/// when all values are equal.
std::optional<double> otsu_threshold(std::span<const double> values);

/// Far iff the cluster's mean depth >= threshold. A missing threshold selects
/// otsu_threshold over the non-empty clusters' means; throws PartitionError
/// when those means have no contrast.
ClusterClassification classify_clusters(const ClusterState& state, const DepthMap& depth,
                                        std::optional<double> threshold);

struct PolylineExtraction {
  Polyline polyline;
  std::vector<int> boundary;     ///< per column: rows of the cleaned far band
  bool envelope_fallback = false;  ///< far region was not an upper band
};

/// Keeps the largest 4-connected far component and fills its holes. Labels are
/// per pixel, values of Region.
std::vector<std::uint8_t> clean_far_region(const GridShape& shape,
                                           std::span<const std::uint8_t> labels);

/// Piecewise-linear fit of per-column heights sampled at column centers, with
/// vertical deviation <= tol at every column. The domain is [0, width].
Polyline simplify_boundary(std::span<const double> heights, double tol);

PolylineExtraction extract_polyline(std::span<const Region> cluster_labels,
                                    const ClusterState& state, const GridShape& shape,
                                    double simplify_tol);

struct PartitionResult {
  RegionMask mask;
  Polyline polyline;
  std::vector<double> cluster_mean_depths;
  std::optional<double> threshold_used;
  bool manual = false;
  std::vector<std::string> warnings;
  std::optional<ClusterState> clusters;
};

/// Manual polyline when configured; otherwise cluster, classify and extract.
/// The mask is always mask_from_polyline(polyline).
PartitionResult partition(const DepthMap& depth, const SceneConfig& cfg);

}  // namespace digcrowd
