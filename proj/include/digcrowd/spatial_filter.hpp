#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "digcrowd/detect.hpp"
#include "digcrowd/scene.hpp"

namespace digcrowd {

Point2 box_center(const BoundingBox& b);

struct DeletedDetection {
  BoundingBox box;
  Point2 center;
  std::size_t segment = 0;  ///< polyline segment whose interval contains center.x
};

struct FilterReport {
  std::string scene_id;
  DetectionSet kept;
  std::vector<DeletedDetection> deleted;
  /// Indices into `kept` of boxes whose center lies outside the polyline
  /// domain. They are kept and should be surfaced as warnings.
  std::vector<std::size_t> out_of_domain;
};

/// Deletes every detection whose box center lies strictly above the split
/// line, i.e. x_c is in segment i's interval and y_c < k_i * x_c + b_i.
/// Centers exactly on the line are kept.
FilterReport apply_spatial_constraint(const DetectionSet& dets, const Polyline& p,
                                      std::string scene_id = {});

}  // namespace digcrowd
