#include "digcrowd/spatial_filter.hpp"

namespace digcrowd {

Point2 box_center(const BoundingBox& b) {
  return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
}

FilterReport apply_spatial_constraint(const DetectionSet& dets, const Polyline& p,
                                      std::string scene_id) {
  FilterReport report;
  report.scene_id = std::move(scene_id);
  report.kept.source = dets.source;

  for (const auto& box : dets.boxes) {
    const Point2 c = box_center(box);
    const auto seg = p.segment_index(c.x);
    if (!seg) {
      report.out_of_domain.push_back(report.kept.boxes.size());
      report.kept.boxes.push_back(box);
      continue;
    }
    if (c.y < p.segments()[*seg].eval(c.x)) {
      report.deleted.push_back({box, c, *seg});
    } else {
      report.kept.boxes.push_back(box);
    }
  }
  return report;
}

}  // namespace digcrowd
