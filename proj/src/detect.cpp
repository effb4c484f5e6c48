#include "digcrowd/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace digcrowd {

namespace {

float clamp_unit(float v, std::size_t& clamped) {
  if (std::isnan(v)) {
    ++clamped;
    return 0.0f;
  }
  if (v < 0.0f || v > 1.0f) {
    ++clamped;
    return std::clamp(v, 0.0f, 1.0f);
  }
  return v;
}

}  // namespace

void GridPrediction::validate() const {
  if (spec.cells < 1 || spec.boxes_per_cell < 1 || spec.classes < 1) {
    throw FormatError("prediction grid spec must have S, B, C >= 1");
  }
  if (shape.width < 1 || shape.height < 1) throw FormatError("prediction image shape is empty");
  if (values.size() != spec.tensor_length()) {
    throw FormatError("prediction tensor has " + std::to_string(values.size()) +
                      " values, expected S*S*(B*5+C) = " + std::to_string(spec.tensor_length()));
  }
}

double combine_confidence(double class_prob, double box_conf) { return class_prob * box_conf; }

DecodeResult decode(const GridPrediction& pred, double score_threshold) {
  pred.validate();
  DecodeResult out;
  const int s = pred.spec.cells;
  const int b_count = pred.spec.boxes_per_cell;
  const double w = pred.shape.width;
  const double h = pred.shape.height;
  const std::size_t stride = pred.spec.cell_stride();

  for (int row = 0; row < s; ++row) {
    for (int col = 0; col < s; ++col) {
      const float* cell = pred.values.data() + (static_cast<std::size_t>(row) * s + col) * stride;
      float class_prob = 0.0f;
      for (int c = 0; c < pred.spec.classes; ++c) {
        class_prob = std::max(class_prob, clamp_unit(cell[b_count * 5 + c], out.clamped_values));
      }
      for (int b = 0; b < b_count; ++b) {
        const float* t = cell + b * 5;
        const double bx = clamp_unit(t[0], out.clamped_values);
        const double by = clamp_unit(t[1], out.clamped_values);
        const double bw = clamp_unit(t[2], out.clamped_values);
        const double bh = clamp_unit(t[3], out.clamped_values);
        const double conf = clamp_unit(t[4], out.clamped_values);

        const double score = combine_confidence(class_prob, conf);
        if (score < score_threshold) continue;

        const double cx = (col + bx) * w / s;
        const double cy = (row + by) * h / s;
        BoundingBox box{std::max(0.0, cx - bw * w / 2.0), std::max(0.0, cy - bh * h / 2.0),
                        std::min(w, cx + bw * w / 2.0), std::min(h, cy + bh * h / 2.0), score};
        if (!box.valid()) {
          ++out.degenerate_boxes;
          continue;
        }
        out.detections.boxes.push_back(box);
      }
    }
  }
  return out;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

DetectionSet nms(const DetectionSet& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = dets.boxes[i];
    const auto& b = dets.boxes[j];
    if (a.score != b.score) return a.score > b.score;
    if (a.x_min != b.x_min) return a.x_min < b.x_min;
    return a.y_min < b.y_min;
  });

  DetectionSet kept{{}, dets.source};
  for (std::size_t idx : order) {
    const auto& cand = dets.boxes[idx];
    const bool suppressed = std::any_of(kept.boxes.begin(), kept.boxes.end(), [&](const auto& k) {
      return iou(cand, k) >= iou_threshold;
    });
    if (!suppressed) kept.boxes.push_back(cand);
  }
  return kept;
}

GridPrediction encode_tensor(std::span<const BoundingBox> boxes, const DetectorGridSpec& spec,
                             const GridShape& shape) {
  GridPrediction pred{spec, shape, std::vector<float>(spec.tensor_length(), 0.0f)};
  pred.validate();
  const int s = spec.cells;
  const double w = shape.width;
  const double h = shape.height;
  std::vector<int> used(static_cast<std::size_t>(s) * s, 0);

  for (const auto& box : boxes) {
    const double cx = (box.x_min + box.x_max) / 2.0;
    const double cy = (box.y_min + box.y_max) / 2.0;
    if (!shape.contains(cx, cy)) {
      throw std::invalid_argument("box center outside the image cannot be encoded");
    }
    const double gx = cx * s / w;
    const double gy = cy * s / h;
    const int col = std::min(s - 1, static_cast<int>(std::floor(gx)));
    const int row = std::min(s - 1, static_cast<int>(std::floor(gy)));
    const std::size_t cell_index = static_cast<std::size_t>(row) * s + col;
    if (used[cell_index] >= spec.boxes_per_cell) {
      throw std::length_error("cell (" + std::to_string(row) + "," + std::to_string(col) +
                              ") has more than B boxes");
    }
    float* cell = pred.values.data() + cell_index * spec.cell_stride();
    float* t = cell + used[cell_index] * 5;
    t[0] = static_cast<float>(gx - col);
    t[1] = static_cast<float>(gy - row);
    t[2] = static_cast<float>(box.width() / w);
    t[3] = static_cast<float>(box.height() / h);
    t[4] = static_cast<float>(box.score);
    cell[spec.boxes_per_cell * 5] = 1.0f;
    ++used[cell_index];
  }
  return pred;
}

}  // namespace digcrowd
