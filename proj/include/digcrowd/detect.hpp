#pragma once

// Decoding of grid-structured detector outputs into scored boxes.
//
// A prediction tensor covers an S x S grid of cells. Each cell carries B box
// tuples (x, y, w, h, c) followed by C class probabilities; x and y are the
// box-center offsets inside the cell, w and h are fractions of the image, and
// c is the box confidence (objectness times predicted IOU).

#include <cstddef>
#include <span>
#include <vector>

#include "digcrowd/scene.hpp"

namespace digcrowd {

struct DetectorGridSpec {
  int cells = 7;            ///< S
  int boxes_per_cell = 2;   ///< B
  int classes = 1;          ///< C

  std::size_t cell_stride() const {
    return static_cast<std::size_t>(boxes_per_cell) * 5 + static_cast<std::size_t>(classes);
  }
  std::size_t tensor_length() const {
    return static_cast<std::size_t>(cells) * static_cast<std::size_t>(cells) * cell_stride();
  }
  friend bool operator==(const DetectorGridSpec&, const DetectorGridSpec&) = default;
};

struct GridPrediction {
  DetectorGridSpec spec;
  GridShape shape;
  std::vector<float> values;  ///< row-major cells; per cell boxes then class probabilities

  /// Throws FormatError on length mismatch or invalid spec/shape.
  void validate() const;
  friend bool operator==(const GridPrediction&, const GridPrediction&) = default;
};

enum class DetectionSource { External, Oracle };

struct DetectionSet {
  std::vector<BoundingBox> boxes;
  DetectionSource source = DetectionSource::External;
};

/// Class-specific confidence: Pr(class | object) * (Pr(object) * IOU).
double combine_confidence(double class_prob, double box_conf);

struct DecodeResult {
  DetectionSet detections;
  std::size_t clamped_values = 0;    ///< tensor entries outside [0,1], clamped before use
  std::size_t degenerate_boxes = 0;  ///< boxes above threshold with zero area after clamping
};

DecodeResult decode(const GridPrediction& pred, double score_threshold);

double iou(const BoundingBox& a, const BoundingBox& b);

/// Greedy suppression. Visits boxes by descending score (ties: smaller x_min,
/// then smaller y_min) and keeps a box iff its IOU with every kept box is
/// below iou_threshold.
DetectionSet nms(const DetectionSet& dets, double iou_threshold);

/// Inverse of decode for boxes whose centers are inside the image. Each box is
/// written into the first free slot of the cell containing its center with
/// c = score and class probability 1. Throws std::length_error when a cell
/// would need more than B slots.
GridPrediction encode_tensor(std::span<const BoundingBox> boxes, const DetectorGridSpec& spec,
                             const GridShape& shape);

}  // namespace digcrowd
