#pragma once

// Synthetic crowd scenes with known ground truth, plus oracle predictors that
// stand in for a trained detector and density regressor.

#include <cstdint>
#include <optional>
#include <string>

#include "digcrowd/density.hpp"
#include "digcrowd/detect.hpp"
#include "digcrowd/partition.hpp"
#include "digcrowd/scene.hpp"

namespace digcrowd {

struct SynthSpec {
  GridShape shape{640, 480};
  int n_people = 100;
  std::optional<double> horizon_y;  ///< row where depth reaches 0; defaults to the image height
  double near_head_size = 32.0;
  double far_head_size = 8.0;
  double clustering_intensity = 0.0;
  std::uint64_t seed = 0;
  /// Heads are kept at least this far (vertically) from the split line; 0 disables.
  double exclusion_margin = 2.0;
  double split_depth = 0.5;      ///< depth level traced by the split line
  double depth_wobble = 0.03;    ///< amplitude of the smooth horizontal depth perturbation
  std::string scene_id;          ///< defaults to "synth-<seed>"

  void validate() const;
};

struct NoiseSpec {
  double miss_rate = 0.0;
  double false_positive_rate = 0.0;  ///< mean false boxes per scene
  double box_jitter = 0.0;           ///< std of box-center jitter, pixels
  double density_noise_sigma = 0.0;  ///< std of per-pixel additive noise

  void validate() const;
};

struct SyntheticScene {
  SynthSpec spec;
  SceneRecord record;

  /// Apparent head size at a given relative depth.
  double head_size(double depth) const;
};

/// Deterministic in spec.seed. Throws std::invalid_argument for invalid specs
/// and std::runtime_error when the people do not fit at the minimum spacing.
SyntheticScene generate_scene(const SynthSpec& spec);

struct OraclePredictions {
  DetectionSet detections;
  DensityField density;
  std::size_t near_heads = 0;
  std::size_t far_heads = 0;
  std::size_t missed = 0;
  std::size_t false_positives = 0;
};

/// Near-side heads become boxes; far-side heads are rasterized inside the far
/// region with unit mass each (quantized so float32 storage integrates
/// exactly). With zero noise the predictions reproduce the ground truth.
/// Noise draws from a stream seeded by the scene seed.
OraclePredictions oracle_predictions(const SyntheticScene& scene, const PartitionResult& partition,
                                     const NoiseSpec& noise);

}  // namespace digcrowd
