#pragma once

#include <span>
#include <string>
#include <vector>

#include "digcrowd/detect.hpp"

namespace digcrowd {

struct SceneEstimate {
  std::string scene_id;
  int near_count = 0;
  double far_count = 0.0;
  double total = 0.0;
  double ground_truth = 0.0;
};

struct CountPair {
  double observed = 0.0;
  double predicted = 0.0;
};

struct EvaluationRecord {
  std::vector<CountPair> pairs;
  std::size_t n = 0;
  double mae = 0.0;
  double mse = 0.0;  ///< root-mean-square form
};

/// near_count = number of kept boxes; total = near_count + far_count, unrounded.
/// Throws std::invalid_argument for a negative or non-finite far_count.
SceneEstimate fuse(const DetectionSet& kept, double far_count, std::string scene_id = {},
                   double ground_truth = 0.0);

/// Mean absolute error. Throws std::invalid_argument on an empty batch.
double mae(std::span<const CountPair> pairs);

/// Square root of the mean squared error. Throws std::invalid_argument on an
/// empty batch.
double mse(std::span<const CountPair> pairs);

EvaluationRecord evaluate(std::vector<CountPair> pairs);

}  // namespace digcrowd
