#include "digcrowd/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace digcrowd {

SceneEstimate fuse(const DetectionSet& kept, double far_count, std::string scene_id,
                   double ground_truth) {
  if (!std::isfinite(far_count) || far_count < 0.0) {
    throw std::invalid_argument("fuse: far count must be finite and non-negative");
  }
  SceneEstimate est;
  est.scene_id = std::move(scene_id);
  est.near_count = static_cast<int>(kept.boxes.size());
  est.far_count = far_count;
  est.total = static_cast<double>(est.near_count) + far_count;
  est.ground_truth = ground_truth;
  return est;
}

double mae(std::span<const CountPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("mae: empty batch");
  double s = 0.0;
  for (const auto& p : pairs) s += std::abs(p.observed - p.predicted);
  return s / static_cast<double>(pairs.size());
}

double mse(std::span<const CountPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("mse: empty batch");
  double s = 0.0;
  for (const auto& p : pairs) {
    const double d = p.observed - p.predicted;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pairs.size()));
}

EvaluationRecord evaluate(std::vector<CountPair> pairs) {
  EvaluationRecord rec;
  rec.n = pairs.size();
  rec.mae = mae(pairs);
  rec.mse = mse(pairs);
  rec.pairs = std::move(pairs);
  return rec;
}

}  // namespace digcrowd
