#include "digcrowd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace digcrowd {

namespace {

constexpr int kMaxPlacementAttempts = 4000;
constexpr double kSpacingFactor = 0.5;   // minimum head spacing as a fraction of head size
constexpr double kPackingEfficiency = 0.5;
constexpr int kPolylineKnots = 9;
constexpr int kFarGroups = 4;
constexpr int kQuantumBits = 20;

enum class Stream : std::uint32_t { Layout = 1, Noise = 2 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

struct DepthModel {
  double horizon;
  double wobble_amp;
  double wobble_phase;
  int width;

  double base(double y) const { return std::clamp((horizon - y) / horizon, 0.0, 1.0); }
  double wobble(double x) const {
    return wobble_amp * std::sin(2.0 * std::numbers::pi * x / width + wobble_phase);
  }
  double at(double x, double y) const { return std::clamp(base(y) + wobble(x), 0.0, 1.0); }
  // Row where base + wobble equals `level`.
  double iso_row(double x, double level) const { return horizon * (1.0 - level + wobble(x)); }
};

}  // namespace

void SynthSpec::validate() const {
  digcrowd::validate(shape);
  if (n_people < 1) throw std::invalid_argument("synth: n_people must be >= 1");
  if (!(far_head_size > 0.0) || !(near_head_size > far_head_size)) {
    throw std::invalid_argument("synth: need 0 < far_head_size < near_head_size");
  }
  if (horizon_y && !(*horizon_y > 0.0 && *horizon_y <= shape.height)) {
    throw std::invalid_argument("synth: horizon_y must lie in (0, height]");
  }
  if (!(clustering_intensity >= 0.0)) throw std::invalid_argument("synth: clustering_intensity must be >= 0");
  if (!(exclusion_margin >= 0.0)) throw std::invalid_argument("synth: exclusion_margin must be >= 0");
  if (!(split_depth > 0.0 && split_depth < 1.0)) throw std::invalid_argument("synth: split_depth must lie in (0,1)");
  if (!(depth_wobble >= 0.0 && depth_wobble < 0.25)) throw std::invalid_argument("synth: depth_wobble must lie in [0, 0.25)");
}

void NoiseSpec::validate() const {
  if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) throw std::invalid_argument("noise: miss_rate must lie in [0,1]");
  if (!(false_positive_rate >= 0.0)) throw std::invalid_argument("noise: false_positive_rate must be >= 0");
  if (!(box_jitter >= 0.0)) throw std::invalid_argument("noise: box_jitter must be >= 0");
  if (!(density_noise_sigma >= 0.0)) throw std::invalid_argument("noise: density_noise_sigma must be >= 0");
}

double SyntheticScene::head_size(double depth) const {
  return spec.far_head_size + (spec.near_head_size - spec.far_head_size) * (1.0 - depth);
}

SyntheticScene generate_scene(const SynthSpec& spec) {
  spec.validate();
  const GridShape shape = spec.shape;
  const double w = shape.width;
  const double h = shape.height;
  auto rng = make_rng(spec.seed, Stream::Layout);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const DepthModel model{spec.horizon_y.value_or(h), spec.depth_wobble,
                         2.0 * std::numbers::pi * unit(rng), shape.width};

  std::vector<float> depth_values(shape.pixel_count());
  for (int y = 0; y < shape.height; ++y) {
    for (int x = 0; x < shape.width; ++x) {
      depth_values[shape.index(x, y)] = static_cast<float>(model.at(x + 0.5, y + 0.5));
    }
  }

  std::vector<Point2> knots;
  for (int i = 0; i < kPolylineKnots; ++i) {
    const double x = w * i / (kPolylineKnots - 1);
    knots.push_back({x, model.iso_row(x, spec.split_depth)});
  }
  const Polyline split = Polyline::from_vertices(knots);

  SyntheticScene scene{spec, SceneRecord{SceneConfig{}, DepthMap(shape, std::move(depth_values)), {}, {}, 0.0}};
  auto spacing = [&](double y) { return kSpacingFactor * scene.head_size(model.base(y)); };

  double capacity = 0.0;
  for (int y = 0; y < shape.height; ++y) {
    const double s = spacing(y + 0.5);
    capacity += w / (s * s);
  }
  capacity *= kPackingEfficiency;
  if (spec.n_people > capacity) {
    throw std::runtime_error("synth: " + std::to_string(spec.n_people) +
                             " people exceed the packable capacity (~" +
                             std::to_string(static_cast<long>(capacity)) + ") at minimum spacing");
  }

  // Far-band group centers for aggregated crowds.
  std::vector<Point2> groups;
  for (int g = 0; g < kFarGroups; ++g) {
    const double gx = 0.5 + (w - 1.0) * unit(rng);
    const double top = std::max(0.5, split(gx) - spec.exclusion_margin);
    groups.push_back({gx, 0.5 + (top - 0.5) * unit(rng)});
  }
  const double group_prob = spec.clustering_intensity / (1.0 + spec.clustering_intensity);
  std::normal_distribution<double> spread(0.0, 4.0 * spec.far_head_size);
  std::uniform_int_distribution<int> pick_group(0, kFarGroups - 1);

  auto& heads = scene.record.heads;
  heads.reserve(static_cast<std::size_t>(spec.n_people));
  for (int person = 0; person < spec.n_people; ++person) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      HeadPoint cand;
      if (group_prob > 0.0 && unit(rng) < group_prob) {
        const Point2 g = groups[static_cast<std::size_t>(pick_group(rng))];
        cand = {g.x + spread(rng), g.y + spread(rng)};
      } else {
        cand = {0.5 + (w - 1.0) * unit(rng), 0.5 + (h - 1.0) * unit(rng)};
      }
      if (cand.x < 0.5 || cand.y < 0.5 || cand.x >= w - 0.5 || cand.y >= h - 0.5) continue;
      if (spec.exclusion_margin > 0.0 && std::abs(cand.y - split(cand.x)) < spec.exclusion_margin) continue;
      const double s_cand = spacing(cand.y);
      const bool crowded = std::any_of(heads.begin(), heads.end(), [&](const HeadPoint& o) {
        const double min_d = 0.5 * (s_cand + spacing(o.y));
        const double dx = o.x - cand.x, dy = o.y - cand.y;
        return dx * dx + dy * dy < min_d * min_d;
      });
      if (crowded) continue;
      heads.push_back(cand);
      placed = true;
    }
    if (!placed) {
      throw std::runtime_error("synth: could not place person " + std::to_string(person) +
                               " at minimum spacing; scene is over capacity");
    }
  }

  auto& cfg = scene.record.config;
  cfg.scene_id = spec.scene_id.empty() ? "synth-" + std::to_string(spec.seed) : spec.scene_id;
  cfg.polyline = split;
  scene.record.ground_truth_count = static_cast<double>(heads.size());
  return scene;
}

OraclePredictions oracle_predictions(const SyntheticScene& scene, const PartitionResult& partition,
                                     const NoiseSpec& noise) {
  noise.validate();
  const auto& rec = scene.record;
  const GridShape shape = rec.depth.shape();
  if (!(partition.mask.shape() == shape)) {
    throw std::invalid_argument("oracle_predictions: partition does not match the scene grid");
  }
  const double w = shape.width;
  const double h = shape.height;
  auto rng = make_rng(scene.spec.seed, Stream::Noise);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  OraclePredictions out;
  out.detections.source = DetectionSource::Oracle;

  auto make_box = [&](double cx, double cy) {
    cx = std::clamp(cx, 0.5, w - 0.5);
    cy = std::clamp(cy, 0.5, h - 0.5);
    const double side = scene.head_size(rec.depth.at(static_cast<int>(cx), static_cast<int>(cy)));
    // Shrink symmetrically at the borders so the box center stays put.
    const double hx = std::min({side / 2.0, cx, w - cx});
    const double hy = std::min({side / 2.0, cy, h - cy});
    return BoundingBox{cx - hx, cy - hy, cx + hx, cy + hy, 1.0};
  };

  std::vector<HeadPoint> far_heads;
  // Only sampled when box_jitter > 0.
  std::normal_distribution<double> jitter(0.0, noise.box_jitter > 0.0 ? noise.box_jitter : 1.0);
  for (const auto& head : rec.heads) {
    if (partition.mask.at_point(head.x, head.y) == Region::Far) {
      far_heads.push_back(head);
      continue;
    }
    ++out.near_heads;
    if (noise.miss_rate > 0.0 && unit(rng) < noise.miss_rate) {
      ++out.missed;
      continue;
    }
    double cx = head.x, cy = head.y;
    if (noise.box_jitter > 0.0) {
      cx += jitter(rng);
      cy += jitter(rng);
    }
    out.detections.boxes.push_back(make_box(cx, cy));
  }
  out.far_heads = far_heads.size();

  if (noise.false_positive_rate > 0.0) {
    std::poisson_distribution<int> fp_count(noise.false_positive_rate);
    const int n_fp = fp_count(rng);
    for (int i = 0; i < n_fp; ++i) {
      for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
        const double x = 0.5 + (w - 1.0) * unit(rng);
        const double y = 0.5 + (h - 1.0) * unit(rng);
        if (partition.mask.at_point(x, y) != Region::Near || y < partition.polyline(x)) continue;
        out.detections.boxes.push_back(make_box(x, y));
        ++out.false_positives;
        break;
      }
    }
  }

  // Kernel widths come from the whole crowd; mass is confined to the far region.
  const auto& cfg = rec.config;
  const auto all_params = geometry_adaptive_kernels(rec.heads, cfg.knn_k, cfg.beta, cfg.sigma_floor,
                                                    cfg.truncation_radius);
  std::vector<KernelParams> far_params;
  for (std::size_t i = 0; i < rec.heads.size(); ++i) {
    if (partition.mask.at_point(rec.heads[i].x, rec.heads[i].y) == Region::Far) {
      far_params.push_back(all_params[i]);
    }
  }
  RasterOptions raster;
  raster.support = &partition.mask;
  raster.support_region = Region::Far;
  raster.quantum_bits = kQuantumBits;
  out.density = rasterize_density(far_heads, far_params, shape, raster);

  if (noise.density_noise_sigma > 0.0) {
    std::normal_distribution<double> pixel_noise(0.0, noise.density_noise_sigma);
    for (double& v : out.density.values) v = std::max(0.0, v + pixel_noise(rng));
  }
  return out;
}

}  // namespace digcrowd
