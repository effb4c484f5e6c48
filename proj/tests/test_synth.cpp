#include <gtest/gtest.h>

#include <cmath>

#include "digcrowd/spatial_filter.hpp"
#include "digcrowd/synth.hpp"
#include "support.hpp"

using namespace digcrowd;

namespace {

SynthSpec small_spec(std::uint64_t seed, int people = 80) {
  SynthSpec s;
  s.shape = {320, 240};
  s.n_people = people;
  s.near_head_size = 24;
  s.far_head_size = 6;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Synth, DeterministicUnderSeed) {
  const auto a = generate_scene(small_spec(5));
  const auto b = generate_scene(small_spec(5));
  EXPECT_EQ(a.record.heads, b.record.heads);
  EXPECT_EQ(a.record.depth, b.record.depth);
  EXPECT_EQ(a.record.config.polyline, b.record.config.polyline);
  const auto c = generate_scene(small_spec(6));
  EXPECT_NE(a.record.heads, c.record.heads);
}

TEST(Synth, GroundTruthCountAndBounds) {
  const auto s = generate_scene(small_spec(7, 120));
  EXPECT_EQ(s.record.heads.size(), 120u);
  EXPECT_EQ(s.record.ground_truth_count, 120.0);
  EXPECT_EQ(s.record.config.scene_id, "synth-7");
  for (const auto& h : s.record.heads) {
    ASSERT_TRUE(s.record.depth.shape().contains(h.x, h.y));
    ASSERT_GE(std::abs(h.y - (*s.record.config.polyline)(h.x)), 2.0);
  }
}

TEST(Synth, InvalidSpecs) {
  auto s = small_spec(1);
  s.n_people = 0;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
  s = small_spec(1);
  s.far_head_size = 30;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
  s = small_spec(1);
  s.horizon_y = 500;
  EXPECT_THROW(generate_scene(s), std::invalid_argument);
}

TEST(Synth, OverCapacityIsError) {
  auto s = small_spec(1);
  s.shape = {40, 30};
  s.n_people = 500;
  EXPECT_THROW(generate_scene(s), std::runtime_error);
}

TEST(Synth, DepthMonotoneInY) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto spec = small_spec(seed);
    spec.horizon_y = 200 + static_cast<double>(seed);
    const auto s = generate_scene(spec);
    const auto& d = s.record.depth;
    for (int x = 0; x < d.shape().width; ++x) {
      for (int y = 1; y < d.shape().height; ++y) ASSERT_LE(d.at(x, y), d.at(x, y - 1));
    }
  }
}

TEST(Synth, HeadsSmallerTowardTheHorizon) {
  const auto s = generate_scene(small_spec(3));
  EXPECT_DOUBLE_EQ(s.head_size(0.0), 24.0);
  EXPECT_DOUBLE_EQ(s.head_size(1.0), 6.0);
  EXPECT_LT(s.head_size(0.7), s.head_size(0.3));
}

TEST(Synth, UniformPlacementPassesChiSquare) {
  // 4x4 occupancy, 15 degrees of freedom, alpha 0.01.
  const double critical = 30.578;
  int rejections = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SynthSpec spec;
    spec.n_people = 100;
    spec.seed = 1000 + seed;
    const auto s = generate_scene(spec);
    std::array<double, 16> counts{};
    for (const auto& h : s.record.heads) {
      const int cx = std::min(3, static_cast<int>(h.x / (spec.shape.width / 4.0)));
      const int cy = std::min(3, static_cast<int>(h.y / (spec.shape.height / 4.0)));
      counts[static_cast<std::size_t>(cy * 4 + cx)] += 1;
    }
    const double expected = 100.0 / 16;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    rejections += chi2 > critical;
  }
  // Under uniformity the rejection count is Binomial(50, 0.01); P(>= 4) < 0.002.
  EXPECT_LE(rejections, 3);
}

TEST(Synth, ClusteringConcentratesFarHeads) {
  auto spec = small_spec(9, 150);
  spec.clustering_intensity = 4.0;
  const auto clustered = generate_scene(spec);
  spec.clustering_intensity = 0.0;
  const auto uniform = generate_scene(spec);
  auto far_fraction = [](const SyntheticScene& s) {
    int far = 0;
    for (const auto& h : s.record.heads) far += h.y < (*s.record.config.polyline)(h.x);
    return far / static_cast<double>(s.record.heads.size());
  };
  EXPECT_GT(far_fraction(clustered), far_fraction(uniform));
}

TEST(Oracle, ZeroNoiseReproducesGroundTruth) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = generate_scene(small_spec(seed, 100));
    const auto part = partition(s.record.depth, s.record.config);
    const auto o = oracle_predictions(s, part, {});
    EXPECT_EQ(o.near_heads + o.far_heads, 100u);
    EXPECT_EQ(o.detections.boxes.size(), o.near_heads);
    EXPECT_EQ(o.density.total_mass(), static_cast<double>(o.far_heads));
    const auto f = apply_spatial_constraint(o.detections, part.polyline);
    EXPECT_EQ(f.kept.boxes.size(), o.near_heads);
    EXPECT_EQ(integrate(o.density, part.mask, RegionSelector::Far), static_cast<double>(o.far_heads));
  }
}

TEST(Oracle, BoxesCenteredOnHeads) {
  const auto s = generate_scene(small_spec(2, 60));
  const auto part = partition(s.record.depth, s.record.config);
  const auto o = oracle_predictions(s, part, {});
  std::size_t i = 0;
  for (const auto& h : s.record.heads) {
    if (part.mask.at_point(h.x, h.y) == Region::Far) continue;
    const auto c = box_center(o.detections.boxes[i++]);
    ASSERT_NEAR(c.x, h.x, 1e-9);
    ASSERT_NEAR(c.y, h.y, 1e-9);
  }
}

TEST(Oracle, MissEverything) {
  const auto s = generate_scene(small_spec(4));
  const auto part = partition(s.record.depth, s.record.config);
  NoiseSpec n;
  n.miss_rate = 1.0;
  const auto o = oracle_predictions(s, part, n);
  EXPECT_TRUE(o.detections.boxes.empty());
  EXPECT_EQ(o.missed, o.near_heads);
}

TEST(Oracle, MissRateIsBinomial) {
  double detected = 0.0, expected = 0.0, variance = 0.0;
  const int scenes = 200;
  for (int seed = 0; seed < scenes; ++seed) {
    const auto s = generate_scene(small_spec(static_cast<std::uint64_t>(seed), 100));
    const auto part = partition(s.record.depth, s.record.config);
    NoiseSpec n;
    n.miss_rate = 0.2;
    const auto o = oracle_predictions(s, part, n);
    detected += static_cast<double>(o.detections.boxes.size());
    expected += 0.8 * static_cast<double>(o.near_heads);
    variance += 0.16 * static_cast<double>(o.near_heads);
  }
  EXPECT_NEAR(detected / scenes, expected / scenes, 3.0 * std::sqrt(variance) / scenes);
}

TEST(Oracle, FalsePositivesLandOnNearSide) {
  const auto s = generate_scene(small_spec(8));
  const auto part = partition(s.record.depth, s.record.config);
  NoiseSpec n;
  n.false_positive_rate = 20;
  const auto o = oracle_predictions(s, part, n);
  EXPECT_EQ(o.detections.boxes.size(), o.near_heads + o.false_positives);
  EXPECT_GT(o.false_positives, 0u);
  const auto f = apply_spatial_constraint(o.detections, part.polyline);
  EXPECT_TRUE(f.deleted.empty());
}

TEST(Oracle, NoiseIsSeededAndClamped) {
  const auto s = generate_scene(small_spec(10));
  const auto part = partition(s.record.depth, s.record.config);
  NoiseSpec n;
  n.miss_rate = 0.3;
  n.box_jitter = 2.0;
  n.false_positive_rate = 3;
  n.density_noise_sigma = 1e-3;
  const auto a = oracle_predictions(s, part, n);
  const auto b = oracle_predictions(s, part, n);
  EXPECT_EQ(a.detections.boxes, b.detections.boxes);
  EXPECT_EQ(a.density.values, b.density.values);
  for (double v : a.density.values) ASSERT_GE(v, 0.0);
  for (const auto& box : a.detections.boxes) ASSERT_TRUE(box.valid());
  NoiseSpec bad;
  bad.miss_rate = 1.5;
  EXPECT_THROW(oracle_predictions(s, part, bad), std::invalid_argument);
}
