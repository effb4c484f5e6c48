#pragma once

// Geometry-adaptive density maps: every annotated head contributes one unit
// of mass spread by a Gaussian whose sigma scales with the mean distance to
// the head's nearest neighbours. Counts are recovered by summing the field
// over a region.

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "digcrowd/scene.hpp"

namespace digcrowd {

struct NeighborStats {
  std::vector<double> distances;  ///< ascending
  std::optional<double> mean;     ///< nullopt for a lone head
  int k_used = 0;
};

struct KernelParams {
  double sigma = 1.0;
  double beta = 0.3;
  double truncation_radius = 3.0;  ///< in multiples of sigma
};

struct DensityField {
  GridShape shape;
  std::vector<double> values;  ///< persons per pixel, row-major

  double total_mass() const;
  double at(int x, int y) const { return values[shape.index(x, y)]; }
};

/// Per head, distances to its min(k, n-1) nearest other heads (ties broken by
/// lower index) and their mean. Throws std::invalid_argument for an empty list
/// or k < 1.
std::vector<NeighborStats> knn_mean_distance(std::span<const HeadPoint> heads, int k);

/// sigma = beta * mean when defined and not below sigma_floor, else sigma_floor.
KernelParams adaptive_sigma(const NeighborStats& stats, double beta, double sigma_floor,
                            double truncation_radius = 3.0);

/// knn_mean_distance followed by adaptive_sigma for every head.
std::vector<KernelParams> geometry_adaptive_kernels(std::span<const HeadPoint> heads, int k,
                                                    double beta, double sigma_floor,
                                                    double truncation_radius);

struct RasterOptions {
  /// When set, each kernel is restricted to pixels labelled `support_region`
  /// and renormalized over them, so all of a head's mass lands in that region.
  const RegionMask* support = nullptr;
  Region support_region = Region::Far;
  /// When > 0, each kernel is quantized to integer multiples of 2^-bits that
  /// sum to exactly one, making region integrals exact in float32 storage
  /// (for pixel values below 2^(24-bits)).
  int quantum_bits = 0;
};

/// Sum of per-head discrete Gaussians sampled at pixel centers, truncated to a
/// square of half-width truncation_radius * sigma and renormalized to unit
/// mass. Heads must lie inside the grid.
DensityField rasterize_density(std::span<const HeadPoint> heads,
                               std::span<const KernelParams> params, const GridShape& shape,
                               const RasterOptions& options = {});

enum class RegionSelector { Near, Far, All };

double integrate(const DensityField& field, const RegionMask& mask, RegionSelector region);

/// Loads a density field file and integrates it over the far region of mask.
double far_count_from_external(const std::filesystem::path& field_file, const RegionMask& mask);

}  // namespace digcrowd
