#pragma once

// Data-parallel inner loops used by clustering, kNN search, kernel
// rasterization and region integration.
//
// Every kernel has a scalar reference implementation. Vector variants are
// selected at runtime from the CPU's capabilities and must agree with the
// scalar one: elementwise kernels bit for bit, reductions to rounding.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace digcrowd::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);

struct ClusterCenter {
  double feature = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct KernelTable {
  Isa isa;

  // Pixels i in [0, n) of one row sit at (x0 + i, y). For each, computes
  // D2 = (feature[i] - c.feature)^2 + spatial_weight_sq * ((x - c.x)^2 + (y - c.y)^2)
  // and claims the pixel for `id` when D2 < best[i], or D2 == best[i] and id < label[i].
  void (*assign_row)(const float* feature, std::size_t n, double x0, double y,
                     ClusterCenter c, double spatial_weight_sq, std::int32_t id,
                     double* best, std::int32_t* label);

  // out[i] = (xs[i] - px)^2 + (ys[i] - py)^2
  void (*squared_distances)(double px, double py, const double* xs, const double* ys,
                            std::size_t n, double* out);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // y[i] += a * x[i] where labels[i] == keep
  void (*masked_axpy)(double a, const double* x, double* y, const std::uint8_t* labels,
                      std::uint8_t keep, std::size_t n);

  // sum of v[i] where labels[i] == keep
  double (*masked_sum)(const double* v, const std::uint8_t* labels, std::uint8_t keep,
                       std::size_t n);

  double (*sum)(const double* v, std::size_t n);
};

const KernelTable& scalar_kernels();

/// Vector table, or nullptr when it was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();

/// Widest ISA this process can run.
Isa best_available_isa();

/// Currently selected table. Defaults to best_available_isa(), overridable
/// with the DIGCROWD_SIMD environment variable ("scalar" or "avx2").
const KernelTable& kernels();

/// Forces a table; falls back to scalar when the ISA is unavailable. Returns
/// the ISA actually selected. Not synchronized with concurrent kernel use.
Isa select_isa(Isa isa);

}  // namespace digcrowd::simd
