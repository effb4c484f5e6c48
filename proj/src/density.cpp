#include "digcrowd/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

#include "digcrowd/io.hpp"
#include "digcrowd/simd/kernels.hpp"

namespace digcrowd {

namespace {

struct Window {
  int lo = 0;
  int hi = -1;  // inclusive
  int size() const { return hi - lo + 1; }
};

// Pixels whose centers lie within `radius` of `center` along one axis. Always
// contains the pixel holding the center.
Window axis_window(double center, double radius, int extent) {
  const int own = std::clamp(static_cast<int>(std::floor(center)), 0, extent - 1);
  int lo = static_cast<int>(std::ceil(center - radius - 0.5));
  int hi = static_cast<int>(std::floor(center + radius - 0.5));
  lo = std::min(std::max(lo, 0), own);
  hi = std::max(std::min(hi, extent - 1), own);
  return {lo, hi};
}

std::vector<double> gaussian_weights(const Window& w, double center, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(w.size()));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < w.size(); ++i) {
    const double d = (w.lo + i) + 0.5 - center;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d * inv);
  }
  return g;
}

// Splits 2^bits units over the window weights (which sum to one) so that the
// integer parts sum exactly to 2^bits; leftover units go to the largest
// fractional parts, ties to the lower index.
void quantize_into(std::span<const double> weights, int bits, std::vector<std::int64_t>& units) {
  const double scale = std::ldexp(1.0, bits);
  const std::int64_t target = std::int64_t{1} << bits;
  units.assign(weights.size(), 0);
  std::vector<double> frac(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double scaled = weights[i] * scale;
    const double whole = std::floor(scaled);
    units[i] = static_cast<std::int64_t>(whole);
    frac[i] = scaled - whole;
    assigned += units[i];
  }
  std::int64_t remaining = target - assigned;
  if (remaining == 0) return;
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Only pixels with positive weight may receive units; masked-out pixels stay empty.
  if (remaining > 0) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    std::size_t i = 0;
    while (remaining > 0) {
      const std::size_t idx = order[i % order.size()];
      if (weights[idx] > 0.0) {
        ++units[idx];
        --remaining;
      }
      ++i;
    }
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] < frac[b]; });
    std::size_t i = 0;
    while (remaining < 0) {
      const std::size_t idx = order[i % order.size()];
      if (units[idx] > 0) {
        --units[idx];
        ++remaining;
      }
      ++i;
    }
  }
}

}  // namespace

double DensityField::total_mass() const {
  return simd::kernels().sum(values.data(), values.size());
}

std::vector<NeighborStats> knn_mean_distance(std::span<const HeadPoint> heads, int k) {
  if (heads.empty()) throw std::invalid_argument("knn_mean_distance: empty head list");
  if (k < 1) throw std::invalid_argument("knn_mean_distance: k must be >= 1");

  const std::size_t n = heads.size();
  std::vector<double> xs(n), ys(n), d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = heads[i].x;
    ys[i] = heads[i].y;
  }
  const auto& kern = simd::kernels();
  const std::size_t m = std::min(static_cast<std::size_t>(k), n - 1);

  std::vector<NeighborStats> out(n);
  std::vector<std::size_t> others;
  others.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& st = out[i];
    st.k_used = static_cast<int>(m);
    if (m == 0) continue;
    kern.squared_distances(xs[i], ys[i], xs.data(), ys.data(), n, d2.data());
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(m),
                      others.end(), [&](std::size_t a, std::size_t b) {
                        return d2[a] < d2[b] || (d2[a] == d2[b] && a < b);
                      });
    st.distances.resize(m);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      st.distances[j] = std::sqrt(d2[others[j]]);
      total += st.distances[j];
    }
    st.mean = total / static_cast<double>(m);
  }
  return out;
}

KernelParams adaptive_sigma(const NeighborStats& stats, double beta, double sigma_floor,
                            double truncation_radius) {
  if (!(beta > 0.0)) throw std::invalid_argument("adaptive_sigma: beta must be > 0");
  double sigma = sigma_floor;
  if (stats.mean && beta * *stats.mean >= sigma_floor) sigma = beta * *stats.mean;
  return {sigma, beta, truncation_radius};
}

std::vector<KernelParams> geometry_adaptive_kernels(std::span<const HeadPoint> heads, int k,
                                                    double beta, double sigma_floor,
                                                    double truncation_radius) {
  std::vector<KernelParams> params;
  if (heads.empty()) return params;
  const auto stats = knn_mean_distance(heads, k);
  params.reserve(stats.size());
  for (const auto& s : stats) params.push_back(adaptive_sigma(s, beta, sigma_floor, truncation_radius));
  return params;
}

DensityField rasterize_density(std::span<const HeadPoint> heads,
                               std::span<const KernelParams> params, const GridShape& shape,
                               const RasterOptions& options) {
  validate(shape);
  if (heads.size() != params.size()) {
    throw std::invalid_argument("rasterize_density: one KernelParams per head required");
  }
  if (options.support && !(options.support->shape() == shape)) {
    throw std::invalid_argument("rasterize_density: support mask shape mismatch");
  }
  if (options.quantum_bits < 0 || options.quantum_bits > 40) {
    throw std::invalid_argument("rasterize_density: quantum_bits must lie in [0, 40]");
  }

  DensityField field{shape, std::vector<double>(shape.pixel_count(), 0.0)};
  std::vector<std::int64_t> unit_grid;
  if (options.quantum_bits > 0) unit_grid.assign(shape.pixel_count(), 0);

  const auto& kern = simd::kernels();
  const auto keep = static_cast<std::uint8_t>(options.support_region);
  std::vector<double> window_weights;
  std::vector<std::int64_t> window_units;

  for (std::size_t h = 0; h < heads.size(); ++h) {
    const HeadPoint& p = heads[h];
    if (!shape.contains(p.x, p.y)) {
      throw std::invalid_argument("rasterize_density: head " + std::to_string(h) +
                                  " lies outside the grid");
    }
    const double sigma = params[h].sigma;
    if (!(sigma > 0.0)) throw std::invalid_argument("rasterize_density: sigma must be > 0");
    const double radius = params[h].truncation_radius * sigma;
    const Window wx = axis_window(p.x, radius, shape.width);
    const Window wy = axis_window(p.y, radius, shape.height);
    const auto gx = gaussian_weights(wx, p.x, sigma);
    const auto gy = gaussian_weights(wy, p.y, sigma);
    const std::size_t nx = gx.size();

    double norm = 0.0;
    if (options.support) {
      const auto labels = options.support->labels();
      for (int j = 0; j < wy.size(); ++j) {
        const std::uint8_t* row = labels.data() + shape.index(wx.lo, wy.lo + j);
        norm += gy[static_cast<std::size_t>(j)] * kern.masked_sum(gx.data(), row, keep, nx);
      }
      if (!(norm > 0.0)) {
        throw std::invalid_argument("rasterize_density: head " + std::to_string(h) +
                                    " has no support pixels in its kernel window");
      }
    } else {
      norm = std::accumulate(gx.begin(), gx.end(), 0.0) * std::accumulate(gy.begin(), gy.end(), 0.0);
    }

    if (options.quantum_bits == 0) {
      for (int j = 0; j < wy.size(); ++j) {
        const double a = gy[static_cast<std::size_t>(j)] / norm;
        double* dst = field.values.data() + shape.index(wx.lo, wy.lo + j);
        if (options.support) {
          const std::uint8_t* row = options.support->labels().data() + shape.index(wx.lo, wy.lo + j);
          kern.masked_axpy(a, gx.data(), dst, row, keep, nx);
        } else {
          kern.axpy(a, gx.data(), dst, nx);
        }
      }
      continue;
    }

    window_weights.assign(nx * static_cast<std::size_t>(wy.size()), 0.0);
    for (int j = 0; j < wy.size(); ++j) {
      const double a = gy[static_cast<std::size_t>(j)] / norm;
      double* dst = window_weights.data() + static_cast<std::size_t>(j) * nx;
      if (options.support) {
        const std::uint8_t* row = options.support->labels().data() + shape.index(wx.lo, wy.lo + j);
        kern.masked_axpy(a, gx.data(), dst, row, keep, nx);
      } else {
        kern.axpy(a, gx.data(), dst, nx);
      }
    }
    quantize_into(window_weights, options.quantum_bits, window_units);
    for (int j = 0; j < wy.size(); ++j) {
      std::int64_t* dst = unit_grid.data() + shape.index(wx.lo, wy.lo + j);
      const std::int64_t* src = window_units.data() + static_cast<std::size_t>(j) * nx;
      for (std::size_t i = 0; i < nx; ++i) dst[i] += src[i];
    }
  }

  if (options.quantum_bits > 0) {
    for (std::size_t i = 0; i < unit_grid.size(); ++i) {
      field.values[i] = std::ldexp(static_cast<double>(unit_grid[i]), -options.quantum_bits);
    }
  }
  return field;
}

double integrate(const DensityField& field, const RegionMask& mask, RegionSelector region) {
  if (!(field.shape == mask.shape())) {
    throw std::invalid_argument("integrate: density field and mask shapes differ");
  }
  const auto& kern = simd::kernels();
  if (region == RegionSelector::All) return kern.sum(field.values.data(), field.values.size());
  const auto keep = static_cast<std::uint8_t>(region == RegionSelector::Far ? Region::Far : Region::Near);
  return kern.masked_sum(field.values.data(), mask.labels().data(), keep, field.values.size());
}

double far_count_from_external(const std::filesystem::path& field_file, const RegionMask& mask) {
  const DensityField field = read_density(field_file);
  if (!(field.shape == mask.shape())) {
    throw FormatError("density field " + field_file.string() + " is " +
                      std::to_string(field.shape.width) + "x" + std::to_string(field.shape.height) +
                      " but the scene mask is " + std::to_string(mask.shape().width) + "x" +
                      std::to_string(mask.shape().height));
  }
  return integrate(field, mask, RegionSelector::Far);
}

}  // namespace digcrowd
