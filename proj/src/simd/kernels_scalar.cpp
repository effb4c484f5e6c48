#include "kernels_impl.hpp"

namespace digcrowd::simd::scalar {

void assign_row(const float* feature, std::size_t n, double x0, double y, ClusterCenter c,
                double spatial_weight_sq, std::int32_t id, double* best, std::int32_t* label) {
  const double dy = y - c.y;
  const double dy2 = dy * dy;
  for (std::size_t i = 0; i < n; ++i) {
    const double df = static_cast<double>(feature[i]) - c.feature;
    const double dx = (x0 + static_cast<double>(i)) - c.x;
    const double d2 = df * df + spatial_weight_sq * (dx * dx + dy2);
    if (d2 < best[i] || (d2 == best[i] && id < label[i])) {
      best[i] = d2;
      label[i] = id;
    }
  }
}

void squared_distances(double px, double py, const double* xs, const double* ys,
                       std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - px;
    const double dy = ys[i] - py;
    out[i] = dx * dx + dy * dy;
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void masked_axpy(double a, const double* x, double* y, const std::uint8_t* labels,
                 std::uint8_t keep, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == keep) y[i] += a * x[i];
  }
}

double masked_sum(const double* v, const std::uint8_t* labels, std::uint8_t keep,
                  std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] == keep) s += v[i];
  }
  return s;
}

double sum(const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s;
}

}  // namespace digcrowd::simd::scalar
