#pragma once

#include "digcrowd/simd/kernels.hpp"

namespace digcrowd::simd {

namespace scalar {
void assign_row(const float* feature, std::size_t n, double x0, double y, ClusterCenter c,
                double spatial_weight_sq, std::int32_t id, double* best, std::int32_t* label);
void squared_distances(double px, double py, const double* xs, const double* ys,
                       std::size_t n, double* out);
void axpy(double a, const double* x, double* y, std::size_t n);
void masked_axpy(double a, const double* x, double* y, const std::uint8_t* labels,
                 std::uint8_t keep, std::size_t n);
double masked_sum(const double* v, const std::uint8_t* labels, std::uint8_t keep, std::size_t n);
double sum(const double* v, std::size_t n);
}  // namespace scalar

#if defined(DIGCROWD_HAVE_AVX2)
namespace avx2 {
void assign_row(const float* feature, std::size_t n, double x0, double y, ClusterCenter c,
                double spatial_weight_sq, std::int32_t id, double* best, std::int32_t* label);
void squared_distances(double px, double py, const double* xs, const double* ys,
                       std::size_t n, double* out);
void axpy(double a, const double* x, double* y, std::size_t n);
void masked_axpy(double a, const double* x, double* y, const std::uint8_t* labels,
                 std::uint8_t keep, std::size_t n);
double masked_sum(const double* v, const std::uint8_t* labels, std::uint8_t keep, std::size_t n);
double sum(const double* v, std::size_t n);
}  // namespace avx2
#endif

}  // namespace digcrowd::simd
