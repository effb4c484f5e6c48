// AVX2 variants. This translation unit alone is compiled with -mavx2; nothing
// here may run before dispatch has confirmed CPU support.

#include <immintrin.h>

#include <cstring>

#include "kernels_impl.hpp"

namespace digcrowd::simd::avx2 {

namespace {

inline __m256d load_mask_u8(const std::uint8_t* labels, std::uint8_t keep) {
  std::int32_t packed;
  std::memcpy(&packed, labels, sizeof(packed));
  const __m256i wide = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(packed));
  return _mm256_castsi256_pd(_mm256_cmpeq_epi64(wide, _mm256_set1_epi64x(keep)));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void assign_row(const float* feature, std::size_t n, double x0, double y, ClusterCenter c,
                double spatial_weight_sq, std::int32_t id, double* best, std::int32_t* label) {
  const double dy = y - c.y;
  const __m256d dy2 = _mm256_set1_pd(dy * dy);
  const __m256d cf = _mm256_set1_pd(c.feature);
  const __m256d cx = _mm256_set1_pd(c.x);
  const __m256d vx0 = _mm256_set1_pd(x0);
  const __m256d w2 = _mm256_set1_pd(spatial_weight_sq);
  const __m256d lane = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
  const __m128i vid = _mm_set1_epi32(id);
  const __m256i pick_low = _mm256_setr_epi32(0, 2, 4, 6, 0, 2, 4, 6);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d f = _mm256_cvtps_pd(_mm_loadu_ps(feature + i));
    const __m256d x = _mm256_add_pd(vx0, _mm256_add_pd(_mm256_set1_pd(static_cast<double>(i)), lane));
    const __m256d df = _mm256_sub_pd(f, cf);
    const __m256d dx = _mm256_sub_pd(x, cx);
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(df, df),
                                     _mm256_mul_pd(w2, _mm256_add_pd(_mm256_mul_pd(dx, dx), dy2)));

    const __m256d b = _mm256_loadu_pd(best + i);
    const __m128i lbl = _mm_loadu_si128(reinterpret_cast<const __m128i*>(label + i));
    const __m256d lt = _mm256_cmp_pd(d2, b, _CMP_LT_OQ);
    const __m256d eq = _mm256_cmp_pd(d2, b, _CMP_EQ_OQ);
    const __m256d id_wins = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(_mm_cmpgt_epi32(lbl, vid)));
    const __m256d take = _mm256_or_pd(lt, _mm256_and_pd(eq, id_wins));

    _mm256_storeu_pd(best + i, _mm256_blendv_pd(b, d2, take));
    const __m128i take32 = _mm256_castsi256_si128(
        _mm256_permutevar8x32_epi32(_mm256_castpd_si256(take), pick_low));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(label + i), _mm_blendv_epi8(lbl, vid, take32));
  }
  if (i < n) {
    scalar::assign_row(feature + i, n - i, x0 + static_cast<double>(i), y, c, spatial_weight_sq,
                       id, best + i, label + i);
  }
}

void squared_distances(double px, double py, const double* xs, const double* ys,
                       std::size_t n, double* out) {
  const __m256d vpx = _mm256_set1_pd(px);
  const __m256d vpy = _mm256_set1_pd(py);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vpx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vpy);
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)));
  }
  scalar::squared_distances(px, py, xs + i, ys + i, n - i, out + i);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  scalar::axpy(a, x + i, y + i, n - i);
}

void masked_axpy(double a, const double* x, double* y, const std::uint8_t* labels,
                 std::uint8_t keep, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d m = load_mask_u8(labels + i, keep);
    const __m256d cur = _mm256_loadu_pd(y + i);
    const __m256d upd = _mm256_add_pd(cur, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(cur, upd, m));
  }
  scalar::masked_axpy(a, x + i, y + i, labels + i, keep, n - i);
}

double masked_sum(const double* v, const std::uint8_t* labels, std::uint8_t keep, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_and_pd(_mm256_loadu_pd(v + i), load_mask_u8(labels + i, keep)));
  }
  return hsum(acc) + scalar::masked_sum(v + i, labels + i, keep, n - i);
}

double sum(const double* v, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(v + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(v + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(v + i));
  return hsum(_mm256_add_pd(acc0, acc1)) + scalar::sum(v + i, n - i);
}

}  // namespace digcrowd::simd::avx2
