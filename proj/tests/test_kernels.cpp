#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "digcrowd/simd/kernels.hpp"
#include "support.hpp"

using namespace digcrowd::simd;
using testsupport::Rng;
using testsupport::uniform;

namespace {

const KernelTable* vector_table() { return avx2_kernels(); }

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Lengths that exercise full vectors and every tail size.
const std::vector<std::size_t> kLengths{0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 1023};

}  // namespace

TEST(Dispatch, ParseAndNames) {
  EXPECT_EQ(parse_isa("scalar"), Isa::Scalar);
  EXPECT_EQ(parse_isa("avx2"), Isa::Avx2);
  EXPECT_FALSE(parse_isa("sse9").has_value());
  EXPECT_EQ(to_string(Isa::Scalar), "scalar");
}

TEST(Dispatch, SelectFallsBackToScalar) {
  const Isa before = kernels().isa;
  EXPECT_EQ(select_isa(Isa::Scalar), Isa::Scalar);
  EXPECT_EQ(kernels().isa, Isa::Scalar);
  const Isa got = select_isa(Isa::Avx2);
  EXPECT_EQ(got, vector_table() ? Isa::Avx2 : Isa::Scalar);
  select_isa(before);
}

TEST(KernelEquivalence, AssignRowBitExact) {
  const KernelTable* v = vector_table();
  if (!v) GTEST_SKIP() << "no vector kernels on this CPU";
  const KernelTable& s = scalar_kernels();
  Rng rng(21);
  for (std::size_t n : kLengths) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<float> feat(n);
      for (auto& f : feat) f = static_cast<float>(uniform(rng, 0, 1));
      // Quantized features and centers produce exact ties.
      if (trial % 3 == 0) for (auto& f : feat) f = std::round(f * 4) / 4;
      const ClusterCenter c{trial % 3 == 0 ? 0.5 : uniform(rng, 0, 1), uniform(rng, 0, 50),
                            uniform(rng, 0, 50)};
      std::vector<double> best_s(n), best_v;
      std::vector<std::int32_t> lab_s(n), lab_v;
      for (std::size_t i = 0; i < n; ++i) {
        best_s[i] = (rng() % 4 == 0) ? std::numeric_limits<double>::infinity() : uniform(rng, 0, 2);
        lab_s[i] = static_cast<std::int32_t>(rng() % 10);
      }
      best_v = best_s;
      lab_v = lab_s;
      const double w2 = trial % 2 ? 0.0 : uniform(rng, 0, 0.01);
      const auto id = static_cast<std::int32_t>(rng() % 10);
      const double x0 = std::floor(uniform(rng, 0, 40)) + 0.5;
      s.assign_row(feat.data(), n, x0, 12.5, c, w2, id, best_s.data(), lab_s.data());
      v->assign_row(feat.data(), n, x0, 12.5, c, w2, id, best_v.data(), lab_v.data());
      ASSERT_TRUE(bit_equal(best_s, best_v)) << "n=" << n;
      ASSERT_EQ(lab_s, lab_v) << "n=" << n;
    }
  }
}

TEST(KernelEquivalence, AssignRowTieGoesToSmallerId) {
  for (const KernelTable* t : {&scalar_kernels(), vector_table()}) {
    if (!t) continue;
    std::vector<float> feat(9, 0.25f);
    std::vector<double> best(9);
    std::vector<std::int32_t> label(9, 5);
    // Precompute the exact distance so the call ties everywhere.
    for (std::size_t i = 0; i < 9; ++i) {
      const double dx = (0.5 + static_cast<double>(i)) - 3.0;
      best[i] = 0.0 + 0.5 * (dx * dx + 1.0);
    }
    t->assign_row(feat.data(), 9, 0.5, 1.0, {0.25, 3.0, 0.0}, 0.5, 7, best.data(), label.data());
    for (auto l : label) EXPECT_EQ(l, 5);
    t->assign_row(feat.data(), 9, 0.5, 1.0, {0.25, 3.0, 0.0}, 0.5, 2, best.data(), label.data());
    for (auto l : label) EXPECT_EQ(l, 2);
  }
}

TEST(KernelEquivalence, ElementwiseBitExact) {
  const KernelTable* v = vector_table();
  if (!v) GTEST_SKIP() << "no vector kernels on this CPU";
  const KernelTable& s = scalar_kernels();
  Rng rng(22);
  for (std::size_t n : kLengths) {
    std::vector<double> xs(n), ys(n), y0(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = uniform(rng, -100, 100);
      ys[i] = uniform(rng, -100, 100);
      y0[i] = uniform(rng, 0, 1);
      labels[i] = static_cast<std::uint8_t>(rng() % 2);
    }
    std::vector<double> out_s(n), out_v(n);
    s.squared_distances(1.25, -3.5, xs.data(), ys.data(), n, out_s.data());
    v->squared_distances(1.25, -3.5, xs.data(), ys.data(), n, out_v.data());
    ASSERT_TRUE(bit_equal(out_s, out_v));

    auto a_s = y0, a_v = y0;
    s.axpy(0.37, xs.data(), a_s.data(), n);
    v->axpy(0.37, xs.data(), a_v.data(), n);
    ASSERT_TRUE(bit_equal(a_s, a_v));

    for (std::uint8_t keep : {std::uint8_t{0}, std::uint8_t{1}}) {
      auto m_s = y0, m_v = y0;
      s.masked_axpy(1.5, xs.data(), m_s.data(), labels.data(), keep, n);
      v->masked_axpy(1.5, xs.data(), m_v.data(), labels.data(), keep, n);
      ASSERT_TRUE(bit_equal(m_s, m_v));
    }
  }
}

TEST(KernelEquivalence, ReductionsAgreeToRounding) {
  const KernelTable* v = vector_table();
  if (!v) GTEST_SKIP() << "no vector kernels on this CPU";
  const KernelTable& s = scalar_kernels();
  Rng rng(23);
  for (std::size_t n : kLengths) {
    std::vector<double> vals(n);
    std::vector<std::uint8_t> labels(n);
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      vals[i] = uniform(rng, 0, 1e-3);
      abs_sum += vals[i];
      labels[i] = static_cast<std::uint8_t>(rng() % 2);
    }
    const double tol = 1e-15 * (abs_sum + 1.0) * static_cast<double>(n + 1);
    EXPECT_NEAR(s.sum(vals.data(), n), v->sum(vals.data(), n), tol);
    for (std::uint8_t keep : {std::uint8_t{0}, std::uint8_t{1}}) {
      EXPECT_NEAR(s.masked_sum(vals.data(), labels.data(), keep, n),
                  v->masked_sum(vals.data(), labels.data(), keep, n), tol);
    }
  }
}

TEST(KernelEquivalence, DyadicSumsAreExactOnBothPaths) {
  // Values on a 2^-20 lattice add without rounding in any order.
  Rng rng(24);
  std::vector<double> vals(777);
  for (auto& x : vals) x = std::ldexp(static_cast<double>(rng() % 4096), -20);
  const double ref = scalar_kernels().sum(vals.data(), vals.size());
  if (const KernelTable* v = vector_table()) {
    EXPECT_EQ(ref, v->sum(vals.data(), vals.size()));
  }
}
