#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gabornet/gabor.hpp"
#include "oracles.hpp"

using namespace gabornet;
using gabornet::testing::central_diff;
using gabornet::testing::rel_err;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(EvalGabor, CentreIsCosineOfPhase) {
  for (double theta : {0.0, 0.7, 2.0}) {
    EXPECT_DOUBLE_EQ(eval_gabor(0, 0, {1.3, theta, 0.0, 2.5}), 1.0);
    EXPECT_NEAR(eval_gabor(0, 0, {0.4, theta, kPi / 2, 1.0}), 0.0, 1e-16);
  }
}

TEST(EvalGabor, ScalarExample) {
  // exp(-4/8) * cos(pi), evaluated by hand
  const double expected = std::exp(-0.5) * std::cos(kPi);
  EXPECT_NEAR(expected, -0.606531, 1e-6);
  EXPECT_NEAR(eval_gabor(2, 0, {kPi / 2, 0, 0, 2}), expected, 1e-15);
}

TEST(MakeKernel, SinglePixel) {
  const KernelMatrix k = make_kernel({0.9, 0.3, 0.0, 1.5}, 1);
  ASSERT_EQ(k.size, 1);
  EXPECT_DOUBLE_EQ(k(0, 0), 1.0);
}

TEST(MakeKernel, CentreRowOfFiveByFive) {
  const KernelMatrix k = make_kernel({kPi / 2, 0, 0, 2}, 5);
  const double e = std::exp(-0.5);
  const double expected[] = {-e, 0.0, 1.0, 0.0, -e};
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(k(2, c), expected[c], 1e-15) << "column " << c;
  // off-centre rows pick up the envelope along y
  EXPECT_NEAR(k(0, 2), std::exp(-4.0 / 8.0), 1e-15);
}

TEST(MakeKernel, CoordinateConvention) {
  // theta = 0: the carrier varies along x (columns) only; envelope symmetric in y
  const KernelMatrix k = make_kernel({1.0, 0.0, 0.3, 3.0}, 7);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 7; ++c) EXPECT_DOUBLE_EQ(k(r, c), k(6 - r, c));
  EXPECT_NEAR(k(3, 4), std::exp(-1.0 / 18.0) * std::cos(1.0 + 0.3), 1e-15);
}

TEST(MakeKernel, PointSymmetryWithZeroPhase) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const GaborParams p{rng.uniform(0.2, 1.6), rng.uniform(-kPi, kPi), 0.0, rng.uniform(0.5, 5)};
    for (int k : {3, 5, 9}) {
      const KernelMatrix m = make_kernel(p, k);
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) EXPECT_EQ(m(r, c), m(k - 1 - r, k - 1 - c));
    }
  }
}

TEST(MakeKernel, OrientationPeriodicity) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const GaborParams p{rng.uniform(0.2, 1.6), rng.uniform(-kPi, kPi), 0.0, rng.uniform(0.5, 5)};
    GaborParams q = p;
    q.theta += kPi;
    const KernelMatrix a = make_kernel(p, 7);
    const KernelMatrix b = make_kernel(q, 7);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
  }
}

TEST(MakeKernel, EnvelopeBound) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const GaborParams p{rng.uniform(0.01, 3), rng.uniform(-10, 10), rng.uniform(-10, 10),
                        rng.uniform(0.001, 20)};
    for (double v : make_kernel(p, 11).values) EXPECT_LE(std::abs(v), 1.0);
  }
}

TEST(MakeKernel, RejectsEvenOrNonPositiveSize) {
  EXPECT_THROW(make_kernel({}, 4), std::invalid_argument);
  EXPECT_THROW(make_kernel({}, 0), std::invalid_argument);
  EXPECT_THROW(kernel_param_grads({}, -3), std::invalid_argument);
}

TEST(KernelParamGrads, TrivialCentreValues) {
  const KernelParamGrads g = kernel_param_grads({1.1, 0.4, 0.0, 2.0}, 3);
  EXPECT_EQ(g.d_psi(1, 1), 0.0);
  EXPECT_EQ(g.d_sigma(1, 1), 0.0);
}

TEST(KernelParamGrads, MatchFiniteDifferences) {
  // eps = 1e-6, relative error <= 1e-5 on 50 draws over k in {3, 5, 7, 11}
  Rng rng(4);
  const int sizes[] = {3, 5, 7, 11};
  double worst = 0;
  for (int draw = 0; draw < 50; ++draw) {
    GaborParams p{rng.uniform(0.2, 1.6), rng.uniform(-kPi, kPi), rng.uniform(0, 2 * kPi),
                  rng.uniform(1.0, 6.0)};
    const int k = sizes[draw % 4];
    const KernelParamGrads g = kernel_param_grads(p, k);
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < k; ++c) {
        auto pixel = [&] { return make_kernel(p, k)(r, c); };
        worst = std::max(worst, rel_err(g.d_omega(r, c), central_diff(pixel, p.omega, 1e-6)));
        worst = std::max(worst, rel_err(g.d_theta(r, c), central_diff(pixel, p.theta, 1e-6)));
        worst = std::max(worst, rel_err(g.d_psi(r, c), central_diff(pixel, p.psi, 1e-6)));
        worst = std::max(worst, rel_err(g.d_sigma(r, c), central_diff(pixel, p.sigma, 1e-6)));
      }
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(FilterBank, EntriesAndOrder) {
  const FilterBank bank = build_filter_bank();
  ASSERT_EQ(bank.size(), 40u);
  EXPECT_NEAR(bank[0].omega, 1.570796, 1e-6);
  EXPECT_EQ(bank[0].theta, 0.0);
  // (n=2, m=3) -> index 1*8 + 2
  EXPECT_NEAR(bank[10].omega, 1.110721, 1e-6);
  EXPECT_NEAR(bank[10].omega, kPi / (2 * std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(bank[10].theta, kPi / 4, 1e-12);
  EXPECT_NEAR(bank[39].omega, 0.392699, 1e-6);
  EXPECT_NEAR(bank[39].omega, kPi / 8, 1e-12);
  EXPECT_NEAR(bank[39].theta, 7 * kPi / 8, 1e-12);
}

TEST(FilterBank, Invariants) {
  const FilterBank bank = build_filter_bank();
  for (int n = 0; n < 5; ++n) {
    for (int m = 0; m < 8; ++m) {
      const BankEntry& e = bank[n * 8 + m];
      EXPECT_EQ(e.omega, bank[n * 8].omega);
      EXPECT_NEAR(e.theta, m * kPi / 8, 1e-12);
    }
    if (n > 0) EXPECT_NEAR(bank[n * 8].omega / bank[(n - 1) * 8].omega, 1 / std::sqrt(2.0), 1e-12);
  }
}

TEST(InitParamSet, BankAssignment) {
  const GaborParamSet set = init_param_set(40, 1, 11, 5);
  const FilterBank bank = build_filter_bank();
  EXPECT_NEAR(set.at(0, 0).omega, kPi / 2, 1e-12);
  EXPECT_EQ(set.at(0, 0).theta, 0.0);
  EXPECT_NEAR(set.at(0, 0).sigma, 2.0, 1e-12);
  for (int o = 0; o < 40; ++o) {
    const GaborParams& p = set.at(o, 0);
    EXPECT_EQ(p.omega, bank[o].omega);
    EXPECT_EQ(p.theta, bank[o].theta);
    EXPECT_NEAR(p.sigma, kPi / p.omega, 1e-12);
    EXPECT_GE(p.psi, 0.0);
    EXPECT_LT(p.psi, kPi);
  }
}

TEST(InitParamSet, CyclesBankBeyondForty) {
  const GaborParamSet set = init_param_set(80, 1, 3, 5);
  for (int o = 40; o < 80; ++o) {
    EXPECT_EQ(set.at(o, 0).omega, set.at(o - 40, 0).omega);
    EXPECT_EQ(set.at(o, 0).theta, set.at(o - 40, 0).theta);
  }
  // slots run out-major then in
  const GaborParamSet multi = init_param_set(3, 20, 3, 5);
  EXPECT_EQ(multi.at(2, 0).theta, build_filter_bank()[0].theta);  // slot 40
  EXPECT_EQ(multi.at(1, 3).theta, build_filter_bank()[23].theta);
}

TEST(InitParamSet, SeedDeterminism) {
  EXPECT_EQ(init_param_set(8, 2, 5, 99), init_param_set(8, 2, 5, 99));
  const GaborParamSet a = init_param_set(8, 2, 5, 1);
  const GaborParamSet b = init_param_set(8, 2, 5, 2);
  int differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += a.entries()[i].psi != b.entries()[i].psi;
  EXPECT_GT(differing, 0);
}

TEST(GaborParamSet, MaterializeMatchesMakeKernel) {
  const GaborParamSet set = init_param_set(3, 2, 5, 8);
  const Tensor4 kernels = set.materialize();
  ASSERT_EQ(kernels.shape(), (Shape4{3, 2, 5, 5}));
  for (int o = 0; o < 3; ++o)
    for (int i = 0; i < 2; ++i) {
      const KernelMatrix m = make_kernel(set.at(o, i), 5);
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) EXPECT_EQ(kernels.at(o, i, r, c), m(r, c));
    }
}
