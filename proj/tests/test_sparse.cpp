#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pint/sparse.hpp"
#include "support/oracles.hpp"

using namespace pint;

namespace {

SparseMatrix from_dense(const oracle::Dense& d) {
  TripletBuilder t(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (d[i][j] != 0.0) t.add(i, j, d[i][j]);
    }
  }
  return t.build();
}

// Random sparse, structurally symmetric, diagonally dominant matrix.
oracle::Dense random_dominant(std::size_t n, std::mt19937& rng, bool symmetric) {
  std::uniform_real_distribution<double> v(-1.0, 1.0);
  std::bernoulli_distribution keep(0.15);
  oracle::Dense a = oracle::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (!keep(rng)) continue;
      a[i][j] = v(rng);
      a[j][i] = symmetric ? a[i][j] : v(rng);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::abs(a[i][j]);
    a[i][i] = s + 1.0 + std::abs(v(rng));
  }
  return a;
}

}  // namespace

TEST(Csr, RejectsUnsortedColumns) {
  EXPECT_THROW(SparseMatrix(2, {0, 2, 3}, {1, 0, 1}, {1.0, 2.0, 3.0}), ValidationError);
  EXPECT_THROW(SparseMatrix(2, {0, 1, 3}, {0, 1, 1}, {1.0, 2.0, 3.0}), ValidationError);
  EXPECT_THROW(SparseMatrix(2, {0, 1}, {0}, {1.0}), DimensionError);
}

TEST(Triplets, DuplicatesAreSummed) {
  TripletBuilder t(3);
  t.add(2, 1, 1.5);
  t.add(0, 0, 1.0);
  t.add(2, 1, 2.0);
  const auto a = t.build();
  EXPECT_EQ(a.nonzeros(), 2u);
  EXPECT_EQ(a(2, 1), 3.5);
  EXPECT_EQ(a(0, 0), 1.0);
  EXPECT_EQ(a(1, 1), 0.0);
  EXPECT_THROW(t.add(3, 0, 1.0), DimensionError);
}

TEST(Spmv, IdentityAndZero) {
  const std::vector<double> x{1.0, -2.0, 3.5};
  EXPECT_EQ(spmv(SparseMatrix::identity(3), x), x);
  const auto zero = TripletBuilder(3).build();
  for (double v : spmv(zero, x)) EXPECT_EQ(v, 0.0);
}

TEST(Spmv, MatchesDenseProduct) {
  const oracle::Dense d{{1.0, 0.0, -2.0}, {0.5, 3.0, 0.0}, {0.0, -1.0, 4.0}};
  const std::vector<double> x{0.3, -0.7, 1.1};
  const auto y = spmv(from_dense(d), x);
  const auto ref = oracle::matvec(d, x);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y[i], ref[i], 1e-15);
}

TEST(Spmv, DimensionMismatchRejected) {
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(spmv(SparseMatrix::identity(3), x), DimensionError);
}

TEST(Add, UnionOfPatterns) {
  const oracle::Dense a{{1.0, 2.0}, {0.0, 3.0}};
  const oracle::Dense b{{0.0, 0.0}, {4.0, 5.0}};
  const auto c = add(2.0, from_dense(a), -1.0, from_dense(b));
  EXPECT_EQ(c(0, 0), 2.0);
  EXPECT_EQ(c(0, 1), 4.0);
  EXPECT_EQ(c(1, 0), -4.0);
  EXPECT_EQ(c(1, 1), 1.0);
}

TEST(Factorize, DiagonalReducesToDivision) {
  const oracle::Dense d{{2.0, 0.0, 0.0}, {0.0, -4.0, 0.0}, {0.0, 0.0, 0.5}};
  const auto f = factorize(from_dense(d));
  const std::vector<double> b{1.0, 1.0, 1.0};
  const auto x = f.solve(b);
  EXPECT_DOUBLE_EQ(x[0], 0.5);
  EXPECT_DOUBLE_EQ(x[1], -0.25);
  EXPECT_DOUBLE_EQ(x[2], 2.0);
}

TEST(Factorize, ZeroMatrixIsSingular) {
  TripletBuilder t(4);
  for (std::size_t i = 0; i < 4; ++i) t.add(i, i, 0.0);
  EXPECT_THROW(factorize(t.build()), SingularMatrixError);
  EXPECT_THROW(factorize(TripletBuilder(3).build()), SingularMatrixError);
}

TEST(Factorize, SingularErrorNamesPivot) {
  const oracle::Dense d{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 0.0}};
  try {
    factorize(from_dense(d) /* row 2 empty */);
    FAIL();
  } catch (const SingularMatrixError& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
}

TEST(Solve, ZeroRightHandSide) {
  std::mt19937 rng(1);
  const auto a = from_dense(random_dominant(20, rng, true));
  for (double v : factorize(a).solve(std::vector<double>(20, 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(Solve, RecoversOnesVector) {
  std::mt19937 rng(2);
  const auto a = from_dense(random_dominant(40, rng, false));
  const std::vector<double> ones(40, 1.0);
  const auto x = factorize(a).solve(spmv(a, ones));
  for (double v : x) EXPECT_NEAR(v, 1.0, 1e-10);
}

TEST(Solve, AgreesWithDenseOracle) {
  std::mt19937 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t n : {1u, 2u, 7u, 25u, 50u}) {
    for (bool sym : {true, false}) {
      const auto d = random_dominant(n, rng, sym);
      std::vector<double> b(n);
      for (auto& v : b) v = nd(rng);
      const auto x = factorize(from_dense(d)).solve(b);
      const auto ref = oracle::solve(d, b);
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(x[i], ref[i], 1e-10 * std::max(1.0, std::abs(ref[i])));
    }
  }
}

TEST(Solve, RoundTripResidualOnBandedSystem) {
  // 1D Laplacian with a periodic corner: wide envelope in natural order.
  const std::size_t n = 300;
  TripletBuilder t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.add(i, i, 2.01);
    t.add(i, (i + 1) % n, -1.0);
    t.add((i + 1) % n, i, -1.0);
  }
  const auto a = t.build();
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = std::sin(0.1 * static_cast<double>(i));
  const auto x = factorize(a).solve(b);
  const auto ax = spmv(a, x);
  double r = 0.0;
  for (std::size_t i = 0; i < n; ++i) r += (ax[i] - b[i]) * (ax[i] - b[i]);
  EXPECT_LE(std::sqrt(r), 1e-10 * oracle::norm2(b));
}

TEST(Solve, DimensionMismatchRejected) {
  const auto f = factorize(SparseMatrix::identity(3));
  EXPECT_THROW(f.solve(std::vector<double>(4, 1.0)), DimensionError);
}

TEST(Ordering, IsAPermutation) {
  std::mt19937 rng(8);
  const auto a = from_dense(random_dominant(60, rng, true));
  auto p = reverse_cuthill_mckee(a);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(MatrixMarket, CoordinateFormat) {
  const oracle::Dense d{{1.0, 0.0}, {-2.5, 3.0}};
  std::ostringstream os;
  write_matrix_market(os, from_dense(d));
  EXPECT_EQ(os.str(),
            "%%MatrixMarket matrix coordinate real general\n"
            "2 2 3\n"
            "1 1 1\n"
            "2 1 -2.5\n"
            "2 2 3\n");
}
