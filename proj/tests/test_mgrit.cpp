#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pint/mgrit.hpp"
#include "support/oracles.hpp"

using namespace pint;

namespace {

// Coarse steps replay m fine backward Euler steps, so G equals F exactly.
struct ComposedCoarse {
  double lambda;
  Index m;
  Index state_dim() const { return 1; }
  void step(Index level, double, double dt, std::span<const double> in,
            std::span<double> out) const {
    double u = in[0];
    const Index n = level == 0 ? 1 : m;
    for (Index s = 0; s < n; ++s) u = u / (1.0 - lambda * dt / static_cast<double>(n));
    out[0] = u;
  }
};

// Dahlquist with one rate per component.
struct DiagonalDahlquist {
  std::vector<double> lambda;
  Index state_dim() const { return lambda.size(); }
  void step(Index, double, double dt, std::span<const double> in, std::span<double> out) const {
    for (Index k = 0; k < lambda.size(); ++k) out[k] = in[k] / (1.0 - lambda[k] * dt);
  }
};

SpaceTimeVector zeros(Index level, Index n, Index dim = 1) { return SpaceTimeVector(level, n, dim); }

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

Forcing wavy() {
  return [](double t, std::span<double> g) {
    for (auto& v : g) v += 0.01 * std::sin(20.0 * t);
  };
}

SpaceTimeVector forcing_vector(const TemporalGrid& grid, Index dim, const Forcing& f) {
  SpaceTimeVector g(grid.level, grid.num_points(), dim);
  if (f) {
    for (Index i = 1; i < grid.num_points(); ++i) f(grid.time(i), g.at(i));
  }
  return g;
}

}  // namespace

// ---- relaxation ----

TEST(FRelax, ExactCPointsReproduceSequentialSolution) {
  const TemporalHierarchy h(0.0, 1.0, 32, {4});
  const DahlquistPropagator prop(-1.0);
  const std::vector<double> u0{1.0};
  const auto seq = sequential_solve(prop, h.grid(0), u0, wavy());
  Mgrit mg(h, prop);
  SpaceTimeVector u = zeros(0, 33);
  for (Index c = 0; c <= 32; c += 4) u.set(c, seq.at(c));
  mg.f_relax(0, u, forcing_vector(h.grid(0), 1, wavy()));
  EXPECT_LE(max_abs_difference(u, seq), 1e-15);
}

TEST(FRelax, ZeroStaysZero) {
  const TemporalHierarchy h(0.0, 1.0, 16, {4});
  const DahlquistPropagator prop(-1.0);
  Mgrit mg(h, prop);
  SpaceTimeVector u = zeros(0, 17);
  mg.f_relax(0, u, zeros(0, 17));
  for (double v : u.data()) EXPECT_EQ(v, 0.0);
}

TEST(FRelax, OneStepBetweenUnitCPoints) {
  const TemporalHierarchy h(0.0, 0.2, 2, {2});  // dt = 0.1
  const DahlquistPropagator prop(-1.0);
  Mgrit mg(h, prop);
  SpaceTimeVector u = zeros(0, 3);
  u.at(0)[0] = 1.0;
  u.at(2)[0] = 1.0;
  mg.f_relax(0, u, zeros(0, 3));
  EXPECT_NEAR(u.at(1)[0], 1.0 / 1.1, 1e-15);
  EXPECT_EQ(u.at(2)[0], 1.0);
}

TEST(CRelax, NoOpAfterExactFRelax) {
  const TemporalHierarchy h(0.0, 1.0, 32, {4});
  const DahlquistPropagator prop(-1.0);
  const std::vector<double> u0{1.0};
  const auto seq = sequential_solve(prop, h.grid(0), u0);
  Mgrit mg(h, prop);
  SpaceTimeVector u = zeros(0, 33);
  for (Index c = 0; c <= 32; c += 4) u.set(c, seq.at(c));
  const auto g = zeros(0, 33);
  mg.f_relax(0, u, g);
  const SpaceTimeVector before = u;
  mg.c_relax(0, u, g);
  EXPECT_LE(max_abs_difference(u, before), 1e-16);
}

TEST(CRelax, MatchesHandComputedSteps) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const TemporalHierarchy h(0.0, 1.6, 16, {4});  // dt = 0.1
  const DahlquistPropagator prop(-2.0);
  Mgrit mg(h, prop);
  SpaceTimeVector u = zeros(0, 17), g = zeros(0, 17);
  for (Index i = 0; i <= 16; ++i) {
    u.at(i)[0] = d(rng);
    g.at(i)[0] = d(rng);
  }
  const SpaceTimeVector before = u;
  mg.c_relax(0, u, g);
  for (Index i = 0; i <= 16; ++i) {
    if (i % 4 == 0 && i > 0) {
      EXPECT_NEAR(u.at(i)[0], before.at(i - 1)[0] / 1.2 + g.at(i)[0], 1e-15);
    } else {
      EXPECT_EQ(u.at(i)[0], before.at(i)[0]);
    }
  }
}

TEST(CRelax, UnitCoarseningIsSequentialStep) {
  // The coarsest level has every point as a C-point.
  const TemporalHierarchy h(0.0, 0.1, 1, {});
  const DahlquistPropagator prop(-1.0);
  Mgrit mg(h, prop);
  SpaceTimeVector u = zeros(0, 2);
  u.at(0)[0] = 1.0;
  mg.c_relax(0, u, zeros(0, 2));
  EXPECT_NEAR(u.at(1)[0], 1.0 / 1.1, 1e-15);
  EXPECT_EQ(u.at(0)[0], 1.0);
}

// ---- residual ----

TEST(Residual, VanishesOnSequentialSolution) {
  const TemporalHierarchy h(0.0, 1.0, 64, {8});
  const DahlquistPropagator prop(-3.0, 2);
  const std::vector<double> u0{1.0, -0.5};
  const auto seq = sequential_solve(prop, h.grid(0), u0, wavy());
  Mgrit mg(h, prop);
  const auto r = mg.residual(0, seq, forcing_vector(h.grid(0), 2, wavy()));
  for (double v : r.data()) EXPECT_LE(std::abs(v), 1e-14);
}

TEST(Residual, ZeroDataZeroResidual) {
  const TemporalHierarchy h(0.0, 1.0, 16, {4});
  const DahlquistPropagator prop(-1.0);
  Mgrit mg(h, prop);
  const auto r = mg.residual(0, zeros(0, 17), zeros(0, 17));
  for (double v : r.data()) EXPECT_EQ(v, 0.0);
}

TEST(Residual, ConstantStateUnitCoarsening) {
  const TemporalHierarchy h(0.0, 0.4, 4, {});  // dt = 0.1, every point a C-point
  const DahlquistPropagator prop(-1.0);
  Mgrit mg(h, prop);
  SpaceTimeVector u = zeros(0, 5);
  const std::vector<double> one{1.0};
  u.fill(one);
  const auto r = mg.residual(0, u, zeros(0, 5));
  EXPECT_EQ(r.at(0)[0], 0.0);
  for (Index i = 1; i <= 4; ++i) EXPECT_NEAR(r.at(i)[0], 1.0 / 1.1 - 1.0, 1e-15);
}

// ---- restriction and FAS ----

TEST(Restriction, InjectionPicksCPoints) {
  SpaceTimeVector fine(0, 5, 1);
  for (Index i = 0; i < 5; ++i) fine.at(i)[0] = 10.0 + static_cast<double>(i);
  const auto coarse = restrict_injection(fine, 4);
  ASSERT_EQ(coarse.num_points(), 2u);
  EXPECT_EQ(coarse.at(0)[0], 10.0);
  EXPECT_EQ(coarse.at(1)[0], 14.0);
  EXPECT_EQ(coarse.level(), 1u);
}

TEST(Restriction, UnitFactorIsIdentity) {
  SpaceTimeVector fine(0, 7, 2);
  for (Index k = 0; k < 14; ++k) fine.data()[k] = static_cast<double>(k * k);
  const auto same = restrict_injection(fine, 1);
  EXPECT_TRUE(std::equal(same.data().begin(), same.data().end(), fine.data().begin()));
}

TEST(Restriction, FullSizeCount) {
  EXPECT_EQ(restrict_injection(SpaceTimeVector(0, 32769, 1), 256).num_points(), 129u);
  EXPECT_THROW(restrict_injection(SpaceTimeVector(0, 11, 1), 4), ValidationError);
}

TEST(Fas, ZeroResidualMakesRestrictedStateTheCoarseSolution) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0.1, 2.0);
  const TemporalHierarchy h(0.0, 1.0, 32, {4});
  const oracle::RiccatiPropagator prop;
  Mgrit mg(h, prop);
  SpaceTimeVector v(1, 9, 1);
  for (Index j = 0; j < 9; ++j) v.at(j)[0] = d(rng);
  const auto ghat = mg.fas_coarse_equation(1, v, SpaceTimeVector(1, 9, 1));
  // Coarse forward solve w_j = step(w_{j-1}) + ghat_j from w_0 = ghat_0.
  double w = ghat.at(0)[0];
  EXPECT_EQ(w, v.at(0)[0]);
  for (Index j = 1; j < 9; ++j) {
    w = oracle::riccati_be(h.grid(1).dt, w) + ghat.at(j)[0];
    EXPECT_NEAR(w, v.at(j)[0], 1e-14);
  }
}

TEST(Fas, LinearMatchesCorrectionScheme) {
  std::mt19937 rng(9);
  std::normal_distribution<double> d(0.0, 1.0);
  const TemporalHierarchy h(0.0, 2.0, 64, {8});
  const double lambda = -1.7;
  const DahlquistPropagator prop(lambda);
  Mgrit mg(h, prop);
  const Index nc = 8;
  SpaceTimeVector v(1, nc + 1, 1), r(1, nc + 1, 1);
  for (Index j = 0; j <= nc; ++j) {
    v.at(j)[0] = d(rng);
    if (j > 0) r.at(j)[0] = d(rng);
  }
  const auto ghat = mg.fas_coarse_equation(1, v, r);
  const double dtc = h.grid(1).dt;
  // FAS coarse solve.
  std::vector<double> w(nc + 1);
  w[0] = ghat.at(0)[0];
  for (Index j = 1; j <= nc; ++j) w[j] = w[j - 1] / (1.0 - lambda * dtc) + ghat.at(j)[0];
  // Correction scheme: e_j = e_{j-1} / (1 - lambda dt) + r_j, e_0 = 0.
  double e = 0.0;
  for (Index j = 1; j <= nc; ++j) {
    e = e / (1.0 - lambda * dtc) + r.at(j)[0];
    EXPECT_NEAR(w[j] - v.at(j)[0], e, 1e-12);
  }
}

TEST(Fas, ZeroStateGivesResidual) {
  const TemporalHierarchy h(0.0, 1.0, 16, {4});
  const DahlquistPropagator prop(-1.0);
  Mgrit mg(h, prop);
  SpaceTimeVector r(1, 5, 1);
  for (Index j = 1; j < 5; ++j) r.at(j)[0] = 0.25 * static_cast<double>(j);
  const auto ghat = mg.fas_coarse_equation(1, SpaceTimeVector(1, 5, 1), r);
  for (Index j = 0; j < 5; ++j) EXPECT_EQ(ghat.at(j)[0], r.at(j)[0]);
}

// ---- cycles ----

TEST(VCycle, TwoLevelFRelaxationIsParareal) {
  for (int nonlinear = 0; nonlinear < 2; ++nonlinear) {
    const TemporalHierarchy h(0.0, 1.0, 64, {4});
    const DahlquistPropagator lin(-2.0);
    const oracle::RiccatiPropagator nl;
    auto run = [&](const auto& prop) {
      MgritOptions o;
      o.relaxation = Relaxation::F;
      Mgrit mg(h, prop, o);
      const std::vector<double> u0{1.5};
      const auto g = forcing_vector(h.grid(0), 1, wavy());
      SpaceTimeVector u(0, 65, 1);
      u.fill(u0);
      mg.f_relax(0, u, g);
      std::vector<State> U(17, State{1.5});
      for (int k = 0; k < 10; ++k) {
        mg.v_cycle(0, u, g);
        U = parareal_iterate(prop, h, U, wavy());
        for (Index j = 0; j <= 16; ++j) {
          EXPECT_LE(rel_diff(u.at(4 * j)[0], U[j][0]), 1e-12)
              << "nonlinear=" << nonlinear << " k=" << k << " j=" << j;
        }
      }
    };
    if (nonlinear) {
      run(nl);
    } else {
      run(lin);
    }
  }
}

TEST(VCycle, CoarsestLevelIsSequentialSolve) {
  const TemporalHierarchy h(0.0, 1.0, 8, {});
  const DahlquistPropagator prop(-1.0);
  Mgrit mg(h, prop);
  SpaceTimeVector u(0, 9, 1);
  u.at(0)[0] = 1.0;
  const auto g = zeros(0, 9);
  mg.v_cycle(0, u, g);
  const std::vector<double> u0{1.0};
  EXPECT_LE(max_abs_difference(u, sequential_solve(prop, h.grid(0), u0)), 1e-15);
  const auto r = mg.residual(0, u, g);
  for (double v : r.data()) EXPECT_LE(std::abs(v), 1e-15);
}

TEST(VCycle, SequentialSolutionIsFixedPoint) {
  const DiagonalDahlquist prop{{-1.0, -10.0, -0.1}};
  const std::vector<double> u0{1.0, 2.0, -1.0};
  for (const auto& factors : {std::vector<Index>{4}, std::vector<Index>{2, 2, 2},
                              std::vector<Index>{4, 4, 4}}) {
    for (Relaxation relax : {Relaxation::F, Relaxation::FCF}) {
      const TemporalHierarchy h(0.0, 1.0, 128, factors);
      MgritOptions o;
      o.relaxation = relax;
      Mgrit mg(h, prop, o);
      const auto g = forcing_vector(h.grid(0), 3, wavy());
      const auto seq = sequential_solve(prop, h.grid(0), u0, wavy());
      SpaceTimeVector u = seq;
      mg.v_cycle(0, u, g);
      EXPECT_LE(max_abs_difference(u, seq), 1e-14);
      EXPECT_LT(mg.residual_norm(0, mg.residual(0, u, g)), 1e-13);
    }
  }
}

// ---- solve ----

TEST(Solve, DahlquistTwoLevelMatchesSequential) {
  const TemporalHierarchy h(0.0, 1.0, 1024, {4});
  const DahlquistPropagator prop(-1.0);
  MgritOptions o;
  o.halt_tol = 1e-10;
  Mgrit mg(h, prop, o);
  const std::vector<double> u0{1.0};
  const auto [u, rec] = mg.solve(u0);
  ASSERT_TRUE(rec.converged);
  EXPECT_LE(max_abs_difference(u, sequential_solve(prop, h.grid(0), u0)), 10 * o.halt_tol);
}

TEST(Solve, HugeToleranceStopsAfterOneIteration) {
  const TemporalHierarchy h(0.0, 1.0, 64, {4});
  const DahlquistPropagator prop(-1.0);
  MgritOptions o;
  o.halt_tol = 1e10;
  Mgrit mg(h, prop, o);
  const std::vector<double> u0{1.0};
  const auto [u, rec] = mg.solve(u0);
  EXPECT_EQ(rec.iterations(), 1u);
  EXPECT_TRUE(rec.converged);
}

TEST(Solve, NonConvergenceIsFlaggedNotThrown) {
  const TemporalHierarchy h(0.0, 1.0, 64, {4});
  const DahlquistPropagator prop(-1.0);
  MgritOptions o;
  o.halt_tol = 1e-300;
  o.max_iters = 2;
  Mgrit mg(h, prop, o);
  const std::vector<double> u0{1.0};
  const auto [u, rec] = mg.solve(u0);
  EXPECT_EQ(rec.iterations(), 2u);
  EXPECT_FALSE(rec.converged);
  EXPECT_EQ(rec.fine_phi.size(), 2u);
  EXPECT_EQ(rec.wall_seconds.size(), 2u);
}

TEST(Solve, RejectsBadOptions) {
  const TemporalHierarchy h(0.0, 1.0, 64, {4});
  const DahlquistPropagator prop(-1.0);
  MgritOptions o;
  o.halt_tol = 0.0;
  EXPECT_THROW(Mgrit(h, prop, o), ValidationError);
  o.halt_tol = 1e-8;
  o.max_iters = 0;
  EXPECT_THROW(Mgrit(h, prop, o), ValidationError);
}

TEST(Solve, DefaultRelaxationByDepth) {
  const DahlquistPropagator prop(-1.0);
  const TemporalHierarchy two(0.0, 1.0, 64, {4});
  const TemporalHierarchy three(0.0, 1.0, 64, {4, 4});
  EXPECT_EQ(Mgrit(two, prop).relaxation(), Relaxation::F);
  EXPECT_EQ(Mgrit(three, prop).relaxation(), Relaxation::FCF);
}

// After k iterations the first k coarse intervals are exact, for any
// hierarchy depth and relaxation.
TEST(Solve, ExactnessAndFiniteTermination) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> rate(-20.0, -0.1);
  for (int trial = 0; trial < 6; ++trial) {
    const DiagonalDahlquist prop{{rate(rng), rate(rng)}};
    const std::vector<double> u0{1.0, -2.0};
    const std::vector<Index> factors =
        trial % 3 == 0 ? std::vector<Index>{4} : (trial % 3 == 1 ? std::vector<Index>{2, 2} : std::vector<Index>{4, 2});
    const Relaxation relax = trial % 2 ? Relaxation::FCF : Relaxation::F;
    const TemporalHierarchy h(0.0, 1.0, 64, factors);
    const Index m = h.factor(0);
    const Index nc = 64 / m;
    const auto seq = sequential_solve(prop, h.grid(0), u0, wavy());
    for (Index k = 1; k <= nc; ++k) {
      MgritOptions o;
      o.relaxation = relax;
      o.halt_tol = 1e-300;
      o.max_iters = k;
      Mgrit mg(h, prop, o);
      const auto [u, rec] = mg.solve(u0, wavy());
      for (Index j = 0; j <= k; ++j) {
        for (Index c = 0; c < 2; ++c) {
          EXPECT_LE(rel_diff(u.at(j * m)[c], seq.at(j * m)[c]), 1e-12)
              << "trial " << trial << " k=" << k << " j=" << j;
        }
      }
      if (k == nc) EXPECT_LE(rec.residual_norms.back(), 1e-12);
    }
  }
}

TEST(Solve, InitialConditionNeverModified) {
  const TemporalHierarchy h(0.0, 1.0, 64, {2, 2, 2});
  const oracle::RiccatiPropagator prop;
  MgritOptions o;
  o.max_iters = 3;
  Mgrit mg(h, prop, o);
  const std::vector<double> u0{0.75};
  const auto [u, rec] = mg.solve(u0, wavy());
  EXPECT_EQ(u.at(0)[0], 0.75);
}

TEST(Solve, ResidualHistoryIndependentOfWorkers) {
  const TemporalHierarchy h(0.0, 1.0, 240, {4, 3});
  const oracle::RiccatiPropagator prop;
  const std::vector<double> u0{2.0};
  MgritOptions base;
  base.halt_tol = 1e-13;
  Mgrit ref_mg(h, prop, base);
  const auto [ref_u, ref] = ref_mg.solve(u0, wavy());
  for (Index w : {2u, 3u, 4u, 7u, 16u, 100u}) {
    for (bool threaded : {false, true}) {
      MgritOptions o = base;
      o.num_workers = w;
      o.threaded = threaded;
      Mgrit mg(h, prop, o);
      const auto [u, rec] = mg.solve(u0, wavy());
      ASSERT_EQ(rec.iterations(), ref.iterations()) << w;
      for (Index k = 0; k < rec.iterations(); ++k) {
        EXPECT_LE(std::abs(rec.residual_norms[k] - ref.residual_norms[k]),
                  1e-12 * ref.residual_norms[k])
            << "workers " << w << " iteration " << k;
        EXPECT_EQ(rec.fine_phi[k], ref.fine_phi[k]);
        EXPECT_EQ(rec.coarse_phi[k], ref.coarse_phi[k]);
      }
      EXPECT_EQ(max_abs_difference(u, ref_u), 0.0);
    }
  }
}

TEST(Solve, TwoLevelFRelaxationWorkPerIteration) {
  const TemporalHierarchy h(0.0, 1.0, 1024, {16});
  const DahlquistPropagator prop(-1.0);
  MgritOptions o;
  o.halt_tol = 1e-300;
  o.max_iters = 3;
  Mgrit mg(h, prop, o);
  const std::vector<double> u0{1.0};
  const auto [u, rec] = mg.solve(u0);
  for (Index k = 0; k < 3; ++k) {
    // F-relaxation (N - N/m) + C-point residual (N/m) on the fine grid;
    // FAS right-hand side and the sequential coarse solve (N/m each).
    EXPECT_EQ(rec.fine_phi[k], 1024u);
    EXPECT_EQ(rec.coarse_phi[k], 2u * 64u);
  }
}

// ---- Parareal ----

TEST(Parareal, IdenticalPropagatorsConvergeInOneIteration) {
  const TemporalHierarchy h(0.0, 1.0, 64, {8});
  const ComposedCoarse prop{-3.0, 8};
  const std::vector<double> u0{1.0};
  const auto seq = sequential_solve(prop, h.grid(0), u0);
  std::vector<State> U(9, State{1.0});
  U = parareal_iterate(prop, h, U);
  for (Index j = 0; j <= 8; ++j) EXPECT_LE(rel_diff(U[j][0], seq.at(8 * j)[0]), 1e-13);
}

TEST(Parareal, ExactnessAfterKIterations) {
  const TemporalHierarchy h(0.0, 1.0, 64, {8});
  const oracle::RiccatiPropagator prop;
  const std::vector<double> u0{3.0};
  const auto seq = sequential_solve(prop, h.grid(0), u0, wavy());
  std::vector<State> U(9, State{3.0});
  for (Index k = 1; k <= 8; ++k) {
    U = parareal_iterate(prop, h, U, wavy(), k % 3 + 1);
    for (Index j = 0; j <= k; ++j) EXPECT_LE(rel_diff(U[j][0], seq.at(8 * j)[0]), 1e-12);
  }
}

TEST(Parareal, RejectsWrongSize) {
  const TemporalHierarchy h(0.0, 1.0, 64, {8});
  const DahlquistPropagator prop(-1.0);
  EXPECT_THROW(parareal_iterate(prop, h, std::vector<State>(3, State{1.0})), DimensionError);
}

TEST(ConvergenceCsv, HeaderAndRows) {
  ConvergenceRecord rec;
  rec.initial_residual = 1.0;
  rec.residual_norms = {0.5, 0.25};
  rec.fine_phi = {10, 10};
  rec.coarse_phi = {3, 3};
  rec.wall_seconds = {0.0, 0.0};
  std::ostringstream os;
  write_convergence_csv(os, rec);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iteration,residual_norm,fine_phi_count,coarse_phi_count,wall_seconds");
  std::getline(is, line);
  EXPECT_EQ(line, "0,1,0,0,0");
  std::getline(is, line);
  EXPECT_EQ(line, "1,0.5,10,3,0");
  std::getline(is, line);
  EXPECT_EQ(line, "2,0.25,10,3,0");
}
