#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <random>

#include "pint/mgrit.hpp"
#include "pint/parallel_runtime.hpp"

using namespace pint;

TEST(Partition, EightIntervalsTwoWorkers) {
  const auto p = partition({8}, 2);
  EXPECT_EQ(p.range(0, 0).begin, 0u);
  EXPECT_EQ(p.range(0, 0).end, 5u);
  EXPECT_EQ(p.range(0, 1).begin, 5u);
  EXPECT_EQ(p.range(0, 1).end, 9u);
}

TEST(Partition, OneWorkerOwnsEverything) {
  const auto p = partition({64, 16, 4}, 1);
  EXPECT_EQ(p.range(0, 0).size(), 65u);
  EXPECT_EQ(p.range(1, 0).size(), 17u);
  EXPECT_EQ(p.range(2, 0).size(), 5u);
}

TEST(Partition, FullSizeSixtyFourWorkers) {
  const auto p = partition({32768, 128}, 64);
  for (Index w = 0; w < 64; ++w) {
    // Worker 0 additionally holds the initial point.
    const Index intervals = p.range(0, w).size() - (w == 0 ? 1 : 0);
    EXPECT_EQ(intervals, 512u);
  }
}

TEST(Partition, MoreWorkersThanCoarsePointsAllowed) {
  const auto p = partition({64, 4}, 16);
  Index owned = 0;
  for (Index w = 0; w < 16; ++w) owned += p.range(1, w).size();
  EXPECT_EQ(owned, 5u);
}

TEST(Partition, RejectsZeroWorkers) { EXPECT_THROW(partition({8}, 0), ValidationError); }

// Disjoint, ordered, complete, balanced on level 0 and aligned across levels.
TEST(Partition, InvariantsOnRandomShapes) {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> fpick(2, 5), cpick(1, 9), wpick(1, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Index> factors(static_cast<std::size_t>(fpick(rng) - 2));
    for (auto& f : factors) f = static_cast<Index>(fpick(rng));
    Index n = static_cast<Index>(cpick(rng));
    for (auto f : factors) n *= f;
    std::vector<Index> intervals{n};
    for (auto f : factors) intervals.push_back(intervals.back() / f);
    const Index nw = static_cast<Index>(wpick(rng));
    const auto p = partition(intervals, nw);
    for (Index l = 0; l < intervals.size(); ++l) {
      Index next = 0;
      for (Index w = 0; w < nw; ++w) {
        const auto r = p.range(l, w);
        if (r.empty()) continue;
        EXPECT_EQ(r.begin, next);
        next = r.end;
      }
      EXPECT_EQ(next, intervals[l] + 1);
    }
    Index lo = n, hi = 0;
    for (Index w = 0; w < nw; ++w) {
      const Index s = p.range(0, w).size() - (w == 0 ? 1 : 0);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    EXPECT_LE(hi - lo, 1u);
    for (Index l = 1; l < intervals.size(); ++l) {
      const Index m = intervals[l - 1] / intervals[l];
      for (Index j = 0; j <= intervals[l]; ++j) EXPECT_EQ(p.owner(l, j), p.owner(l - 1, j * m));
    }
  }
}

TEST(Exchange, OneWorkerIsNoOp) {
  const auto p = partition({8}, 1);
  SpaceTimeVector u(0, 9, 2);
  GhostBuffers g(1, 2);
  exchange_left_boundary(p, 0, u, g);
  EXPECT_FALSE(g.valid(0));
}

TEST(Exchange, SecondWorkerSeesFirstWorkersLastValue) {
  const auto p = partition({8}, 2);
  SpaceTimeVector u(0, 9, 2);
  for (Index i = 0; i < 9; ++i) {
    u.at(i)[0] = 1.0 / (1.0 + static_cast<double>(i));
    u.at(i)[1] = -static_cast<double>(i);
  }
  GhostBuffers g(2, 2);
  exchange_left_boundary(p, 0, u, g);
  ASSERT_TRUE(g.valid(1));
  EXPECT_EQ(g.get(1)[0], u.at(4)[0]);
  EXPECT_EQ(g.get(1)[1], u.at(4)[1]);
  EXPECT_THROW(g.get(0), Error);
}

TEST(Exchange, SkipsEmptyWorkersOnCoarseLevels) {
  const auto p = partition({64, 4}, 16);
  SpaceTimeVector u(1, 5, 1);
  for (Index i = 0; i < 5; ++i) u.at(i)[0] = static_cast<double>(i);
  GhostBuffers g(16, 1);
  exchange_left_boundary(p, 1, u, g);
  for (Index w = 1; w < 16; ++w) {
    const auto r = p.range(1, w);
    if (r.empty()) continue;
    EXPECT_EQ(g.get(w)[0], static_cast<double>(r.begin - 1));
  }
}

TEST(Exchange, FRelaxOnFourWorkersMatchesOneWorkerBitwise) {
  const TemporalHierarchy h(0.0, 1.0, 90, {6});
  const DahlquistPropagator prop(-2.5, 3);
  std::mt19937 rng(2);
  std::normal_distribution<double> d(0.0, 1.0);
  SpaceTimeVector u(0, 91, 3), g(0, 91, 3);
  for (double& v : u.data()) v = d(rng);
  for (double& v : g.data()) v = d(rng);
  SpaceTimeVector a = u, b = u;
  MgritOptions one, four;
  four.num_workers = 4;
  Mgrit m1(h, prop, one), m4(h, prop, four);
  m1.f_relax(0, a, g);
  m4.f_relax(0, b, g);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Reduction, ZerosAndSingleEntry) {
  SpaceTimeVector r(0, 10, 2);
  const auto p = partition({9}, 3);
  auto norm = [&](const TimePartition& part) {
    std::vector<double> partial;
    for (Index w = 0; w < part.num_workers(); ++w) partial.push_back(local_sum_of_squares(r, part.range(0, w)));
    return global_residual_norm(partial);
  };
  EXPECT_EQ(norm(p), 0.0);
  r.at(7)[1] = -3.5;
  EXPECT_EQ(norm(p), 3.5);
}

TEST(Reduction, WorkerCountInvariance) {
  std::mt19937 rng(4);
  std::normal_distribution<double> d(0.0, 1.0);
  SpaceTimeVector r(0, 1001, 4);
  for (double& v : r.data()) v = d(rng);
  auto norm = [&](Index nw) {
    const auto p = partition({1000}, nw);
    std::vector<double> partial;
    for (Index w = 0; w < nw; ++w) partial.push_back(local_sum_of_squares(r, p.range(0, w)));
    return global_residual_norm(partial);
  };
  double direct = 0.0;
  for (double v : r.data()) direct += v * v;
  direct = std::sqrt(direct);
  for (Index nw : {1u, 4u, 7u, 64u}) EXPECT_NEAR(norm(nw), direct, 1e-13 * direct);
}

TEST(WorkerPool, RunsEveryWorkerOnceAndRethrows) {
  for (bool threaded : {false, true}) {
    WorkerPool pool(8, threaded);
    std::vector<std::atomic<int>> hits(8);
    pool.run([&](Index w) { ++hits[w]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(pool.run([](Index w) {
                   if (w == 5) throw Error("boom");
                 }),
                 Error);
  }
}

// ---- work model ----

namespace {

WorkModel two_level_model(Index n, Index m) {
  // One F-relaxation cycle: every fine point once, FAS right-hand side on
  // every coarse point, sequential coarse solve of n/m steps.
  WorkModel wm;
  wm.intervals = {n, n / m};
  wm.per_point = {std::vector<double>(n + 1, 1.0), std::vector<double>(n / m + 1, 1.0)};
  wm.per_point[0][0] = 0.0;
  wm.per_point[1][0] = 0.0;
  wm.sequential_phi = static_cast<double>(n / m);
  return wm;
}

}  // namespace

TEST(SpeedupModel, OneWorkerIsSlowerThanTimeStepping) {
  const auto wm = two_level_model(1024, 16);
  EXPECT_LT(estimate_speedup(wm, 1, 1), 1.0);
}

TEST(SpeedupModel, MatchesHandFormula) {
  // Critical path per cycle: N/P fine + (N/m)/P coarse right-hand side + N/m sequential.
  const Index n = 32768, m = 256, p = 128;
  const auto wm = two_level_model(n, m);
  for (Index k : {1u, 5u, 9u}) {
    const double cycle = static_cast<double>(n) / p + 1.0 + static_cast<double>(n) / m;
    const double expect = static_cast<double>(n) / (static_cast<double>(k) * cycle);
    EXPECT_NEAR(estimate_speedup(wm, p, k), expect, 1e-12 * expect);
  }
}

TEST(SpeedupModel, MonotoneInWorkersOverPowersOfTwo) {
  const auto wm = two_level_model(32768, 256);
  double prev = 0.0;
  for (Index p = 1; p <= 4096; p *= 2) {
    const double s = estimate_speedup(wm, p, 6);
    EXPECT_GE(s, prev - 1e-12) << p;
    EXPECT_LE(critical_path_cost(wm, p), wm.level_total(0) + wm.level_total(1) + wm.sequential_phi);
    prev = s;
  }
}

TEST(SpeedupModel, ZeroIterationsRejected) {
  EXPECT_THROW(estimate_speedup(two_level_model(64, 4), 2, 0), ValidationError);
}

TEST(SpeedupModel, CountsFromRealRunAreNonnegative) {
  const TemporalHierarchy h(0.0, 1.0, 256, {4, 4});
  const DahlquistPropagator prop(-1.0);
  MgritOptions o;
  o.max_iters = 2;
  o.halt_tol = 1e-300;
  Mgrit mg(h, prop, o);
  const std::vector<double> u0{1.0};
  const auto [u, rec] = mg.solve(u0);
  for (const auto& lvl : rec.work.per_point) {
    for (double c : lvl) EXPECT_GE(c, 0.0);
  }
  double total = rec.work.sequential_phi;
  for (Index l = 0; l < 3; ++l) total += rec.work.level_total(l);
  EXPECT_DOUBLE_EQ(total, static_cast<double>(rec.fine_phi.back() + rec.coarse_phi.back()));
}
