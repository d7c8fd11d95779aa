#pragma once

// Multigrid reduction in time with full approximation storage.
//
// On every level the discrete problem is the block lower-bidiagonal system
//   u_0 = u0,   u_i - step(u_{i-1}) = g_i,   i = 1..N.
// A cycle relaxes (F or FCF), forms the C-point residual, injects state and
// residual onto the next level, solves the FAS coarse problem recursively
// (sequential time stepping on the coarsest level), corrects the C-points
// and F-relaxes. Two levels with F-relaxation is Parareal.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "pint/error.hpp"
#include "pint/parallel_runtime.hpp"
#include "pint/propagator.hpp"
#include "pint/space_time_vector.hpp"
#include "pint/time_hierarchy.hpp"

namespace pint {

enum class Relaxation { F, FCF };

inline const char* to_string(Relaxation r) { return r == Relaxation::F ? "F" : "FCF"; }

struct MgritOptions {
  /// Unset selects F for two levels and FCF for deeper hierarchies.
  std::optional<Relaxation> relaxation;
  double halt_tol = 1e-8;
  Index max_iters = 50;
  Index num_workers = 1;
  bool threaded = true;
};

struct ConvergenceRecord {
  // Residual of the relaxed initial guess, before the first cycle.
  double initial_residual = 0.0;
  std::uint64_t initial_fine_phi = 0;
  std::uint64_t initial_coarse_phi = 0;
  double initial_wall_seconds = 0.0;

  std::vector<double> residual_norms;
  std::vector<std::uint64_t> fine_phi;
  std::vector<std::uint64_t> coarse_phi;
  std::vector<double> wall_seconds;
  bool converged = false;

  /// Per-cycle counted work of the last iteration.
  WorkModel work;

  Index iterations() const noexcept { return residual_norms.size(); }
};

/// Columns: iteration, residual_norm, fine_phi_count, coarse_phi_count,
/// wall_seconds. Row 0 is the relaxed initial guess.
inline void write_convergence_csv(std::ostream& os, const ConvergenceRecord& rec) {
  os << "iteration,residual_norm,fine_phi_count,coarse_phi_count,wall_seconds\n";
  os << std::setprecision(17);
  os << 0 << ',' << rec.initial_residual << ',' << rec.initial_fine_phi << ','
     << rec.initial_coarse_phi << ',' << rec.initial_wall_seconds << '\n';
  for (Index k = 0; k < rec.iterations(); ++k) {
    os << k + 1 << ',' << rec.residual_norms[k] << ',' << rec.fine_phi[k] << ','
       << rec.coarse_phi[k] << ',' << rec.wall_seconds[k] << '\n';
  }
}

/// Injection: coarse point j takes the fine value at j * m.
inline SpaceTimeVector restrict_injection(const SpaceTimeVector& fine, Index m) {
  if (m == 0 || fine.num_intervals() % m != 0) {
    throw ValidationError("injection factor " + std::to_string(m) + " does not divide " +
                          std::to_string(fine.num_intervals()) + " intervals");
  }
  const Index nc = fine.num_intervals() / m;
  SpaceTimeVector coarse(fine.level() + 1, nc + 1, fine.dim());
  for (Index j = 0; j <= nc; ++j) coarse.set(j, fine.at(j * m));
  return coarse;
}

template <Propagator P>
class Mgrit {
 public:
  Mgrit(const TemporalHierarchy& hierarchy, const P& prop, MgritOptions options = {})
      : hierarchy_(hierarchy),
        prop_(prop),
        options_(options),
        partition_(hierarchy, options.num_workers),
        pool_(options.num_workers, options.threaded),
        counter_(points_per_level(hierarchy)) {
    if (!(options_.halt_tol > 0.0)) throw ValidationError("halt_tol must be positive");
    if (options_.max_iters < 1) throw ValidationError("max_iters must be at least 1");
    if (!options_.relaxation) {
      options_.relaxation = hierarchy.num_levels() <= 2 ? Relaxation::F : Relaxation::FCF;
    }
  }

  const TemporalHierarchy& hierarchy() const noexcept { return hierarchy_; }
  const TimePartition& time_partition() const noexcept { return partition_; }
  const PhiCounter& counter() const noexcept { return counter_; }
  Relaxation relaxation() const noexcept { return *options_.relaxation; }
  Index dim() const { return prop_.state_dim(); }

  /// C-point spacing on `level`; every point is a C-point on the coarsest.
  Index coarsening(Index level) const {
    return level < hierarchy_.coarsest() ? hierarchy_.factor(level) : 1;
  }

  /// Propagates every F-interval from its left C-point; C-points unchanged.
  void f_relax(Index level, SpaceTimeVector& u, const SpaceTimeVector& g) {
    const Index m = coarsening(level);
    const TemporalGrid& grid = hierarchy_.grid(level);
    const Index nw = partition_.num_workers();

    // Rounds in which each worker's leading partial interval becomes
    // computable; 0 when the worker's range starts at a C-point.
    std::vector<Index> round(nw, 0);
    Index last_round = 0;
    for (Index w = 0; w < nw; ++w) {
      const IndexRange r = partition_.range(level, w);
      if (r.empty() || r.begin % m == 0) continue;
      const Index prev = r.begin - 1;
      const Index src = *partition_.left_neighbor(level, w);
      const Index interval_start = prev / m * m;
      if (prev % m == 0 || interval_start >= partition_.range(level, src).begin) {
        round[w] = 1;
      } else {
        round[w] = round[src] + 1;
      }
      last_round = std::max(last_round, round[w]);
    }

    GhostBuffers ghosts(nw, dim());
    pool_.run([&](Index w) {
      const IndexRange r = partition_.range(level, w);
      if (r.empty()) return;
      const Index first_c = (r.begin + m - 1) / m * m;
      for (Index c = first_c; c < r.end; c += m) {
        for (Index i = c + 1; i < std::min(c + m, r.end); ++i) {
          step_into(level, grid, i, u.at(i - 1), u, g);
        }
      }
    });
    for (Index k = 1; k <= last_round; ++k) {
      std::vector<Index> active;
      for (Index w = 0; w < nw; ++w) {
        if (round[w] == k) active.push_back(w);
      }
      exchange_left_boundary(partition_, level, u, ghosts, active);
      pool_.run([&](Index w) {
        if (round[w] != k) return;
        const IndexRange r = partition_.range(level, w);
        const Index stop = std::min((r.begin + m - 1) / m * m, r.end);
        step_into(level, grid, r.begin, ghosts.get(w), u, g);
        for (Index i = r.begin + 1; i < stop; ++i) step_into(level, grid, i, u.at(i - 1), u, g);
      });
    }
  }

  /// Updates every C-point i > 0 from its preceding point; F-points unchanged.
  void c_relax(Index level, SpaceTimeVector& u, const SpaceTimeVector& g) {
    const Index m = coarsening(level);
    const TemporalGrid& grid = hierarchy_.grid(level);
    GhostBuffers ghosts(partition_.num_workers(), dim());
    exchange_left_boundary(partition_, level, u, ghosts);
    pool_.run([&](Index w) {
      const IndexRange r = partition_.range(level, w);
      for (Index c = (r.begin + m - 1) / m * m; c < r.end; c += m) {
        if (c == 0) continue;
        step_into(level, grid, c, c == r.begin ? ghosts.get(w) : u.at(c - 1), u, g);
      }
    });
  }

  /// r_i = g_i - u_i + step(u_{i-1}) at C-points i > 0; zero elsewhere.
  SpaceTimeVector residual(Index level, const SpaceTimeVector& u, const SpaceTimeVector& g) {
    const Index m = coarsening(level);
    const TemporalGrid& grid = hierarchy_.grid(level);
    SpaceTimeVector r(level, u.num_points(), dim());
    GhostBuffers ghosts(partition_.num_workers(), dim());
    exchange_left_boundary(partition_, level, u, ghosts);
    pool_.run([&](Index w) {
      const IndexRange range = partition_.range(level, w);
      State phi(dim());
      for (Index c = (range.begin + m - 1) / m * m; c < range.end; c += m) {
        if (c == 0) continue;
        auto in = c == range.begin ? ghosts.get(w) : u.at(c - 1);
        apply_step(prop_, level, c, grid.time(c - 1), grid.dt, in, phi);
        counter_.add(level, c);
        auto rc = r.at(c);
        auto uc = u.at(c);
        auto gc = g.at(c);
        for (Index k = 0; k < rc.size(); ++k) rc[k] = gc[k] - uc[k] + phi[k];
      }
    });
    return r;
  }

  /// Euclidean norm over all points, reduced from per-worker partial sums.
  double residual_norm(Index level, const SpaceTimeVector& r) const {
    std::vector<double> partial(partition_.num_workers(), 0.0);
    pool_.run([&](Index w) { partial[w] = local_sum_of_squares(r, partition_.range(level, w)); });
    return global_residual_norm(partial);
  }

  /// Coarse right-hand side g_j = R_j + v_j - step_c(v_{j-1}), g_0 = v_0, so
  /// that the coarse equation is solved by v itself when R vanishes.
  SpaceTimeVector fas_coarse_equation(Index coarse_level, const SpaceTimeVector& v,
                                      const SpaceTimeVector& restricted_residual) {
    const TemporalGrid& grid = hierarchy_.grid(coarse_level);
    SpaceTimeVector ghat(coarse_level, v.num_points(), dim());
    ghat.set(0, v.at(0));
    GhostBuffers ghosts(partition_.num_workers(), dim());
    exchange_left_boundary(partition_, coarse_level, v, ghosts);
    pool_.run([&](Index w) {
      const IndexRange r = partition_.range(coarse_level, w);
      State phi(dim());
      for (Index j = std::max<Index>(r.begin, 1); j < r.end; ++j) {
        auto in = j == r.begin ? ghosts.get(w) : v.at(j - 1);
        apply_step(prop_, coarse_level, j, grid.time(j - 1), grid.dt, in, phi);
        counter_.add(coarse_level, j);
        auto gj = ghat.at(j);
        auto vj = v.at(j);
        auto rj = restricted_residual.at(j);
        for (Index k = 0; k < gj.size(); ++k) gj[k] = rj[k] + vj[k] - phi[k];
      }
    });
    return ghat;
  }

  /// Sequential forward solve of one level; replicated work, counted once.
  void solve_level_sequentially(Index level, SpaceTimeVector& u, const SpaceTimeVector& g) {
    const TemporalGrid& grid = hierarchy_.grid(level);
    for (Index i = 1; i < u.num_points(); ++i) {
      apply_step(prop_, level, i, grid.time(i - 1), grid.dt, u.at(i - 1), u.at(i));
      add_into(u.at(i), g.at(i));
    }
    counter_.add_sequential(u.num_intervals());
  }

  void relax(Index level, SpaceTimeVector& u, const SpaceTimeVector& g) {
    f_relax(level, u, g);
    if (*options_.relaxation == Relaxation::FCF) {
      c_relax(level, u, g);
      f_relax(level, u, g);
    }
  }

  /// One V-cycle on `level`, ending with F-relaxation.
  void v_cycle(Index level, SpaceTimeVector& u, const SpaceTimeVector& g) {
    if (level == hierarchy_.coarsest()) {
      solve_level_sequentially(level, u, g);
      return;
    }
    relax(level, u, g);
    SpaceTimeVector r = residual(level, u, g);
    coarse_correction(level, u, r);
    f_relax(level, u, g);
  }

  /// Iterates cycles from the constant initial guess u0 until the fine-level
  /// C-point residual norm drops below halt_tol or max_iters is reached.
  /// The returned solution has been F-relaxed.
  std::pair<SpaceTimeVector, ConvergenceRecord> solve(std::span<const double> u0,
                                                      const Forcing& forcing = {}) {
    using Clock = std::chrono::steady_clock;
    if (u0.size() != dim()) {
      throw DimensionError("initial state has " + std::to_string(u0.size()) +
                           " entries, propagator expects " + std::to_string(dim()));
    }
    const TemporalGrid& fine = hierarchy_.grid(0);
    SpaceTimeVector u(0, fine.num_points(), dim());
    u.fill(u0);
    SpaceTimeVector g(0, fine.num_points(), dim());
    if (forcing) {
      for (Index i = 1; i < fine.num_points(); ++i) forcing(fine.time(i), g.at(i));
    }

    ConvergenceRecord rec;
    if (hierarchy_.num_levels() == 1) {
      const auto t0 = Clock::now();
      solve_level_sequentially(0, u, g);
      rec.residual_norms.push_back(0.0);
      rec.fine_phi.push_back(counter_.sequential());
      rec.coarse_phi.push_back(0);
      rec.wall_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
      rec.converged = true;
      return {std::move(u), std::move(rec)};
    }

    auto fine_count = [&] { return counter_.level_total(0); };
    auto coarse_count = [&] {
      std::uint64_t s = counter_.sequential();
      for (Index l = 1; l < hierarchy_.num_levels(); ++l) s += counter_.level_total(l);
      return s;
    };

    auto t0 = Clock::now();
    relax(0, u, g);
    SpaceTimeVector r = residual(0, u, g);
    rec.initial_residual = residual_norm(0, r);
    rec.initial_fine_phi = fine_count();
    rec.initial_coarse_phi = coarse_count();
    rec.initial_wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

    const auto intervals = TimePartition::intervals_of(hierarchy_);
    for (Index k = 0; k < options_.max_iters; ++k) {
      t0 = Clock::now();
      const PhiCounter before = counter_;
      coarse_correction(0, u, r);
      relax(0, u, g);
      r = residual(0, u, g);
      const double norm = residual_norm(0, r);
      rec.work = make_work_model(intervals, before, counter_);
      rec.residual_norms.push_back(norm);
      rec.fine_phi.push_back(counter_.level_total(0) - before.level_total(0));
      std::uint64_t coarse_before = before.sequential();
      for (Index l = 1; l < hierarchy_.num_levels(); ++l) coarse_before += before.level_total(l);
      rec.coarse_phi.push_back(coarse_count() - coarse_before);
      rec.wall_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
      if (norm < options_.halt_tol) {
        rec.converged = true;
        break;
      }
    }
    return {std::move(u), std::move(rec)};
  }

 private:
  static std::vector<Index> points_per_level(const TemporalHierarchy& h) {
    std::vector<Index> n;
    for (const auto& grid : h.grids()) n.push_back(grid.num_points());
    return n;
  }

  static void add_into(std::span<double> x, std::span<const double> y) {
    for (Index k = 0; k < x.size(); ++k) x[k] += y[k];
  }

  void step_into(Index level, const TemporalGrid& grid, Index i, std::span<const double> in,
                 SpaceTimeVector& u, const SpaceTimeVector& g) {
    apply_step(prop_, level, i, grid.time(i - 1), grid.dt, in, u.at(i));
    add_into(u.at(i), g.at(i));
    counter_.add(level, i);
  }

  /// Restrict, solve the FAS coarse problem, and correct the C-points of u.
  void coarse_correction(Index level, SpaceTimeVector& u, const SpaceTimeVector& r) {
    const Index m = hierarchy_.factor(level);
    const SpaceTimeVector v = restrict_injection(u, m);
    const SpaceTimeVector rc = restrict_injection(r, m);
    const SpaceTimeVector ghat = fas_coarse_equation(level + 1, v, rc);
    SpaceTimeVector w = v;
    v_cycle(level + 1, w, ghat);
    pool_.run([&](Index worker) {
      const IndexRange range = partition_.range(level + 1, worker);
      for (Index j = std::max<Index>(range.begin, 1); j < range.end; ++j) {
        auto uc = u.at(j * m);
        auto wj = w.at(j);
        auto vj = v.at(j);
        for (Index k = 0; k < uc.size(); ++k) uc[k] += wj[k] - vj[k];
      }
    });
  }

  const TemporalHierarchy& hierarchy_;
  const P& prop_;
  MgritOptions options_;
  TimePartition partition_;
  WorkerPool pool_;
  PhiCounter counter_;
};

/// One Parareal update U_{j+1} <- G(U'_j) + F(U_j) - G(U_j) on the first
/// coarsening of `hierarchy`. F composes m fine steps (with the fine forcing),
/// G is one coarse step. The F and G evaluations on the old iterate run
/// concurrently across coarse intervals.
template <Propagator P>
std::vector<State> parareal_iterate(const P& prop, const TemporalHierarchy& hierarchy,
                                    const std::vector<State>& U, const Forcing& forcing = {},
                                    Index num_workers = 1) {
  const TemporalGrid& fine = hierarchy.grid(0);
  const TemporalGrid& coarse = hierarchy.grid(1);
  const Index m = hierarchy.factor(0);
  const Index nc = coarse.num_intervals;
  if (U.size() != nc + 1) {
    throw DimensionError("Parareal iterate has " + std::to_string(U.size()) +
                         " coarse points, expected " + std::to_string(nc + 1));
  }
  const Index dim = prop.state_dim();

  std::vector<State> fine_prop(nc + 1, State(dim)), coarse_prop(nc + 1, State(dim));
  const TimePartition part({coarse.num_intervals}, num_workers);
  WorkerPool pool(num_workers);
  pool.run([&](Index w) {
    const IndexRange r = part.range(0, w);
    State a(dim), b(dim);
    for (Index j = std::max<Index>(r.begin, 1); j < r.end; ++j) {
      // Interval j spans fine points (j-1)m .. jm.
      a = U[j - 1];
      for (Index s = 1; s <= m; ++s) {
        const Index i = (j - 1) * m + s;
        apply_step(prop, 0, i, fine.time(i - 1), fine.dt, a, b);
        if (forcing) {
          State gi(dim, 0.0);
          forcing(fine.time(i), gi);
          for (Index k = 0; k < dim; ++k) b[k] += gi[k];
        }
        std::swap(a, b);
      }
      fine_prop[j] = a;
      apply_step(prop, 1, j, coarse.time(j - 1), coarse.dt, U[j - 1], coarse_prop[j]);
    }
  });

  std::vector<State> next(nc + 1, State(dim));
  next[0] = U[0];
  State gnew(dim);
  for (Index j = 1; j <= nc; ++j) {
    apply_step(prop, 1, j, coarse.time(j - 1), coarse.dt, next[j - 1], gnew);
    for (Index k = 0; k < dim; ++k) next[j][k] = gnew[k] + (fine_prop[j][k] - coarse_prop[j][k]);
  }
  return next;
}

}  // namespace pint
