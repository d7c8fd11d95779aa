#pragma once

// Semi-discrete eddy-current problem M u' + K_nu(u) u = j_s(t) with u = 0 on
// the outer boundary, and its backward Euler time step.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "pint/eddy/assembly.hpp"
#include "pint/eddy/materials.hpp"
#include "pint/eddy/mesh.hpp"
#include "pint/eddy/pwm.hpp"
#include "pint/error.hpp"
#include "pint/sparse.hpp"
#include "pint/time_hierarchy.hpp"

namespace pint::eddy {

class DiscreteSystem {
 public:
  DiscreteSystem(Mesh2D mesh, MaterialMap materials, PwmSource source, double lz = 1.0)
      : mesh_(std::make_shared<const Mesh2D>(std::move(mesh))),
        materials_(std::move(materials)),
        source_(source),
        lz_(lz),
        assembler_(std::make_shared<const P1Assembler>(*mesh_)) {
    if (!(lz > 0.0)) throw ValidationError("lz must be positive");
    materials_.validate();
    source_.validate();
    mass_ = assembler_->mass(materials_, lz_);
    dirichlet_.assign(mesh_->num_nodes(), false);
    for (auto b : mesh_->boundary) dirichlet_[b] = true;
    ordering_ = reverse_cuthill_mckee(assembler_->zero());
  }

  const Mesh2D& mesh() const noexcept { return *mesh_; }
  const MaterialMap& materials() const noexcept { return materials_; }
  const PwmSource& source_params() const noexcept { return source_; }
  const P1Assembler& assembler() const noexcept { return *assembler_; }
  double lz() const noexcept { return lz_; }
  std::size_t num_dofs() const noexcept { return mesh_->num_nodes(); }
  bool is_linear() const { return materials_.is_linear(); }

  /// M_sigma before boundary conditions.
  const SparseMatrix& mass() const noexcept { return mass_; }
  SparseMatrix stiffness(std::span<const double> u) const {
    return assembler_->stiffness(materials_, u, lz_);
  }
  std::vector<double> source(double t) const { return assembler_->source(source_, t, lz_); }
  bool is_dirichlet(std::size_t i) const { return dirichlet_[i]; }
  const std::vector<bool>& dirichlet() const noexcept { return dirichlet_; }
  /// Fill-reducing ordering shared by every step matrix (same pattern).
  std::span<const std::size_t> ordering() const noexcept { return ordering_; }

  /// Backward Euler residual on free nodes:
  /// M (u - u_prev) / dt + K_nu(u) u - j; equals u on boundary nodes.
  std::vector<double> step_residual(double dt, std::span<const double> u,
                                    std::span<const double> u_prev,
                                    std::span<const double> j) const {
    std::vector<double> du(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) du[i] = (u[i] - u_prev[i]) / dt;
    std::vector<double> r = spmv(mass_, du);
    const std::vector<double> ku = assembler_->apply_stiffness(materials_, u, lz_);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = dirichlet_[i] ? u[i] : r[i] + ku[i] - j[i];
    }
    return r;
  }

  /// M / dt + (tangent) stiffness with boundary rows and columns replaced by
  /// the identity, which keeps the matrix symmetric.
  SparseMatrix step_matrix(double dt, std::span<const double> u, bool tangent) const {
    SparseMatrix k = tangent ? assembler_->tangent_stiffness(materials_, u, lz_)
                             : assembler_->stiffness(materials_, u, lz_);
    SparseMatrix a = add(1.0 / dt, mass_, 1.0, k);
    apply_dirichlet(a);
    return a;
  }

  void apply_dirichlet(SparseMatrix& a) const {
    auto rp = a.row_ptr();
    auto c = a.cols();
    auto v = a.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
        if (dirichlet_[i] || dirichlet_[c[k]]) v[k] = (i == c[k]) ? 1.0 : 0.0;
      }
    }
  }

 private:
  std::shared_ptr<const Mesh2D> mesh_;
  MaterialMap materials_;
  PwmSource source_;
  double lz_;
  std::shared_ptr<const P1Assembler> assembler_;
  SparseMatrix mass_;
  std::vector<bool> dirichlet_;
  std::vector<std::size_t> ordering_;
};

enum class NonlinearMethod { Newton, Picard };

struct NewtonOptions {
  NonlinearMethod method = NonlinearMethod::Newton;
  double rel_tol = 1e-10;
  int max_iters = 20;
  int max_line_search = 12;  // step halvings per iteration
};

struct StepStats {
  int iterations = 0;
  int factorizations = 0;
  double relative_residual = 0.0;
};

/// Solves (M/dt) (u - u_prev) + K_nu(u) u = j_s(t_new), u = 0 on the boundary.
/// Newton uses the tangent stiffness; Picard freezes nu at the current
/// iterate. The residual is measured relative to the larger of the right-hand
/// side M u_prev / dt + j_s and the initial residual.
inline std::vector<double> backward_euler_step(const DiscreteSystem& sys, double dt, double t_new,
                                               std::span<const double> u_prev,
                                               const NewtonOptions& opts = {},
                                               StepStats* stats = nullptr) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  if (u_prev.size() != sys.num_dofs()) {
    throw DimensionError("state has " + std::to_string(u_prev.size()) + " entries, system has " +
                         std::to_string(sys.num_dofs()) + " dofs");
  }
  auto norm = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
  };
  const std::vector<double> j = sys.source(t_new);
  std::vector<double> rhs = spmv(sys.mass(), u_prev);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    rhs[i] = sys.is_dirichlet(i) ? 0.0 : rhs[i] / dt + j[i];
  }

  std::vector<double> u(u_prev.begin(), u_prev.end());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (sys.is_dirichlet(i)) u[i] = 0.0;
  }
  std::vector<double> r = sys.step_residual(dt, u, u_prev, j);
  const double scale = std::max(norm(rhs), norm(r));
  StepStats st;
  double rel = scale > 0.0 ? norm(r) / scale : 0.0;
  while (rel > opts.rel_tol) {
    if (st.iterations == opts.max_iters) {
      if (stats) *stats = st;
      throw NewtonFailure(st.iterations, rel);
    }
    const bool tangent = opts.method == NonlinearMethod::Newton;
    const Factorization f = factorize(sys.step_matrix(dt, u, tangent), sys.ordering());
    ++st.factorizations;
    const std::vector<double> delta = f.solve(r);
    ++st.iterations;
    // Backtracking on the residual norm; saturation can make full steps overshoot.
    // Picard steps are not descent directions and are always taken in full.
    const int max_halvings = tangent ? opts.max_line_search : 0;
    std::vector<double> trial(u.size());
    double alpha = 1.0;
    for (int halvings = 0;; ++halvings) {
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] - alpha * delta[i];
      std::vector<double> rt = sys.step_residual(dt, trial, u_prev, j);
      const double rel_trial = norm(rt) / scale;
      if (rel_trial <= (1.0 - 1e-4 * alpha) * rel || halvings == max_halvings) {
        u.swap(trial);
        r.swap(rt);
        rel = rel_trial;
        break;
      }
      alpha *= 0.5;
    }
  }
  st.relative_residual = rel;
  if (stats) *stats = st;
  return u;
}

/// Backward Euler propagator on the levels of a hierarchy; level l steps
/// with its own dt (a rediscretization, not a composition of fine steps).
/// Linear systems reuse one factorization per level, built up front.
class EddyPropagator {
 public:
  EddyPropagator(std::shared_ptr<const DiscreteSystem> system, const TemporalHierarchy& hierarchy,
                 NewtonOptions newton = {})
      : system_(std::move(system)), newton_(newton), steps_(hierarchy.num_levels()) {
    for (const auto& g : hierarchy.grids()) level_dt_.push_back(g.dt);
    if (system_->is_linear()) {
      const std::vector<double> zero(system_->num_dofs(), 0.0);
      for (double dt : level_dt_) {
        factors_.push_back(factorize(system_->step_matrix(dt, zero, false), system_->ordering()));
        ++factorizations_;
      }
    }
    for (auto& s : steps_) s = 0;
  }

  Index state_dim() const noexcept { return system_->num_dofs(); }
  const DiscreteSystem& system() const noexcept { return *system_; }

  void step(Index level, double t_from, double dt, std::span<const double> in,
            std::span<double> out) const {
    ++steps_.at(level);
    const double t_new = t_from + dt;
    if (system_->is_linear() && level < factors_.size() && dt == level_dt_[level]) {
      const DiscreteSystem& sys = *system_;
      const std::vector<double> j = sys.source(t_new);
      std::vector<double> rhs = spmv(sys.mass(), in);
      for (std::size_t i = 0; i < rhs.size(); ++i) {
        rhs[i] = sys.is_dirichlet(i) ? 0.0 : rhs[i] / dt + j[i];
      }
      const std::vector<double> u = factors_[level].solve(rhs);
      std::copy(u.begin(), u.end(), out.begin());
      return;
    }
    StepStats st;
    const std::vector<double> u = backward_euler_step(*system_, dt, t_new, in, newton_, &st);
    factorizations_ += static_cast<std::uint64_t>(st.factorizations);
    std::copy(u.begin(), u.end(), out.begin());
  }

  /// Step calls made on `level` so far.
  std::uint64_t steps_taken(Index level) const { return steps_.at(level).load(); }
  std::uint64_t factorizations() const { return factorizations_.load(); }

 private:
  std::shared_ptr<const DiscreteSystem> system_;
  NewtonOptions newton_;
  std::vector<double> level_dt_;
  std::vector<Factorization> factors_;
  mutable std::vector<std::atomic<std::uint64_t>> steps_;
  mutable std::atomic<std::uint64_t> factorizations_{0};
};

inline EddyPropagator make_propagator(std::shared_ptr<const DiscreteSystem> system,
                                      const TemporalHierarchy& hierarchy,
                                      NewtonOptions newton = {}) {
  return EddyPropagator(std::move(system), hierarchy, newton);
}

}  // namespace pint::eddy
