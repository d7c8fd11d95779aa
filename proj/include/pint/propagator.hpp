#pragma once

// One-step time propagators and plain sequential time stepping.
//
// A propagator maps the state at t_from to the state at t_from + dt on a
// given level. Level-l propagators are rediscretizations: the same scheme
// with the level's own dt, never a composition of finer steps. Any additive
// forcing g_i is applied after the step, u_i = step(u_{i-1}) + g_i.

#include <concepts>
#include <functional>
#include <span>
#include <string>

#include "pint/error.hpp"
#include "pint/space_time_vector.hpp"
#include "pint/time_hierarchy.hpp"

namespace pint {

template <class P>
concept Propagator = requires(const P& p, Index level, double t_from, double dt,
                              std::span<const double> in, std::span<double> out) {
  { p.state_dim() } -> std::convertible_to<Index>;
  p.step(level, t_from, dt, in, out);
};

/// Adds g(t) into the given buffer. An empty function means zero forcing.
using Forcing = std::function<void(double t, std::span<double> g)>;

/// Backward Euler for u' = lambda * u.
inline double step_dahlquist_backward_euler(double lambda, double dt, double u_in) {
  const double denom = 1.0 - lambda * dt;
  if (denom == 0.0) {
    throw Error("singular backward Euler step: 1 - lambda*dt = 0");
  }
  return u_in / denom;
}

/// Componentwise Dahlquist test problem u' = lambda * u with backward Euler.
class DahlquistPropagator {
 public:
  explicit DahlquistPropagator(double lambda, Index dim = 1) : lambda_(lambda), dim_(dim) {}

  Index state_dim() const noexcept { return dim_; }
  double lambda() const noexcept { return lambda_; }

  void step(Index /*level*/, double /*t_from*/, double dt, std::span<const double> in,
            std::span<double> out) const {
    for (Index k = 0; k < dim_; ++k) out[k] = step_dahlquist_backward_euler(lambda_, dt, in[k]);
  }

 private:
  double lambda_;
  Index dim_;
};

/// Applies `prop` on `level` and rewraps any failure with its location.
template <Propagator P>
void apply_step(const P& prop, Index level, Index index, double t_from, double dt,
                std::span<const double> in, std::span<double> out) {
  try {
    prop.step(level, t_from, dt, in, out);
  } catch (const StepFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StepFailure(level, index, e.what());
  }
}

/// u_0 = u0, u_i = step(u_{i-1}) + g(t_i) on every point of `grid`.
template <Propagator P>
SpaceTimeVector sequential_solve(const P& prop, const TemporalGrid& grid,
                                 std::span<const double> u0, const Forcing& forcing = {}) {
  const Index dim = prop.state_dim();
  if (u0.size() != dim) {
    throw DimensionError("initial state has " + std::to_string(u0.size()) +
                         " entries, propagator expects " + std::to_string(dim));
  }
  SpaceTimeVector u(grid.level, grid.num_points(), dim);
  u.set(0, u0);
  for (Index i = 1; i < grid.num_points(); ++i) {
    apply_step(prop, grid.level, i, grid.time(i - 1), grid.dt, u.at(i - 1), u.at(i));
    if (forcing) forcing(grid.time(i), u.at(i));
  }
  return u;
}

}  // namespace pint
