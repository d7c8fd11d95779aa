#pragma once

// The harness commands: sequential time stepping, an MGRIT solve and a
// comparison of both, each writing CSV files and a JSON summary into the
// configured output directory.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pint/bench/config.hpp"
#include "pint/eddy/materials.hpp"
#include "pint/eddy/mesh.hpp"
#include "pint/eddy/propagator.hpp"
#include "pint/error.hpp"
#include "pint/mgrit.hpp"
#include "pint/parallel_runtime.hpp"
#include "pint/propagator.hpp"
#include "pint/sparse.hpp"
#include "pint/time_hierarchy.hpp"

namespace pint::bench {

enum ExitCode : int { kOk = 0, kValidation = 1, kSolverFailure = 2, kNonConvergence = 3 };

inline TemporalHierarchy make_hierarchy(const RunConfig& c) {
  return TemporalHierarchy(c.t_start, c.t_end, c.num_intervals, c.factors);
}

inline eddy::MaterialMap make_materials(const RunConfig& c) {
  eddy::MaterialMap m;
  m.sigma[static_cast<std::size_t>(eddy::Region::Shield)] = c.materials.sigma_shield;
  if (!c.materials.bh_file.empty()) {
    std::ifstream in(c.materials.bh_file);
    if (!in) throw ValidationError("cannot open B-H table '" + c.materials.bh_file + "'");
    m.reluctivity[static_cast<std::size_t>(eddy::Region::Shield)] =
        std::make_shared<eddy::ReluctivityModel>(
            eddy::ReluctivityModel::from_bh_table(eddy::read_bh_table(in)));
  }
  return c.problem == Problem::EddyLinear ? m.linearized() : m;
}

inline eddy::Mesh2D make_mesh(const RunConfig& c) {
  if (c.mesh.file.empty()) return eddy::generate_coax_mesh(c.mesh.geometry);
  std::ifstream in(c.mesh.file);
  if (!in) throw ValidationError("cannot open mesh file '" + c.mesh.file + "'");
  return eddy::read_mesh(in);
}

inline std::shared_ptr<const eddy::DiscreteSystem> make_system(const RunConfig& c) {
  eddy::PwmSource src = c.source;
  src.r0 = c.mesh.geometry.r0;
  return std::make_shared<const eddy::DiscreteSystem>(make_mesh(c), make_materials(c), src, c.lz);
}

/// Calls fn(propagator, u0) with the configured problem.
template <class Fn>
decltype(auto) with_problem(const RunConfig& c, const TemporalHierarchy& h, Fn&& fn) {
  if (c.problem == Problem::Dahlquist) {
    const DahlquistPropagator prop(c.dahlquist.lambda);
    const std::vector<double> u0{c.dahlquist.u0};
    return fn(prop, u0);
  }
  const eddy::EddyPropagator prop(make_system(c), h, c.newton);
  const std::vector<double> u0(prop.state_dim(), 0.0);
  return fn(prop, u0);
}

struct SequentialResult {
  SpaceTimeVector u;
  std::uint64_t phi_count = 0;
  double wall_seconds = 0.0;
  std::uint64_t factorizations = 0;
};

struct WorkRow {
  Index workers = 0;
  std::vector<double> level_phi;  // per cycle
  double sequential_phi = 0.0;
  double critical_path = 0.0;
  double speedup = 0.0;
};

struct MgritResult {
  SpaceTimeVector u;
  ConvergenceRecord record;
  std::vector<WorkRow> work;
  double wall_seconds = 0.0;
  std::optional<double> discrepancy;  // max-norm difference to sequential stepping
  std::optional<SequentialResult> reference;
  std::uint64_t factorizations = 0;
  Relaxation relaxation = Relaxation::F;
};

namespace detail {

template <class P>
std::uint64_t factorizations_of(const P& prop) {
  if constexpr (requires { prop.factorizations(); }) {
    return prop.factorizations();
  } else {
    return 0;
  }
}

template <class P>
SequentialResult time_step(const P& prop, const TemporalHierarchy& h, std::span<const double> u0) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t f0 = factorizations_of(prop);
  SequentialResult res{sequential_solve(prop, h.grid(0), u0), h.grid(0).num_intervals, 0.0, 0};
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.factorizations = factorizations_of(prop) - f0;
  return res;
}

}  // namespace detail

inline std::vector<WorkRow> work_table(const WorkModel& work, const std::vector<Index>& workers,
                                       Index iterations) {
  std::vector<WorkRow> rows;
  for (Index p : workers) {
    WorkRow row;
    row.workers = p;
    for (Index l = 0; l < work.intervals.size(); ++l) row.level_phi.push_back(work.level_total(l));
    row.sequential_phi = work.sequential_phi;
    row.critical_path = critical_path_cost(work, p);
    row.speedup = estimate_speedup(work, p, std::max<Index>(iterations, 1));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline SequentialResult run_sequential(const RunConfig& c) {
  validate(c);
  const TemporalHierarchy h = make_hierarchy(c);
  return with_problem(c, h, [&](const auto& prop, const std::vector<double>& u0) {
    return detail::time_step(prop, h, u0);
  });
}

inline MgritResult run_mgrit(const RunConfig& c, bool with_reference) {
  validate(c);
  if (c.factors.empty()) throw ValidationError("config: MGRIT needs at least one coarsening factor");
  const TemporalHierarchy h = make_hierarchy(c);
  return with_problem(c, h, [&](const auto& prop, const std::vector<double>& u0) {
    MgritOptions opts;
    opts.relaxation = c.relaxation;
    opts.halt_tol = c.halt_tol;
    opts.max_iters = c.max_iters;
    opts.num_workers = c.num_workers;
    opts.threaded = c.threaded;
    MgritResult res;
    if (with_reference) res.reference = detail::time_step(prop, h, u0);
    using P = std::decay_t<decltype(prop)>;
    Mgrit<P> mg(h, prop, opts);
    res.relaxation = mg.relaxation();
    const std::uint64_t f0 = detail::factorizations_of(prop);
    const auto t0 = std::chrono::steady_clock::now();
    auto [u, rec] = mg.solve(u0);
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.factorizations = detail::factorizations_of(prop) - f0;
    res.u = std::move(u);
    res.record = std::move(rec);
    res.work = work_table(res.record.work, c.work_model_workers, res.record.iterations());
    if (res.reference) res.discrepancy = max_abs_difference(res.u, res.reference->u);
    return res;
  });
}

// ---- output ----

inline std::filesystem::path output_path(const RunConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.output.dir);
  return std::filesystem::path(c.output.dir) / name;
}

inline std::ofstream open_output(const RunConfig& c, const std::string& name) {
  const auto p = output_path(c, name);
  std::ofstream os(p);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  return os;
}

/// Columns: step, t, norm2, norm_max.
inline void write_sequential_csv(std::ostream& os, const SpaceTimeVector& u,
                                 const TemporalGrid& grid) {
  os << "step,t,norm2,norm_max\n" << std::setprecision(17);
  for (Index i = 0; i < u.num_points(); ++i) {
    double s = 0.0, m = 0.0;
    for (double v : u.at(i)) {
      s += v * v;
      m = std::max(m, std::abs(v));
    }
    os << i << ',' << grid.time(i) << ',' << std::sqrt(s) << ',' << m << '\n';
  }
}

/// Columns: workers, level<l>_phi for every level, sequential_phi,
/// critical_path_cost, estimated_speedup. Φ counts are per cycle.
inline void write_work_model_csv(std::ostream& os, const std::vector<WorkRow>& rows) {
  os << "workers";
  const Index levels = rows.empty() ? 0 : rows.front().level_phi.size();
  for (Index l = 0; l < levels; ++l) os << ",level" << l << "_phi";
  os << ",sequential_phi,critical_path_cost,estimated_speedup\n" << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.workers;
    for (double v : r.level_phi) os << ',' << v;
    os << ',' << r.sequential_phi << ',' << r.critical_path << ',' << r.speedup << '\n';
  }
}

inline void write_effective_config(const RunConfig& c) {
  open_output(c, c.output.effective_config) << to_json(c).dump(2) << '\n';
}

inline void export_artifacts(const RunConfig& c) {
  if (!c.is_eddy() || !(c.output.export_mesh || c.output.export_matrices)) return;
  const auto sys = make_system(c);
  if (c.output.export_mesh) {
    auto os = open_output(c, "mesh.txt");
    eddy::write_mesh(os, sys->mesh());
  }
  if (c.output.export_matrices) {
    const double dt = (c.t_end - c.t_start) / static_cast<double>(c.num_intervals);
    const std::vector<double> zero(sys->num_dofs(), 0.0);
    auto mass = open_output(c, "mass.mtx");
    write_matrix_market(mass, sys->mass());
    auto step = open_output(c, "step_matrix.mtx");
    write_matrix_market(step, sys->step_matrix(dt, zero, false));
  }
}

inline nlohmann::json sequential_summary(const RunConfig& c, const SequentialResult& s) {
  const auto& last = s.u.at(s.u.num_points() - 1);
  double m = 0.0;
  for (double v : last) m = std::max(m, std::abs(v));
  nlohmann::json j{{"phi_count", s.phi_count},
                   {"final_norm_max", m},
                   {"wall_seconds", c.output.wall_clock ? s.wall_seconds : 0.0}};
  if (c.problem == Problem::Dahlquist) j["final_value"] = last[0];
  if (c.is_eddy()) j["factorizations"] = s.factorizations;
  return j;
}

inline nlohmann::json mgrit_summary(const RunConfig& c, const MgritResult& r) {
  const auto& rec = r.record;
  nlohmann::json j{{"levels", c.factors.size() + 1},
                   {"relaxation", to_string(r.relaxation)},
                   {"iterations", rec.iterations()},
                   {"converged", rec.converged},
                   {"initial_residual", rec.initial_residual},
                   {"final_residual", rec.residual_norms.empty() ? rec.initial_residual
                                                                  : rec.residual_norms.back()},
                   {"wall_seconds", c.output.wall_clock ? r.wall_seconds : 0.0}};
  if (!rec.fine_phi.empty()) {
    const double nt = static_cast<double>(c.num_intervals);
    j["phi_per_iteration_over_nt"] = {
        {"fine", static_cast<double>(rec.fine_phi.back()) / nt},
        {"coarse", static_cast<double>(rec.coarse_phi.back()) / nt},
        {"total", static_cast<double>(rec.fine_phi.back() + rec.coarse_phi.back()) / nt}};
  }
  if (c.is_eddy()) j["factorizations"] = r.factorizations;
  if (r.discrepancy) j["max_discrepancy"] = *r.discrepancy;
  nlohmann::json speedups = nlohmann::json::object();
  for (const auto& w : r.work) speedups[std::to_string(w.workers)] = w.speedup;
  j["estimated_speedup"] = speedups;
  j["estimated_speedup_at_num_workers"] =
      estimate_speedup(rec.work, c.num_workers, std::max<Index>(rec.iterations(), 1));
  return j;
}

inline void write_mgrit_outputs(const RunConfig& c, MgritResult& r) {
  if (!c.output.wall_clock) {
    r.record.initial_wall_seconds = 0.0;
    for (double& w : r.record.wall_seconds) w = 0.0;
  }
  {
    auto os = open_output(c, c.output.convergence_csv);
    write_convergence_csv(os, r.record);
  }
  {
    auto os = open_output(c, c.output.work_model_csv);
    write_work_model_csv(os, r.work);
  }
}

}  // namespace pint::bench
