#pragma once

// Run configuration of the benchmark harness. Every field has a default; a
// JSON document overrides any subset. Unknown keys are rejected so typos do
// not silently fall back to defaults.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pint/eddy/mesh.hpp"
#include "pint/eddy/pwm.hpp"
#include "pint/eddy/propagator.hpp"
#include "pint/error.hpp"
#include "pint/mgrit.hpp"
#include "pint/time_hierarchy.hpp"

namespace pint::bench {

using nlohmann::json;

enum class Problem { Dahlquist, EddyLinear, EddyNonlinear };

inline std::string to_string(Problem p) {
  switch (p) {
    case Problem::Dahlquist: return "dahlquist";
    case Problem::EddyLinear: return "eddy-linear";
    case Problem::EddyNonlinear: return "eddy-nonlinear";
  }
  return "?";
}

struct DahlquistParams {
  double lambda = -1.0;
  double u0 = 1.0;
};

struct MeshParams {
  std::string file;  // read instead of generating when non-empty
  eddy::CoaxGeometry geometry;
};

struct MaterialParams {
  double sigma_shield = 1.0e7;
  std::string bh_file;  // built-in steel curve when empty
};

struct OutputParams {
  std::string dir = ".";
  std::string convergence_csv = "convergence.csv";
  std::string work_model_csv = "work_model.csv";
  std::string sequential_csv = "sequential.csv";
  std::string summary_json = "summary.json";
  std::string effective_config = "effective_config.json";
  bool wall_clock = true;  // false writes 0 into wall_seconds for byte-stable CSVs
  bool export_mesh = false;
  bool export_matrices = false;
};

struct RunConfig {
  Problem problem = Problem::EddyNonlinear;
  double t_start = 0.0;
  double t_end = 0.2;
  Index num_intervals = 32768;
  std::vector<Index> factors{256};
  std::optional<Relaxation> relaxation;  // "auto" when unset
  double halt_tol = 1e-8;
  Index max_iters = 50;
  Index num_workers = 1;
  bool threaded = true;
  bool reference = true;  // run-mgrit also time-steps sequentially and reports the discrepancy
  std::vector<Index> work_model_workers{1, 2, 4, 8, 16, 32, 64, 128, 256};
  std::int64_t seed = 0;
  DahlquistParams dahlquist;
  MeshParams mesh;
  MaterialParams materials;
  eddy::PwmSource source;
  eddy::NewtonOptions newton;
  double lz = 1.0;
  OutputParams output;

  bool is_eddy() const noexcept { return problem != Problem::Dahlquist; }
};

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ValidationError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: bad value for '" + (where.empty() ? "" : where + ".") + key +
                          "': " + j.at(key).dump());
  }
}

}  // namespace detail

inline Problem parse_problem(const std::string& s) {
  if (s == "dahlquist") return Problem::Dahlquist;
  if (s == "eddy-linear") return Problem::EddyLinear;
  if (s == "eddy-nonlinear") return Problem::EddyNonlinear;
  throw ValidationError("config: problem must be dahlquist, eddy-linear or eddy-nonlinear, got '" +
                        s + "'");
}

inline std::optional<Relaxation> parse_relaxation(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "F") return Relaxation::F;
  if (s == "FCF") return Relaxation::FCF;
  throw ValidationError("config: relaxation must be auto, F or FCF, got '" + s + "'");
}

inline json to_json(const RunConfig& c) {
  const auto& g = c.mesh.geometry;
  return json{
      {"problem", to_string(c.problem)},
      {"t_start", c.t_start},
      {"t_end", c.t_end},
      {"num_intervals", c.num_intervals},
      {"factors", c.factors},
      {"relaxation", c.relaxation ? to_string(*c.relaxation) : "auto"},
      {"halt_tol", c.halt_tol},
      {"max_iters", c.max_iters},
      {"num_workers", c.num_workers},
      {"threaded", c.threaded},
      {"reference", c.reference},
      {"work_model_workers", c.work_model_workers},
      {"seed", c.seed},
      {"dahlquist", {{"lambda", c.dahlquist.lambda}, {"u0", c.dahlquist.u0}}},
      {"mesh",
       {{"file", c.mesh.file},
        {"r0", g.r0},
        {"r1", g.r1},
        {"r2", g.r2},
        {"radial_layers", g.radial_layers},
        {"angular_divisions", g.angular_divisions}}},
      {"materials", {{"sigma_shield", c.materials.sigma_shield}, {"bh_file", c.materials.bh_file}}},
      {"source",
       {{"period", c.source.period},
        {"teeth", c.source.teeth},
        {"amplitude", c.source.amplitude},
        {"waveform", c.source.waveform == eddy::Waveform::Pwm ? "pwm" : "sine"}}},
      {"newton",
       {{"method", c.newton.method == eddy::NonlinearMethod::Newton ? "newton" : "picard"},
        {"rel_tol", c.newton.rel_tol},
        {"max_iters", c.newton.max_iters},
        {"max_line_search", c.newton.max_line_search}}},
      {"lz", c.lz},
      {"output",
       {{"dir", c.output.dir},
        {"convergence_csv", c.output.convergence_csv},
        {"work_model_csv", c.output.work_model_csv},
        {"sequential_csv", c.output.sequential_csv},
        {"summary_json", c.output.summary_json},
        {"effective_config", c.output.effective_config},
        {"wall_clock", c.output.wall_clock},
        {"export_mesh", c.output.export_mesh},
        {"export_matrices", c.output.export_matrices}}},
  };
}

/// Overlays `j` on the defaults. Throws ValidationError on unknown keys or
/// mistyped values; range checks are left to validate().
inline RunConfig from_json(const json& j) {
  using detail::read;
  using detail::reject_unknown;
  RunConfig c;
  reject_unknown(j,
                 {"problem", "t_start", "t_end", "num_intervals", "factors", "relaxation", "halt_tol",
                  "max_iters", "num_workers", "threaded", "reference", "work_model_workers", "seed",
                  "dahlquist", "mesh", "materials", "source", "newton", "lz", "output"},
                 "");
  std::string s;
  if (j.contains("problem")) {
    read(j, "problem", s, "");
    c.problem = parse_problem(s);
  }
  read(j, "t_start", c.t_start, "");
  read(j, "t_end", c.t_end, "");
  read(j, "num_intervals", c.num_intervals, "");
  read(j, "factors", c.factors, "");
  if (j.contains("relaxation")) {
    read(j, "relaxation", s, "");
    c.relaxation = parse_relaxation(s);
  }
  read(j, "halt_tol", c.halt_tol, "");
  read(j, "max_iters", c.max_iters, "");
  read(j, "num_workers", c.num_workers, "");
  read(j, "threaded", c.threaded, "");
  read(j, "reference", c.reference, "");
  read(j, "work_model_workers", c.work_model_workers, "");
  read(j, "seed", c.seed, "");
  read(j, "lz", c.lz, "");

  if (j.contains("dahlquist")) {
    const json& d = j.at("dahlquist");
    reject_unknown(d, {"lambda", "u0"}, "dahlquist");
    read(d, "lambda", c.dahlquist.lambda, "dahlquist");
    read(d, "u0", c.dahlquist.u0, "dahlquist");
  }
  if (j.contains("mesh")) {
    const json& m = j.at("mesh");
    reject_unknown(m, {"file", "r0", "r1", "r2", "radial_layers", "angular_divisions"}, "mesh");
    auto& g = c.mesh.geometry;
    read(m, "file", c.mesh.file, "mesh");
    read(m, "r0", g.r0, "mesh");
    read(m, "r1", g.r1, "mesh");
    read(m, "r2", g.r2, "mesh");
    read(m, "radial_layers", g.radial_layers, "mesh");
    read(m, "angular_divisions", g.angular_divisions, "mesh");
  }
  if (j.contains("materials")) {
    const json& m = j.at("materials");
    reject_unknown(m, {"sigma_shield", "bh_file"}, "materials");
    read(m, "sigma_shield", c.materials.sigma_shield, "materials");
    read(m, "bh_file", c.materials.bh_file, "materials");
  }
  if (j.contains("source")) {
    const json& m = j.at("source");
    reject_unknown(m, {"period", "teeth", "amplitude", "waveform"}, "source");
    read(m, "period", c.source.period, "source");
    read(m, "teeth", c.source.teeth, "source");
    read(m, "amplitude", c.source.amplitude, "source");
    if (m.contains("waveform")) {
      read(m, "waveform", s, "source");
      if (s == "pwm") {
        c.source.waveform = eddy::Waveform::Pwm;
      } else if (s == "sine") {
        c.source.waveform = eddy::Waveform::Sine;
      } else {
        throw ValidationError("config: source.waveform must be pwm or sine, got '" + s + "'");
      }
    }
  }
  if (j.contains("newton")) {
    const json& m = j.at("newton");
    reject_unknown(m, {"method", "rel_tol", "max_iters", "max_line_search"}, "newton");
    if (m.contains("method")) {
      read(m, "method", s, "newton");
      if (s == "newton") {
        c.newton.method = eddy::NonlinearMethod::Newton;
      } else if (s == "picard") {
        c.newton.method = eddy::NonlinearMethod::Picard;
      } else {
        throw ValidationError("config: newton.method must be newton or picard, got '" + s + "'");
      }
    }
    read(m, "rel_tol", c.newton.rel_tol, "newton");
    read(m, "max_iters", c.newton.max_iters, "newton");
    read(m, "max_line_search", c.newton.max_line_search, "newton");
  }
  if (j.contains("output")) {
    const json& m = j.at("output");
    reject_unknown(m,
                   {"dir", "convergence_csv", "work_model_csv", "sequential_csv", "summary_json",
                    "effective_config", "wall_clock", "export_mesh", "export_matrices"},
                   "output");
    auto& o = c.output;
    read(m, "dir", o.dir, "output");
    read(m, "convergence_csv", o.convergence_csv, "output");
    read(m, "work_model_csv", o.work_model_csv, "output");
    read(m, "sequential_csv", o.sequential_csv, "output");
    read(m, "summary_json", o.summary_json, "output");
    read(m, "effective_config", o.effective_config, "output");
    read(m, "wall_clock", o.wall_clock, "output");
    read(m, "export_mesh", o.export_mesh, "output");
    read(m, "export_matrices", o.export_matrices, "output");
  }
  return c;
}

/// Range checks against the preconditions of the modules a run touches.
inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (c.num_intervals == 0) fail("num_intervals must be at least 1");
  if (!(c.t_end > c.t_start)) fail("t_end must exceed t_start");
  if (!(c.halt_tol > 0.0)) fail("halt_tol must be positive");
  if (c.max_iters < 1) fail("max_iters must be at least 1");
  if (c.num_workers < 1) fail("num_workers must be at least 1");
  for (Index w : c.work_model_workers) {
    if (w < 1) fail("work_model_workers entries must be at least 1");
  }
  // Throws with the offending level and factor.
  TemporalHierarchy(c.t_start, c.t_end, c.num_intervals, c.factors);
  if (c.problem == Problem::Dahlquist) {
    const double dt = (c.t_end - c.t_start) / static_cast<double>(c.num_intervals);
    double scale = dt;
    for (Index f = 0; f <= c.factors.size(); ++f) {
      if (1.0 - c.dahlquist.lambda * scale == 0.0) fail("dahlquist step is singular on some level");
      if (f < c.factors.size()) scale *= static_cast<double>(c.factors[f]);
    }
    return;
  }
  if (!(c.lz > 0.0)) fail("lz must be positive");
  if (!(c.materials.sigma_shield >= 0.0)) fail("materials.sigma_shield must be nonnegative");
  if (!(c.source.period > 0.0)) fail("source.period must be positive");
  if (c.source.teeth < 1) fail("source.teeth must be at least 1");
  if (!(c.newton.rel_tol > 0.0)) fail("newton.rel_tol must be positive");
  if (c.newton.max_iters < 1) fail("newton.max_iters must be at least 1");
  if (c.newton.max_line_search < 0) fail("newton.max_line_search must be nonnegative");
  if (c.mesh.file.empty()) {
    const auto& g = c.mesh.geometry;
    if (!(0.0 < g.r0 && g.r0 < g.r1 && g.r1 < g.r2)) fail("mesh radii must satisfy 0 < r0 < r1 < r2");
    if (g.angular_divisions < 8) fail("mesh.angular_divisions must be at least 8");
    for (auto n : g.radial_layers) {
      if (n < 1) fail("mesh.radial_layers entries must be at least 1");
    }
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace pint::bench
