#pragma once

// Lowest-order (P1) finite elements for the z-component of the magnetic
// vector potential. With w_i = N_i e_z / lz, curl w_j . curl w_i reduces to
// grad N_j . grad N_i / lz^2, so K_nu is a Laplace stiffness weighted by
// nu(|B_e|) and M_sigma is a conductivity-weighted P1 mass matrix.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "pint/eddy/materials.hpp"
#include "pint/eddy/mesh.hpp"
#include "pint/eddy/pwm.hpp"
#include "pint/error.hpp"
#include "pint/sparse.hpp"

namespace pint::eddy {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Consistent P1 mass block: (coef * area / 12) [[2,1,1],[1,2,1],[1,1,2]].
inline Mat3 p1_mass_block(double area, double coef) {
  Mat3 m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = coef * area / 12.0 * (i == j ? 2.0 : 1.0);
  }
  return m;
}

/// area * grad N_i . grad N_j for the triangle (p, q, r).
inline Mat3 p1_laplace_block(const Point2& p, const Point2& q, const Point2& r) {
  const double twice_area = (q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y);
  // Unnormalized gradients: grad N_i = (b_i, c_i) / (2 area).
  const std::array<double, 3> b{q.y - r.y, r.y - p.y, p.y - q.y};
  const std::array<double, 3> c{r.x - q.x, p.x - r.x, q.x - p.x};
  Mat3 k{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (2.0 * twice_area);
  }
  return k;
}

/// Element geometry and the CSR slots of each element's 3x3 block, shared
/// by all assemblies on one mesh.
class P1Assembler {
 public:
  explicit P1Assembler(const Mesh2D& mesh) : mesh_(&mesh) {
    const std::size_t ne = mesh.num_triangles();
    area_.resize(ne);
    laplace_.resize(ne);
    grad_.resize(ne);
    TripletBuilder pattern(mesh.num_nodes());
    for (std::size_t e = 0; e < ne; ++e) {
      area_[e] = mesh.signed_area(e);
      if (!(area_[e] > 0.0)) {
        throw ValidationError("triangle " + std::to_string(e) + " is degenerate or clockwise");
      }
      const auto& t = mesh.triangles[e];
      const Point2 &p = mesh.nodes[t[0]], &q = mesh.nodes[t[1]], &r = mesh.nodes[t[2]];
      laplace_[e] = p1_laplace_block(p, q, r);
      const double d = 2.0 * area_[e];
      grad_[e] = {{{(r.y - p.y) / d, (p.x - r.x) / d}, {(p.y - q.y) / d, (q.x - p.x) / d}}};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) pattern.add(t[i], t[j], 0.0);
      }
    }
    pattern_ = pattern.build();
    slots_.resize(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      const auto& t = mesh.triangles[e];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) slots_[e][3 * i + j] = slot(t[i], t[j]);
      }
    }
  }

  const Mesh2D& mesh() const noexcept { return *mesh_; }
  std::size_t size() const noexcept { return mesh_->num_nodes(); }
  double area(std::size_t e) const { return area_[e]; }
  const Mat3& laplace(std::size_t e) const { return laplace_[e]; }

  /// Zero matrix with the mesh's sparsity pattern.
  SparseMatrix zero() const {
    SparseMatrix z = pattern_;
    for (double& v : z.values()) v = 0.0;
    return z;
  }

  void scatter(SparseMatrix& a, std::size_t e, const Mat3& block) const {
    auto v = a.values();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) v[slots_[e][3 * i + j]] += block[i][j];
    }
  }

  /// |B| on element e: |sum_i u_i grad N_i| / lz, constant per element.
  double flux_density(std::size_t e, std::span<const double> u, double lz) const {
    // Differences against node 0 keep constant potentials exactly field-free.
    const auto& t = mesh_->triangles[e];
    const auto& g = grad_[e];
    const double d1 = u[t[1]] - u[t[0]], d2 = u[t[2]] - u[t[0]];
    return std::hypot(d1 * g[0][0] + d2 * g[1][0], d1 * g[0][1] + d2 * g[1][1]) / lz;
  }

  SparseMatrix mass(const MaterialMap& mat, double lz) const {
    SparseMatrix m = zero();
    for (std::size_t e = 0; e < mesh_->num_triangles(); ++e) {
      const double sigma = mat.conductivity(mesh_->regions[e]);
      if (sigma == 0.0) continue;
      scatter(m, e, p1_mass_block(area_[e], sigma / (lz * lz)));
    }
    return m;
  }

  SparseMatrix stiffness(const MaterialMap& mat, std::span<const double> u, double lz) const {
    check_size(u);
    SparseMatrix k = zero();
    for (std::size_t e = 0; e < mesh_->num_triangles(); ++e) {
      const ReluctivityModel& nu = mat.nu(mesh_->regions[e]);
      const double s = (nu.is_constant() ? nu.nu(0.0) : nu.nu(flux_density(e, u, lz))) / (lz * lz);
      Mat3 block = laplace_[e];
      for (auto& row : block) {
        for (double& v : row) v *= s;
      }
      scatter(k, e, block);
    }
    return k;
  }

  /// Derivative of u -> K_nu(u) u: K_nu(u) plus, where nu varies, the rank-one
  /// chain-rule term nu'(B) / (area lz^4 B) (G u)(G u)^T per element.
  SparseMatrix tangent_stiffness(const MaterialMap& mat, std::span<const double> u,
                                 double lz) const {
    check_size(u);
    SparseMatrix k = zero();
    for (std::size_t e = 0; e < mesh_->num_triangles(); ++e) {
      const ReluctivityModel& nu = mat.nu(mesh_->regions[e]);
      const Mat3& g = laplace_[e];
      Mat3 block = g;
      if (nu.is_constant()) {
        const double s = nu.nu(0.0) / (lz * lz);
        for (auto& row : block) {
          for (double& v : row) v *= s;
        }
      } else {
        const auto& t = mesh_->triangles[e];
        const double b = flux_density(e, u, lz);
        const double s = nu.nu(b) / (lz * lz);
        std::array<double, 3> gu{};
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) gu[i] += g[i][j] * u[t[j]];
        }
        const double dnu = nu.dnu_db(b);
        const double rank_one = (b > 0.0 && dnu != 0.0)
                                    ? dnu / (area_[e] * lz * lz * lz * lz * b)
                                    : 0.0;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) block[i][j] = s * g[i][j] + rank_one * gu[i] * gu[j];
        }
      }
      scatter(k, e, block);
    }
    return k;
  }

  /// K_nu(u) u without forming the matrix.
  std::vector<double> apply_stiffness(const MaterialMap& mat, std::span<const double> u,
                                      double lz) const {
    check_size(u);
    std::vector<double> y(size(), 0.0);
    for (std::size_t e = 0; e < mesh_->num_triangles(); ++e) {
      const ReluctivityModel& nu = mat.nu(mesh_->regions[e]);
      const double s = (nu.is_constant() ? nu.nu(0.0) : nu.nu(flux_density(e, u, lz))) / (lz * lz);
      const auto& t = mesh_->triangles[e];
      const Mat3& g = laplace_[e];
      for (int i = 0; i < 3; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += g[i][j] * u[t[j]];
        y[t[i]] += s * acc;
      }
    }
    return y;
  }

  /// j_i = amplitude f(t) / (pi r0^2 lz) * integral over the wire of N_i.
  std::vector<double> source(const PwmSource& src, double t, double lz) const {
    std::vector<double> j(size(), 0.0);
    const double f = excitation(t, src);
    if (f == 0.0) return j;
    const double density = src.amplitude * f / (std::numbers::pi * src.r0 * src.r0 * lz);
    for (std::size_t e = 0; e < mesh_->num_triangles(); ++e) {
      if (mesh_->regions[e] != Region::Wire) continue;
      for (auto n : mesh_->triangles[e]) j[n] += density * area_[e] / 3.0;
    }
    return j;
  }

 private:
  std::size_t slot(std::size_t i, std::size_t j) const {
    auto rp = pattern_.row_ptr();
    auto c = pattern_.cols();
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      if (c[k] == j) return k;
    }
    throw Error("assembly pattern is missing an element entry");
  }

  void check_size(std::span<const double> u) const {
    if (u.size() != size()) {
      throw DimensionError("coefficient vector has " + std::to_string(u.size()) +
                           " entries, mesh has " + std::to_string(size()) + " nodes");
    }
  }

  const Mesh2D* mesh_;
  std::vector<double> area_;
  std::vector<Mat3> laplace_;
  std::vector<std::array<std::array<double, 2>, 2>> grad_;  // grad N_1, grad N_2
  std::vector<std::array<std::size_t, 9>> slots_;
  SparseMatrix pattern_;
};

inline SparseMatrix assemble_mass(const Mesh2D& mesh, const MaterialMap& mat, double lz = 1.0) {
  return P1Assembler(mesh).mass(mat, lz);
}

inline SparseMatrix assemble_stiffness(const Mesh2D& mesh, const MaterialMap& mat,
                                       std::span<const double> u, double lz = 1.0) {
  return P1Assembler(mesh).stiffness(mat, u, lz);
}

inline std::vector<double> assemble_source(const Mesh2D& mesh, const PwmSource& src, double t,
                                           double lz = 1.0) {
  return P1Assembler(mesh).source(src, t, lz);
}

}  // namespace pint::eddy
