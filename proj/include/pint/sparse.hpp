#pragma once

// Compressed-row sparse matrices and a direct profile (skyline) LU solver.
//
// The factorization stores L row-wise and U column-wise inside the envelope
// given by the first structural nonzero of each row. For the structurally
// symmetric matrices assembled here the envelope of the factors equals the
// envelope of A, so no fill outside it can occur. No pivoting is done; the
// systems factorized in this project are symmetric positive definite.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "pint/error.hpp"

namespace pint {

class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Takes ownership of CSR arrays; columns must be sorted and unique per row.
  SparseMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
               std::vector<double> values)
      : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)) {
    if (row_ptr_.size() != n_ + 1 || cols_.size() != values_.size() ||
        row_ptr_.back() != cols_.size()) {
      throw DimensionError("inconsistent CSR arrays");
    }
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        if (cols_[k] >= n_ || (k > row_ptr_[i] && cols_[k] <= cols_[k - 1])) {
          throw ValidationError("CSR columns must be in range, sorted and unique (row " +
                                std::to_string(i) + ")");
        }
      }
    }
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<std::size_t> rp(n + 1), c(n);
    for (std::size_t i = 0; i <= n; ++i) rp[i] = i;
    for (std::size_t i = 0; i < n; ++i) c[i] = i;
    return SparseMatrix(n, std::move(rp), std::move(c), std::vector<double>(n, 1.0));
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }
  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> cols() const noexcept { return cols_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Entry (i, j), zero when not stored.
  double operator()(std::size_t i, std::size_t j) const {
    auto b = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    auto e = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? values_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

/// Accumulates (i, j, v) triplets; duplicates are summed on build.
class TripletBuilder {
 public:
  explicit TripletBuilder(std::size_t n) : n_(n) {}

  void add(std::size_t i, std::size_t j, double v) {
    if (i >= n_ || j >= n_) throw DimensionError("triplet index out of range");
    entries_.emplace_back(i, j, v);
  }
  void reserve(std::size_t k) { entries_.reserve(k); }

  SparseMatrix build() const {
    auto e = entries_;
    std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    std::vector<std::size_t> rp(n_ + 1, 0), cols;
    std::vector<double> vals;
    cols.reserve(e.size());
    vals.reserve(e.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
      const auto [i, j, v] = e[k];
      if (!cols.empty() && k > 0 && std::get<0>(e[k - 1]) == i && cols.back() == j) {
        vals.back() += v;
      } else {
        cols.push_back(j);
        vals.push_back(v);
        ++rp[i + 1];
      }
    }
    for (std::size_t i = 0; i < n_; ++i) rp[i + 1] += rp[i];
    return SparseMatrix(n_, std::move(rp), std::move(cols), std::move(vals));
  }

 private:
  std::size_t n_;
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries_;
};

inline std::vector<double> spmv(const SparseMatrix& a, std::span<const double> x) {
  if (x.size() != a.size()) {
    throw DimensionError("spmv: matrix has " + std::to_string(a.size()) + " columns, vector " +
                         std::to_string(x.size()) + " entries");
  }
  std::vector<double> y(a.size(), 0.0);
  auto rp = a.row_ptr();
  auto c = a.cols();
  auto v = a.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) s += v[k] * x[c[k]];
    y[i] = s;
  }
  return y;
}

/// alpha * A + beta * B over the union of both patterns.
inline SparseMatrix add(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b) {
  if (a.size() != b.size()) throw DimensionError("matrix sizes differ");
  if (std::ranges::equal(a.row_ptr(), b.row_ptr()) && std::ranges::equal(a.cols(), b.cols())) {
    SparseMatrix c = a;
    auto cv = c.values();
    auto bv = b.values();
    for (std::size_t k = 0; k < cv.size(); ++k) cv[k] = alpha * cv[k] + beta * bv[k];
    return c;
  }
  TripletBuilder t(a.size());
  t.reserve(a.nonzeros() + b.nonzeros());
  for (const auto* m : {&a, &b}) {
    const double s = m == &a ? alpha : beta;
    auto rp = m->row_ptr();
    auto c = m->cols();
    auto v = m->values();
    for (std::size_t i = 0; i < m->size(); ++i) {
      for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) t.add(i, c[k], s * v[k]);
    }
  }
  return t.build();
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern of `a`;
/// perm[new] = old.
inline std::vector<std::size_t> reverse_cuthill_mckee(const SparseMatrix& a) {
  const std::size_t n = a.size();
  std::vector<std::vector<std::size_t>> adj(n);
  auto rp = a.row_ptr();
  auto c = a.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      if (c[k] == i) continue;
      adj[i].push_back(c[k]);
      adj[c[k]].push_back(i);
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> level(n);

  // Breadth-first search from `root`; returns the visit order.
  auto bfs = [&](std::size_t root, std::vector<bool>& mark) {
    std::vector<std::size_t> q{root};
    mark[root] = true;
    level[root] = 0;
    for (std::size_t h = 0; h < q.size(); ++h) {
      std::vector<std::size_t> next;
      for (auto v : adj[q[h]]) {
        if (!mark[v]) next.push_back(v);
      }
      std::sort(next.begin(), next.end(), [&](std::size_t x, std::size_t y) {
        return adj[x].size() != adj[y].size() ? adj[x].size() < adj[y].size() : x < y;
      });
      for (auto v : next) {
        mark[v] = true;
        level[v] = level[q[h]] + 1;
        q.push_back(v);
      }
    }
    return q;
  };

  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    // Pseudo-peripheral start: repeatedly jump to a minimum-degree node of
    // the deepest BFS level while the depth grows.
    std::size_t root = s;
    std::size_t depth = 0;
    for (int pass = 0; pass < 8; ++pass) {
      std::vector<bool> mark = seen;
      auto q = bfs(root, mark);
      const std::size_t d = level[q.back()];
      if (pass > 0 && d <= depth) break;
      depth = d;
      std::size_t best = q.back();
      for (auto v : q) {
        if (level[v] == d && adj[v].size() < adj[best].size()) best = v;
      }
      root = best;
    }
    auto q = bfs(root, seen);
    order.insert(order.end(), q.begin(), q.end());
  }
  std::reverse(order.begin(), order.end());
  return order;
}

/// P A P^T for perm[new] = old.
inline SparseMatrix permute(const SparseMatrix& a, std::span<const std::size_t> perm) {
  const std::size_t n = a.size();
  std::vector<std::size_t> inv(n);
  for (std::size_t k = 0; k < n; ++k) inv[perm[k]] = k;
  auto rp = a.row_ptr();
  auto c = a.cols();
  auto v = a.values();
  std::vector<std::size_t> out_rp(n + 1, 0), out_c;
  std::vector<double> out_v;
  out_c.reserve(a.nonzeros());
  out_v.reserve(a.nonzeros());
  std::vector<std::pair<std::size_t, double>> row;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t old = perm[r];
    row.clear();
    for (std::size_t k = rp[old]; k < rp[old + 1]; ++k) row.emplace_back(inv[c[k]], v[k]);
    std::sort(row.begin(), row.end());
    for (const auto& [col, val] : row) {
      out_c.push_back(col);
      out_v.push_back(val);
    }
    out_rp[r + 1] = out_c.size();
  }
  return SparseMatrix(n, std::move(out_rp), std::move(out_c), std::move(out_v));
}

/// Profile LU factors of a structurally symmetric matrix.
class Factorization {
 public:
  std::size_t size() const noexcept { return first_.size(); }

  std::vector<double> solve(std::span<const double> b) const {
    const std::size_t n = size();
    if (b.size() != n) {
      throw DimensionError("solve: factorization has dimension " + std::to_string(n) +
                           ", right-hand side " + std::to_string(b.size()));
    }
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = b[perm_[k]];
    // L y = b, unit diagonal.
    for (std::size_t i = 0; i < n; ++i) {
      const double* l = &lower_[offset_[i]];
      double s = x[i];
      for (std::size_t j = first_[i]; j < i; ++j) s -= l[j - first_[i]] * x[j];
      x[i] = s;
    }
    // U x = y, column oriented.
    for (std::size_t j = n; j-- > 0;) {
      const double* u = &upper_[offset_[j]];
      x[j] /= diag_[j];
      const double xj = x[j];
      for (std::size_t i = first_[j]; i < j; ++i) x[i] -= u[i - first_[j]] * xj;
    }
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[perm_[k]] = x[k];
    return out;
  }

 private:
  friend Factorization factorize(const SparseMatrix& a, std::span<const std::size_t> ordering);

  std::vector<std::size_t> perm_;    // perm_[new] = old
  std::vector<std::size_t> first_;   // first column in the envelope of row i
  std::vector<std::size_t> offset_;  // start of row i of L / column i of U
  std::vector<double> lower_;        // L(i, first_i..i-1)
  std::vector<double> upper_;        // U(first_j..j-1, j)
  std::vector<double> diag_;         // U(j, j)
};

/// Doolittle LU inside the envelope of the symmetrically reordered matrix
/// (ordering[new] = old). A pivot that vanishes relative to the magnitude of
/// its row raises SingularMatrixError with the pivot's index in the original
/// numbering.
inline Factorization factorize(const SparseMatrix& original,
                               std::span<const std::size_t> ordering) {
  if (ordering.size() != original.size()) throw DimensionError("ordering size mismatch");
  Factorization f;
  f.perm_.assign(ordering.begin(), ordering.end());
  const SparseMatrix a = permute(original, f.perm_);
  const std::size_t n = a.size();
  auto rp = a.row_ptr();
  auto c = a.cols();
  auto v = a.values();

  f.first_.resize(n);
  f.offset_.resize(n + 1);
  f.diag_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i;
    if (rp[i] < rp[i + 1]) lo = std::min(lo, c[rp[i]]);
    f.first_[i] = lo;
  }
  // Column j of A above the diagonal lies in rows >= first_[j] only when the
  // pattern is structurally symmetric; widen the envelope otherwise.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      const std::size_t j = c[k];
      if (j > i) f.first_[j] = std::min(f.first_[j], i);
    }
  }
  f.offset_[0] = 0;
  for (std::size_t i = 0; i < n; ++i) f.offset_[i + 1] = f.offset_[i] + (i - f.first_[i]);
  f.lower_.assign(f.offset_[n], 0.0);
  f.upper_.assign(f.offset_[n], 0.0);

  std::vector<double> row_scale(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      const std::size_t j = c[k];
      row_scale[i] = std::max(row_scale[i], std::abs(v[k]));
      if (j < i) {
        f.lower_[f.offset_[i] + (j - f.first_[i])] = v[k];
      } else if (j > i) {
        f.upper_[f.offset_[j] + (i - f.first_[j])] = v[k];
      } else {
        f.diag_[i] = v[k];
      }
    }
  }

  const double eps = 64.0 * std::numeric_limits<double>::epsilon();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t fk = f.first_[k];
    double* lk = &f.lower_[f.offset_[k]];
    double* uk = &f.upper_[f.offset_[k]];
    // Row k of L.
    for (std::size_t j = fk; j < k; ++j) {
      const std::size_t fj = f.first_[j];
      const double* uj = &f.upper_[f.offset_[j]];
      double s = lk[j - fk];
      for (std::size_t p = std::max(fk, fj); p < j; ++p) s -= lk[p - fk] * uj[p - fj];
      lk[j - fk] = s / f.diag_[j];
    }
    // Column k of U.
    for (std::size_t i = fk; i < k; ++i) {
      const std::size_t fi = f.first_[i];
      const double* li = &f.lower_[f.offset_[i]];
      double s = uk[i - fk];
      for (std::size_t p = std::max(fk, fi); p < i; ++p) s -= li[p - fi] * uk[p - fk];
      uk[i - fk] = s;
    }
    double d = f.diag_[k];
    for (std::size_t p = fk; p < k; ++p) d -= lk[p - fk] * uk[p - fk];
    if (!(std::abs(d) > eps * row_scale[k])) throw SingularMatrixError(f.perm_[k]);
    f.diag_[k] = d;
  }
  return f;
}

inline Factorization factorize(const SparseMatrix& a) {
  return factorize(a, reverse_cuthill_mckee(a));
}

inline std::vector<double> solve(const Factorization& f, std::span<const double> b) {
  return f.solve(b);
}

/// MatrixMarket coordinate format, general real, 1-based indices.
inline void write_matrix_market(std::ostream& os, const SparseMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.size() << ' ' << a.size() << ' ' << a.nonzeros() << '\n';
  os << std::setprecision(17);
  auto rp = a.row_ptr();
  auto c = a.cols();
  auto v = a.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      os << i + 1 << ' ' << c[k] + 1 << ' ' << v[k] << '\n';
    }
  }
}

}  // namespace pint
