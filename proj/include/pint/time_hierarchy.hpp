#pragma once

// Nested uniform time grids for multilevel time integration.
//
// Counts are in INTERVALS throughout: a grid with N intervals has N + 1
// points t_i = t_start + i * dt, i = 0..N. Level 0 is the finest grid and
// level l + 1 keeps every factors[l]-th point of level l.

#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pint/error.hpp"

namespace pint {

using Index = std::size_t;

struct TemporalGrid {
  Index level = 0;
  double t_start = 0.0;
  double dt = 0.0;
  Index num_intervals = 0;

  Index num_points() const noexcept { return num_intervals + 1; }
  double time(Index i) const noexcept {
    return t_start + static_cast<double>(i) * dt;
  }
  double t_end() const noexcept { return time(num_intervals); }
};

/// C-points are the multiples of m; F-intervals are the maximal runs of
/// F-points between consecutive C-points, stored as [first, last].
struct CFPartition {
  Index coarsening = 1;
  std::vector<Index> c_indices;
  std::vector<std::pair<Index, Index>> f_intervals;

  bool is_c_point(Index i) const noexcept { return i % coarsening == 0; }
};

inline CFPartition cf_partition(const TemporalGrid& grid, Index m) {
  if (m == 0 || grid.num_intervals % m != 0) {
    throw ValidationError("coarsening factor " + std::to_string(m) +
                          " does not divide " +
                          std::to_string(grid.num_intervals) +
                          " intervals on level " + std::to_string(grid.level));
  }
  CFPartition cf;
  cf.coarsening = m;
  cf.c_indices.reserve(grid.num_intervals / m + 1);
  for (Index c = 0; c <= grid.num_intervals; c += m) {
    cf.c_indices.push_back(c);
    if (m > 1 && c < grid.num_intervals) cf.f_intervals.emplace_back(c + 1, c + m - 1);
  }
  return cf;
}

class TemporalHierarchy {
 public:
  TemporalHierarchy(double t_start, double t_end, Index num_intervals,
                    std::vector<Index> factors)
      : factors_(std::move(factors)) {
    if (!(t_end > t_start)) {
      throw ValidationError("t_end must exceed t_start");
    }
    if (num_intervals < 1) {
      throw ValidationError("number of intervals must be at least 1");
    }
    TemporalGrid fine{0, t_start, (t_end - t_start) / static_cast<double>(num_intervals),
                      num_intervals};
    grids_.push_back(fine);
    for (Index l = 0; l < factors_.size(); ++l) {
      const Index m = factors_[l];
      const TemporalGrid& g = grids_.back();
      if (m < 2) {
        throw ValidationError("coarsening factor on level " + std::to_string(l) +
                              " must be >= 2, got " + std::to_string(m));
      }
      if (g.num_intervals % m != 0) {
        throw ValidationError("coarsening factor " + std::to_string(m) +
                              " on level " + std::to_string(l) +
                              " does not divide " + std::to_string(g.num_intervals) +
                              " intervals");
      }
      grids_.push_back(TemporalGrid{l + 1, t_start, g.dt * static_cast<double>(m),
                                    g.num_intervals / m});
    }
  }

  Index num_levels() const noexcept { return grids_.size(); }
  Index coarsest() const noexcept { return grids_.size() - 1; }
  const TemporalGrid& grid(Index level) const { return grids_.at(level); }
  const std::vector<TemporalGrid>& grids() const noexcept { return grids_; }
  const std::vector<Index>& factors() const noexcept { return factors_; }

  /// Coarsening factor between `level` and `level + 1`.
  Index factor(Index level) const { return factors_.at(level); }

  /// Product of the factors between level 0 and `level`.
  Index stride(Index level) const {
    return std::accumulate(factors_.begin(), factors_.begin() + static_cast<std::ptrdiff_t>(level),
                           Index{1}, [](Index a, Index b) { return a * b; });
  }

  Index to_fine_index(Index level, Index i) const { return i * stride(level); }

  /// Inverse of to_fine_index; the fine index must be a point of `level`.
  Index from_fine_index(Index level, Index fine) const {
    const Index s = stride(level);
    if (fine % s != 0) {
      throw ValidationError("fine index " + std::to_string(fine) +
                            " is not a point of level " + std::to_string(level));
    }
    return fine / s;
  }

  CFPartition partition(Index level) const { return cf_partition(grid(level), factor(level)); }

 private:
  std::vector<TemporalGrid> grids_;
  std::vector<Index> factors_;
};

inline TemporalHierarchy build_hierarchy(double t_start, double t_end, Index num_intervals,
                                         std::vector<Index> factors) {
  return TemporalHierarchy(t_start, t_end, num_intervals, std::move(factors));
}

}  // namespace pint
