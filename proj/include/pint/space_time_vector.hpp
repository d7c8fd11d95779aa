#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pint/error.hpp"
#include "pint/time_hierarchy.hpp"

namespace pint {

using State = std::vector<double>;

/// States u_0..u_N of one time level, stored point-major in one buffer.
///
/// The buffer spans the whole level. In a multi-worker run each worker writes
/// only the points its TimePartition range owns and sees its left neighbour
/// exclusively through the ghost filled by exchange_left_boundary.
class SpaceTimeVector {
 public:
  SpaceTimeVector() = default;
  SpaceTimeVector(Index level, Index num_points, Index dim)
      : level_(level), num_points_(num_points), dim_(dim), data_(num_points * dim, 0.0) {}

  Index level() const noexcept { return level_; }
  Index num_points() const noexcept { return num_points_; }
  Index num_intervals() const noexcept { return num_points_ == 0 ? 0 : num_points_ - 1; }
  Index dim() const noexcept { return dim_; }

  std::span<double> at(Index i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> at(Index i) const { return {data_.data() + i * dim_, dim_}; }

  State copy(Index i) const {
    auto s = at(i);
    return State(s.begin(), s.end());
  }
  void set(Index i, std::span<const double> v) {
    if (v.size() != dim_) throw DimensionError("state has " + std::to_string(v.size()) +
                                               " entries, expected " + std::to_string(dim_));
    std::copy(v.begin(), v.end(), at(i).begin());
  }
  void fill(std::span<const double> v) {
    for (Index i = 0; i < num_points_; ++i) set(i, v);
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

 private:
  Index level_ = 0;
  Index num_points_ = 0;
  Index dim_ = 0;
  std::vector<double> data_;
};

/// Largest over all points of the max-norm difference between two vectors.
inline double max_abs_difference(const SpaceTimeVector& a, const SpaceTimeVector& b) {
  if (a.num_points() != b.num_points() || a.dim() != b.dim()) {
    throw DimensionError("space-time vectors differ in shape");
  }
  double d = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (Index k = 0; k < x.size(); ++k) d = std::max(d, std::abs(x[k] - y[k]));
  return d;
}

}  // namespace pint
