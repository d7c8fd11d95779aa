#pragma once

// In-process worker runtime for time-parallel solves.
//
// Time points of every level are block-partitioned across workers. The only
// communication MGRIT needs is (a) each worker reading its left neighbour's
// last owned state before a relaxation sweep and (b) a sum reduction for the
// residual norm; both are explicit functions here so a message-passing
// backend can replace them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pint/error.hpp"
#include "pint/space_time_vector.hpp"
#include "pint/time_hierarchy.hpp"

namespace pint {

/// Half-open range [begin, end) of point indices.
struct IndexRange {
  Index begin = 0;
  Index end = 0;

  bool empty() const noexcept { return begin >= end; }
  Index size() const noexcept { return empty() ? 0 : end - begin; }
  bool contains(Index i) const noexcept { return i >= begin && i < end; }
};

class TimePartition {
 public:
  TimePartition() = default;

  /// `intervals[l]` is the interval count of level l; each must divide the
  /// previous one. Level 0 splits the points 1..N into balanced contiguous
  /// blocks (worker 0 also owns point 0); a worker owns coarse point j
  /// exactly when it owns the fine point j * m.
  TimePartition(const std::vector<Index>& intervals, Index num_workers)
      : num_workers_(num_workers) {
    if (num_workers < 1) throw ValidationError("number of workers must be at least 1");
    if (intervals.empty()) throw ValidationError("partition needs at least one level");
    const Index n = intervals.front();
    std::vector<IndexRange> fine(num_workers);
    const Index base = n / num_workers;
    const Index rem = n % num_workers;
    Index next = 1;
    for (Index w = 0; w < num_workers; ++w) {
      const Index len = base + (w < rem ? 1 : 0);
      fine[w] = IndexRange{w == 0 ? 0 : next, next + len};
      next += len;
    }
    ranges_.push_back(std::move(fine));
    for (Index l = 1; l < intervals.size(); ++l) {
      if (intervals[l] == 0 || intervals[l - 1] % intervals[l] != 0) {
        throw ValidationError("level " + std::to_string(l) + " interval count " +
                              std::to_string(intervals[l]) + " does not divide level " +
                              std::to_string(l - 1));
      }
      const Index m = intervals[l - 1] / intervals[l];
      std::vector<IndexRange> coarse(num_workers);
      for (Index w = 0; w < num_workers; ++w) {
        const IndexRange& f = ranges_.back()[w];
        if (f.empty()) continue;
        const Index b = (f.begin + m - 1) / m;
        const Index e = (f.end - 1) / m + 1;
        coarse[w] = b < e ? IndexRange{b, e} : IndexRange{};
      }
      ranges_.push_back(std::move(coarse));
    }
  }

  TimePartition(const TemporalHierarchy& h, Index num_workers)
      : TimePartition(intervals_of(h), num_workers) {}

  Index num_workers() const noexcept { return num_workers_; }
  Index num_levels() const noexcept { return ranges_.size(); }
  const IndexRange& range(Index level, Index worker) const { return ranges_.at(level).at(worker); }

  Index owner(Index level, Index i) const {
    const auto& r = ranges_.at(level);
    for (Index w = 0; w < r.size(); ++w) {
      if (r[w].contains(i)) return w;
    }
    throw ValidationError("point " + std::to_string(i) + " is not owned on level " +
                          std::to_string(level));
  }

  /// Nearest worker to the left of `worker` owning points on `level`.
  std::optional<Index> left_neighbor(Index level, Index worker) const {
    for (Index w = worker; w-- > 0;) {
      if (!range(level, w).empty()) return w;
    }
    return std::nullopt;
  }

  static std::vector<Index> intervals_of(const TemporalHierarchy& h) {
    std::vector<Index> n;
    for (const auto& g : h.grids()) n.push_back(g.num_intervals);
    return n;
  }

 private:
  Index num_workers_ = 0;
  std::vector<std::vector<IndexRange>> ranges_;
};

inline TimePartition partition(const std::vector<Index>& intervals, Index num_workers) {
  return TimePartition(intervals, num_workers);
}

/// Read-only copies of each worker's left neighbour's last owned state.
class GhostBuffers {
 public:
  GhostBuffers() = default;
  GhostBuffers(Index num_workers, Index dim) : values_(num_workers, State(dim, 0.0)),
                                               valid_(num_workers, false) {}

  std::span<const double> get(Index worker) const {
    if (!valid_.at(worker)) {
      throw Error("worker " + std::to_string(worker) + " read a ghost before exchange");
    }
    return values_[worker];
  }
  bool valid(Index worker) const { return valid_.at(worker); }

  void put(Index worker, std::span<const double> v) {
    std::copy(v.begin(), v.end(), values_.at(worker).begin());
    valid_[worker] = true;
  }
  void invalidate() { std::fill(valid_.begin(), valid_.end(), false); }

 private:
  std::vector<State> values_;
  std::vector<bool> valid_;
};

/// Fills the ghost of each listed worker with the state just before its
/// first owned point. With an empty list every worker is served.
inline void exchange_left_boundary(const TimePartition& part, Index level,
                                   const SpaceTimeVector& u, GhostBuffers& ghosts,
                                   const std::vector<Index>& workers = {}) {
  auto serve = [&](Index w) {
    const IndexRange& r = part.range(level, w);
    if (r.empty() || r.begin == 0) return;
    auto src = part.left_neighbor(level, w);
    if (!src || part.range(level, *src).end != r.begin) {
      throw Error("left neighbour of worker " + std::to_string(w) + " on level " +
                  std::to_string(level) + " does not own point " + std::to_string(r.begin - 1));
    }
    ghosts.put(w, u.at(r.begin - 1));
  };
  if (workers.empty()) {
    for (Index w = 0; w < part.num_workers(); ++w) serve(w);
  } else {
    for (Index w : workers) serve(w);
  }
}

/// Sum reduction of per-worker partial sums of squares, in worker order.
inline double global_residual_norm(std::span<const double> local_sums_of_squares) {
  double s = 0.0;
  for (double v : local_sums_of_squares) s += v;
  return std::sqrt(s);
}

/// Sum of squares of the listed point values owned by one worker.
inline double local_sum_of_squares(const SpaceTimeVector& r, IndexRange owned,
                                   const std::function<bool(Index)>& select = {}) {
  double s = 0.0;
  for (Index i = owned.begin; i < owned.end; ++i) {
    if (select && !select(i)) continue;
    for (double v : r.at(i)) s += v * v;
  }
  return s;
}

/// Runs one task per worker and joins; the first worker exception is rethrown.
class WorkerPool {
 public:
  explicit WorkerPool(Index num_workers, bool threaded = true)
      : num_workers_(num_workers), threaded_(threaded) {
    if (num_workers < 1) throw ValidationError("number of workers must be at least 1");
  }

  Index size() const noexcept { return num_workers_; }

  void run(const std::function<void(Index)>& task) const {
    std::vector<std::exception_ptr> errors(num_workers_);
    auto guarded = [&](Index w) {
      try {
        task(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (!threaded_ || num_workers_ == 1) {
      for (Index w = 0; w < num_workers_; ++w) guarded(w);
    } else {
      std::vector<std::jthread> threads;
      threads.reserve(num_workers_ - 1);
      for (Index w = 1; w < num_workers_; ++w) threads.emplace_back(guarded, w);
      guarded(0);
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

 private:
  Index num_workers_;
  bool threaded_;
};

/// Propagator applications attributed to the time point they produce.
/// Each entry is written only by the worker owning that point.
class PhiCounter {
 public:
  PhiCounter() = default;
  explicit PhiCounter(const std::vector<Index>& points_per_level) {
    for (Index n : points_per_level) per_point_.emplace_back(n, 0);
  }

  void add(Index level, Index point) { ++per_point_[level][point]; }
  void add_sequential(std::uint64_t n = 1) { sequential_ += n; }

  std::uint64_t level_total(Index level) const {
    std::uint64_t s = 0;
    for (auto c : per_point_.at(level)) s += c;
    return s;
  }
  std::uint64_t sequential() const noexcept { return sequential_; }
  const std::vector<std::vector<std::uint64_t>>& per_point() const noexcept { return per_point_; }

 private:
  std::vector<std::vector<std::uint64_t>> per_point_;
  std::uint64_t sequential_ = 0;
};

/// Counted propagator work of one cycle, used to model parallel runtime.
struct WorkModel {
  std::vector<Index> intervals;                 // per level, level 0 = fine
  std::vector<std::vector<double>> per_point;   // distributed applications per level and point
  double sequential_phi = 0.0;                  // replicated coarsest solve, per cycle
  std::vector<double> level_cost;               // cost units per application; empty = all 1

  double cost(Index level) const {
    return level < level_cost.size() ? level_cost[level] : 1.0;
  }
  Index coarsest() const noexcept { return intervals.size() - 1; }

  double level_total(Index level) const {
    double s = 0.0;
    for (double c : per_point.at(level)) s += c;
    return s;
  }
};

/// Per-cycle difference of two counter snapshots.
inline WorkModel make_work_model(const std::vector<Index>& intervals, const PhiCounter& before,
                                 const PhiCounter& after, double cycles = 1.0) {
  WorkModel wm;
  wm.intervals = intervals;
  for (Index l = 0; l < intervals.size(); ++l) {
    const auto& a = after.per_point()[l];
    const auto& b = before.per_point()[l];
    std::vector<double> d(a.size());
    for (Index i = 0; i < a.size(); ++i) d[i] = static_cast<double>(a[i] - b[i]) / cycles;
    wm.per_point.push_back(std::move(d));
  }
  wm.sequential_phi = static_cast<double>(after.sequential() - before.sequential()) / cycles;
  return wm;
}

/// Cost of one cycle on the critical path: for every level the busiest
/// worker's share, plus the replicated sequential coarsest solve counted once.
inline double critical_path_cost(const WorkModel& work, Index num_workers) {
  const TimePartition part(work.intervals, num_workers);
  double total = work.sequential_phi * work.cost(work.coarsest());
  for (Index l = 0; l < work.intervals.size(); ++l) {
    double busiest = 0.0;
    for (Index w = 0; w < num_workers; ++w) {
      const IndexRange r = part.range(l, w);
      double s = 0.0;
      for (Index i = r.begin; i < r.end; ++i) s += work.per_point[l][i];
      busiest = std::max(busiest, s);
    }
    total += busiest * work.cost(l);
  }
  return total;
}

/// Sequential time-stepping cost (Nt fine steps) over the modelled parallel
/// cost of `iters` cycles on `num_workers` workers.
inline double estimate_speedup(const WorkModel& work, Index num_workers, Index iters) {
  if (iters < 1) throw ValidationError("speedup estimate needs at least one iteration");
  const double sequential = static_cast<double>(work.intervals.front()) * work.cost(0);
  return sequential / (static_cast<double>(iters) * critical_path_cost(work, num_workers));
}

}  // namespace pint
