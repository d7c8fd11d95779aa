#pragma once

// Material laws of the cable: conductivity per region and the reluctivity
// nu(B) = H / B, either constant or a monotone cubic spline through a B-H
// table.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pint/eddy/mesh.hpp"
#include "pint/error.hpp"

namespace pint::eddy {

inline constexpr double mu0 = 4.0e-7 * std::numbers::pi;
inline constexpr double nu0 = 1.0 / mu0;

struct BhTable {
  std::vector<double> b;  // tesla
  std::vector<double> h;  // A/m
};

/// Built-in curve resembling non-oriented electrical steel; data/steel_bh.txt
/// holds the same samples.
inline BhTable default_steel_table() {
  return {{0.0, 0.5, 0.9, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 2.0, 2.2},
          {0.0, 50.0, 100.0, 150.0, 200.0, 300.0, 500.0, 1000.0, 2500.0, 5000.0, 10000.0,
           50000.0, 200000.0}};
}

/// Two whitespace-separated columns "B H"; '#' starts a comment line.
inline BhTable read_bh_table(std::istream& is) {
  BhTable t;
  std::string line;
  while (std::getline(is, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '#') continue;
    std::istringstream ss(line);
    double b = 0.0, h = 0.0;
    if (!(ss >> b >> h)) throw ValidationError("B-H table: malformed line '" + line + "'");
    t.b.push_back(b);
    t.h.push_back(h);
  }
  return t;
}

class ReluctivityModel {
 public:
  static ReluctivityModel constant(double nu) {
    if (!(nu > 0.0)) throw ValidationError("reluctivity must be positive");
    ReluctivityModel m;
    m.constant_ = nu;
    return m;
  }

  /// Fritsch-Carlson monotone cubic through nu_k = H_k / B_k. A leading
  /// B = 0 sample takes the value of the first positive sample. Beyond the
  /// last sample nu continues linearly with the end slope, capped at `cap`.
  static ReluctivityModel from_bh_table(const BhTable& table, double cap = nu0) {
    if (table.b.size() != table.h.size() || table.b.size() < 2) {
      throw ValidationError("B-H table needs at least two samples of equal length");
    }
    ReluctivityModel m;
    m.cap_ = cap;
    for (std::size_t k = 0; k < table.b.size(); ++k) {
      const double b = table.b[k], h = table.h[k];
      if (k > 0 && !(b > table.b[k - 1])) {
        throw ValidationError("B-H table: B must be strictly increasing");
      }
      if (b == 0.0) {
        if (k != 0) throw ValidationError("B-H table: B = 0 only allowed first");
        continue;
      }
      if (!(b > 0.0) || !(h > 0.0)) throw ValidationError("B-H table: samples must be positive");
      m.knots_.push_back(b);
      m.values_.push_back(h / b);
    }
    if (table.b.front() == 0.0) {
      m.knots_.insert(m.knots_.begin(), 0.0);
      m.values_.insert(m.values_.begin(), m.values_.front());
    }
    if (m.knots_.size() < 2) throw ValidationError("B-H table needs two distinct samples");
    for (double v : m.values_) {
      if (v > cap) throw ValidationError("B-H table: reluctivity exceeds the cap");
    }
    m.slopes_ = pchip_slopes(m.knots_, m.values_);
    return m;
  }

  bool is_constant() const noexcept { return knots_.empty(); }

  double nu(double b) const {
    if (is_constant()) return constant_;
    b = std::max(b, 0.0);
    if (b >= knots_.back()) {
      return std::min(cap_, values_.back() + slopes_.back() * (b - knots_.back()));
    }
    const std::size_t k = segment(b);
    return hermite(k, b, false);
  }

  double dnu_db(double b) const {
    if (is_constant()) return 0.0;
    b = std::max(b, 0.0);
    if (b >= knots_.back()) {
      return values_.back() + slopes_.back() * (b - knots_.back()) < cap_ ? slopes_.back() : 0.0;
    }
    return hermite(segment(b), b, true);
  }

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  static std::vector<double> pchip_slopes(const std::vector<double>& x,
                                          const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> h(n - 1), delta(n - 1), d(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      h[k] = x[k + 1] - x[k];
      delta[k] = (y[k + 1] - y[k]) / h[k];
    }
    if (n == 2) {
      d[0] = d[1] = delta[0];
      return d;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (delta[k - 1] * delta[k] > 0.0) {
        const double w1 = 2.0 * h[k] + h[k - 1];
        const double w2 = h[k] + 2.0 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (s * d0 <= 0.0) return 0.0;
      if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return s;
    };
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
  }

  std::size_t segment(double b) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), b);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - knots_.begin() - 1, 0));
  }

  double hermite(std::size_t k, double b, bool derivative) const {
    const double h = knots_[k + 1] - knots_[k];
    const double s = (b - knots_[k]) / h;
    const double y0 = values_[k], y1 = values_[k + 1];
    const double m0 = slopes_[k] * h, m1 = slopes_[k + 1] * h;
    if (!derivative) {
      const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
      const double h10 = s * (1 - s) * (1 - s);
      const double h01 = s * s * (3 - 2 * s);
      const double h11 = s * s * (s - 1);
      return h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
    }
    const double d00 = 6 * s * s - 6 * s;
    const double d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -6 * s * s + 6 * s;
    const double d11 = 3 * s * s - 2 * s;
    return (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
  }

  double constant_ = nu0;
  double cap_ = nu0;
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<double> slopes_;
};

struct MaterialMap {
  std::array<double, 3> sigma{0.0, 0.0, 1.0e7};  // S/m, indexed by Region
  std::array<std::shared_ptr<const ReluctivityModel>, 3> reluctivity{
      std::make_shared<ReluctivityModel>(ReluctivityModel::constant(nu0)),
      std::make_shared<ReluctivityModel>(ReluctivityModel::constant(nu0)),
      std::make_shared<ReluctivityModel>(ReluctivityModel::from_bh_table(default_steel_table()))};

  double conductivity(Region r) const { return sigma[static_cast<std::size_t>(r)]; }
  const ReluctivityModel& nu(Region r) const { return *reluctivity[static_cast<std::size_t>(r)]; }

  bool is_linear() const {
    return std::all_of(reluctivity.begin(), reluctivity.end(),
                       [](const auto& m) { return m->is_constant(); });
  }

  /// Same conductivities with the shield frozen at its low-field reluctivity.
  MaterialMap linearized() const {
    MaterialMap m = *this;
    for (auto& r : m.reluctivity) {
      if (!r->is_constant()) r = std::make_shared<ReluctivityModel>(ReluctivityModel::constant(r->nu(0.0)));
    }
    return m;
  }

  void validate() const {
    for (double s : sigma) {
      if (!(s >= 0.0)) throw ValidationError("conductivity must be nonnegative");
    }
    if (sigma[0] != 0.0 || sigma[1] != 0.0) {
      throw ValidationError("only the shield may conduct");
    }
  }
};

}  // namespace pint::eddy
