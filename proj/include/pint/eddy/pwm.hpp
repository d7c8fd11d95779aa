#pragma once

// Pulse-width-modulated excitation: a sawtooth carrier with n teeth per
// period T compared against |sin(2 pi t / T)|.

#include <cmath>
#include <numbers>

#include "pint/error.hpp"

namespace pint::eddy {

enum class Waveform { Pwm, Sine };

struct PwmSource {
  double period = 0.02;     // T, seconds
  int teeth = 1100;         // n
  double r0 = 1e-3;         // wire radius, metres
  double amplitude = 1.0;   // total wire current scale, amperes
  Waveform waveform = Waveform::Pwm;

  void validate() const {
    if (!(period > 0.0)) throw ValidationError("PWM period must be positive");
    if (teeth < 1) throw ValidationError("PWM needs at least one tooth");
    if (!(r0 > 0.0)) throw ValidationError("wire radius must be positive");
  }
};

/// s_n(t) = frac(n t / T).
inline double sawtooth(double t, double period, int teeth) {
  const double x = static_cast<double>(teeth) * t / period;
  return x - std::floor(x);
}

/// sign(sin(2 pi t/T)) where the sawtooth lies strictly below |sin|, else 0.
/// Both terms are T-periodic, so t is reduced modulo T first.
inline double pwm_excitation(double t, const PwmSource& src) {
  const double tr = std::fmod(t, src.period);
  const double s = std::sin(2.0 * std::numbers::pi * tr / src.period);
  if (sawtooth(tr, src.period, src.teeth) - std::abs(s) < 0.0) return s > 0.0 ? 1.0 : -1.0;
  return 0.0;
}

/// Normalized waveform f(t) driving the wire current.
inline double excitation(double t, const PwmSource& src) {
  if (src.waveform == Waveform::Sine) {
    return std::sin(2.0 * std::numbers::pi * t / src.period);
  }
  return pwm_excitation(t, src);
}

}  // namespace pint::eddy
