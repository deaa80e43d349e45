#pragma once

#include <span>
#include <vector>

namespace keytap {

// Direct form I second-order section, normalized so a0 = 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  static Biquad lowpass(double cutoff_hz, double q, double sample_rate);
  static Biquad peaking(double center_hz, double q, double gain_db, double sample_rate);

  // Magnitude response at frequency f.
  double magnitude(double f, double sample_rate) const;
};

// Runs the sections in order over x; zero initial state.
std::vector<double> filter_cascade(std::span<const double> x, std::span<const Biquad> sections);

// Q factors of the biquads of an even-order Butterworth low-pass.
std::vector<double> butterworth_qs(int order);

}  // namespace keytap
