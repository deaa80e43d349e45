#include "keytap/biquad.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "keytap/errors.hpp"

namespace keytap {

namespace {

Biquad normalized(double b0, double b1, double b2, double a0, double a1, double a2) {
  return Biquad{b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

}  // namespace

Biquad Biquad::lowpass(double cutoff_hz, double q, double sample_rate) {
  if (!(cutoff_hz > 0 && cutoff_hz < sample_rate / 2) || !(q > 0)) {
    throw ContractError("lowpass: cutoff must lie in (0, Nyquist) and q > 0");
  }
  const double w0 = 2 * std::numbers::pi * cutoff_hz / sample_rate;
  const double c = std::cos(w0), alpha = std::sin(w0) / (2 * q);
  return normalized((1 - c) / 2, 1 - c, (1 - c) / 2, 1 + alpha, -2 * c, 1 - alpha);
}

Biquad Biquad::peaking(double center_hz, double q, double gain_db, double sample_rate) {
  if (!(center_hz > 0 && center_hz < sample_rate / 2) || !(q > 0)) {
    throw ContractError("peaking: center must lie in (0, Nyquist) and q > 0");
  }
  const double a = std::pow(10.0, gain_db / 40.0);
  const double w0 = 2 * std::numbers::pi * center_hz / sample_rate;
  const double c = std::cos(w0), alpha = std::sin(w0) / (2 * q);
  return normalized(1 + alpha * a, -2 * c, 1 - alpha * a, 1 + alpha / a, -2 * c, 1 - alpha / a);
}

double Biquad::magnitude(double f, double sample_rate) const {
  const std::complex<double> z1 = std::polar(1.0, -2 * std::numbers::pi * f / sample_rate);
  const std::complex<double> z2 = z1 * z1;
  return std::abs((b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2));
}

std::vector<double> filter_cascade(std::span<const double> x, std::span<const Biquad> sections) {
  std::vector<double> y(x.begin(), x.end());
  for (const Biquad& s : sections) {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
      x2 = x1;
      x1 = in;
      y2 = y1;
      y1 = out;
      v = out;
    }
  }
  return y;
}

std::vector<double> butterworth_qs(int order) {
  if (order < 2 || order % 2 != 0) throw ContractError("butterworth order must be even and >= 2");
  std::vector<double> qs;
  for (int k = 1; k <= order / 2; ++k) {
    qs.push_back(1.0 / (2.0 * std::cos((2.0 * k - 1.0) * std::numbers::pi / (2.0 * order))));
  }
  return qs;
}

}  // namespace keytap
