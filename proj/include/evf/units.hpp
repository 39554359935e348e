#pragma once

#include <cmath>
#include <complex>
#include <numbers>

namespace evf {

using cplx = std::complex<double>;

inline constexpr double c0 = 299792458.0;          // m/s
inline constexpr double mu0 = 1.25663706212e-6;    // H/m
inline constexpr double pi = std::numbers::pi;

inline constexpr double mm = 1e-3;
inline constexpr double GHz = 1e9;
inline constexpr double MHz = 1e6;

[[nodiscard]] inline double wavenumber(double f) { return 2.0 * pi * f / c0; }

[[nodiscard]] inline double to_db(double magnitude) {
  return 20.0 * std::log10(magnitude);
}

}  // namespace evf
