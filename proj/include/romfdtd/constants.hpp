#pragma once

#include <cmath>

namespace romfdtd {

inline constexpr double kEps0 = 8.8541878128e-12;  // F/m
inline constexpr double kMu0 = 1.25663706212e-6;   // H/m
inline const double kC0 = 1.0 / std::sqrt(kEps0 * kMu0);
inline constexpr double kPi = 3.14159265358979323846;

}  // namespace romfdtd
