#pragma once

#include <numbers>

// CODATA-2018 values, 9 significant digits.
namespace cavion::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double hbar = 1.05457182e-34;          // J s
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double epsilon0 = 8.85418781e-12;      // F/m
inline constexpr double speed_of_light = 299792458.0;   // m/s
inline constexpr double bohr_magneton = 9.27401008e-24; // J/T
inline constexpr double boltzmann = 1.380649e-23;       // J/K
inline constexpr double elementary_charge = 1.60217663e-19; // C

inline constexpr double gauss = 1e-4;                   // T
inline constexpr double millielectronvolt = 1e-3 * elementary_charge;

} // namespace cavion::constants

namespace cavion {

// Rates are stored as angular frequencies. Anything a user types or reads is
// quoted as "2pi x Hz".
constexpr double angular(double hz) { return constants::two_pi * hz; }
constexpr double hertz(double rad_per_s) { return rad_per_s / constants::two_pi; }

} // namespace cavion
