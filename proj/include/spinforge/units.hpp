#pragma once

#include <numbers>

// Internal quantities are SI with angular frequencies in rad/s. The only
// place ordinary frequencies (Hz, kHz) enter or leave is through these helpers.
namespace spinforge::units {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double khz_to_angular(double khz) { return kTwoPi * khz * 1e3; }
constexpr double angular_to_khz(double w) { return w / kTwoPi * 1e-3; }
constexpr double hz_to_angular(double hz) { return kTwoPi * hz; }
constexpr double angular_to_hz(double w) { return w / kTwoPi; }

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

constexpr double gauss_to_tesla(double g) { return g * 1e-4; }
constexpr double angstrom_to_m(double a) { return a * 1e-10; }
constexpr double m_to_cm(double m) { return m * 1e2; }

constexpr double us(double v) { return v * 1e-6; }
constexpr double ms(double v) { return v * 1e-3; }
constexpr double minutes(double v) { return v * 60.0; }

}  // namespace spinforge::units

namespace spinforge::constants {

// CODATA 2018
inline constexpr double kMu0Over4Pi = 1.00000000055e-7;  // T^2 m^3 / J
inline constexpr double kBohrMagneton = 9.2740100783e-24;  // J/T
inline constexpr double kNuclearMagneton = 5.0507837461e-27;  // J/T
inline constexpr double kPlanck = 6.62607015e-34;  // J s

// Nuclear g-factors (spin-1/2 species)
inline constexpr double kGHydrogen = 5.5856946893;
inline constexpr double kGSilicon29 = -1.11058;
inline constexpr double kGYttrium89 = -0.2748308;

// Proton gyromagnetic ratio gamma/2pi in Hz/T.
inline constexpr double kGammaHydrogenHzPerT = kGHydrogen * kNuclearMagneton / kPlanck;

// Microwave pi-pulse length on the electron; timing metadata only.
inline constexpr double kPiPulseDuration = 31e-9;

// Cavity figures carried for reports only.
inline constexpr double kCavityQ = 4.4e4;
inline constexpr double kCavityCouplingEfficiency = 0.19;

}  // namespace spinforge::constants
