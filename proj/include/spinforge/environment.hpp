#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "spinforge/hyperfine.hpp"
#include "spinforge/parallel.hpp"
#include "spinforge/sequences.hpp"

namespace spinforge {

// Two classical Ising-coupled dark spins: omega_L -> omega_L + 2 pi (d1 a1 + d2 a2), d = +-1.
struct DarkSpinModel {
  double a1_hz = 2250.0;
  double a2_hz = 7180.0;
  double t1_dark_1 = 5.12 * 60.0;  // s, mean dwell time
  double t1_dark_2 = 60.0;         // s

  void validate() const;
  double shift(int d1, int d2) const;  // rad/s
};

// Phase difference accumulated between the two states of a dark spin with
// coupling a_hz: 2 (2 pi a)(tau_c + 2 N tau0).
double branch_phase(double a_hz, double tau_c, double tau0, int n_pulses);

struct FourBodyOptions {
  std::optional<double> tau0;      // gate half spacing; refined from the unshifted coupling if empty
  std::optional<int> n_pulses;     // CnNOTe block length
  parallel::Exec exec = parallel::Exec::Parallel;
};

// Exact s0(tau_c) with the nuclear Larmor frequency shifted by the given dark-spin states.
SignalTrace four_body_ramsey(const HyperfineParams& p, const DarkSpinModel& dark, int d1, int d2,
                             const std::vector<double>& tau_c_grid, const FourBodyOptions& opt = {});
// Uniform average over the four dark-spin branches.
SignalTrace four_body_average(const HyperfineParams& p, const DarkSpinModel& dark,
                              const std::vector<double>& tau_c_grid, const FourBodyOptions& opt = {});

struct ReadoutPoints {
  double d2_insensitive_time = 0;
  std::vector<double> d1_readout_times;  // anti-correlated pair
  double d2_readout_time = 0;
  std::vector<double> d1_phase;  // branch_phase of d1 at each d1 readout time
  double d2_phase = 0;
};

// Times come from the exact four-branch signals: the d1 pair maximizes
// opposite-signed d1 contrast just after the d2-insensitive time, the d2
// point is a zero of d1 contrast with the largest d2 contrast.
ReadoutPoints readout_points(const DarkSpinModel& dark, const HyperfineParams& p, double tau0, int n_pulses);

struct JumpTrace {
  std::vector<double> sample_times;
  std::vector<double> populations;
  std::vector<int> hidden_d1, hidden_d2;  // +-1, simulation only
};

// Switching times of a symmetric telegraph process with the given mean
// dwell time on [0, span); an infinite lifetime gives none.
std::vector<double> telegraph_switch_times(double lifetime, double span, std::mt19937_64& rng);

struct JumpTraceConfig {
  double readout_time = 72.19e-6;  // tau_c
  int n_samples = 1490;
  double sample_period = 29.0;  // s
  double readout_noise_sigma = -1;  // < 0 selects the 98% fidelity calibration
  std::uint64_t seed = 1;
};

// Noise sigma at which a midpoint threshold between two levels separated by
// `separation` misclassifies with probability 1 - fidelity.
double noise_for_fidelity(double separation, double fidelity);

// Branch populations at a readout time, indexed [(d1 < 0) * 2 + (d2 < 0)].
std::array<double, 4> branch_populations(const HyperfineParams& p, const DarkSpinModel& dark, double tau_c,
                                         const FourBodyOptions& opt = {});

JumpTrace jump_trace(const DarkSpinModel& dark, const HyperfineParams& p, const JumpTraceConfig& cfg,
                     const FourBodyOptions& opt = {});

struct LifetimeEstimate {
  double t1 = 0;  // s
  double ci_low = 0, ci_high = 0;  // central 68%
  double t1_uncorrected = 0;  // without misclassification correction
  int n_events = 0;
  double threshold = 0;
  double misclassification = 0;
  bool low_confidence = false;
  std::vector<double> dwell_times;  // interior dwells, s
};

// Threshold at the valley between the two population modes (Otsu), count
// jumps, and convert the per-sample jump rate into a dwell time after
// removing noise-induced jumps. The misclassification rate comes from the
// lag-1 and lag-2 autocorrelations of the thresholded trace.
LifetimeEstimate estimate_lifetime(const JumpTrace& trace, std::optional<double> threshold = std::nullopt);

struct ConcentrationPosterior {
  double v_obs = 0;                  // cm^3
  std::vector<double> grid;          // cm^-3
  std::vector<double> density;       // per cm^-3
  std::vector<double> cdf;
  double mode = 0;                   // analytic stationary point
  double grid_mode = 0;              // argmax on the grid
  std::pair<double, double> ci68;    // central, CDF at 0.16 / 0.84
  std::pair<double, double> hpd68;   // highest density
};

// Uniform prior in rho, likelihood P0^(m-n) (1-P0)^n with P0 = exp(-rho V).
ConcentrationPosterior concentration_posterior(int n_obs, int m_trials, double r_obs_m, int grid_points = 20001);

double observable_volume_cm3(double r_obs_m);

// Detection radius relative to `reference_radius` for a coupling with total
// rotation n alpha against a detection threshold rotation (alpha ~ 1/r^3).
double observable_radius(double alpha_at_detection, int n_pulses, double threshold_rotation,
                         double reference_radius = 2e-9);

}  // namespace spinforge
