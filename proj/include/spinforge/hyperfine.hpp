#pragma once

#include <vector>

#include "spinforge/qmat.hpp"

namespace spinforge {

// Secular coupling H = 2 S_z (A_par I_z + A_perp I_x) + omega_L I_z.
// All three values are angular frequencies (rad/s).
struct HyperfineParams {
  double a_par = 0.0;
  double a_perp = 0.0;
  double omega_l = 1.0;

  HyperfineParams() = default;
  HyperfineParams(double a_par_, double a_perp_, double omega_l_);
  static HyperfineParams from_khz(double a_par_khz, double a_perp_khz, double omega_l_khz);

  // Same coupling at a shifted nuclear Larmor frequency.
  HyperfineParams with_larmor_shift(double delta) const;
};

// Reference coupling, ordinary frequencies (19.4, 50.5, 567.4) kHz, A_par > 0.
HyperfineParams reference_params();

struct ConditionalPrecession {
  double omega_plus = 0.0;
  double omega_minus = 0.0;
  Vec3 m_plus;
  Vec3 m_minus;
  double gamma_axes = 0.0;

  double omega0() const { return 0.5 * (omega_plus + omega_minus); }
  double omega_delta() const { return 0.5 * (omega_plus - omega_minus); }
};

struct ConditionalHamiltonians {
  CMatrix h_plus;
  CMatrix h_minus;
  ConditionalPrecession precession;
};

ConditionalHamiltonians conditional_hamiltonians(const HyperfineParams& p);
ConditionalPrecession precession(const HyperfineParams& p);

// Full 4x4 (electron x nucleus) Hamiltonian and its propagator exp(-iHt).
CMatrix hamiltonian(const HyperfineParams& p);
CMatrix free_propagator(const HyperfineParams& p, double t);

// Electron pi pulse X (x) I and a general electron rotation on the 4x4 space.
CMatrix electron_pi_x();
CMatrix electron_rotation(const Vec3& axis, double angle);

struct DDBlockResult {
  double tau = 0.0;
  AxisAngle u_plus, u_minus;  // free precession for tau
  AxisAngle v_plus, v_minus;  // V_+- = U_+- U_-+
  AxisAngle q_plus, q_minus;  // W_+- = V_+- V_-+, angle 2 alpha
  double alpha = 0.0;
  CMatrix v_exact;  // U X U, 4x4
  CMatrix w_exact;  // V^2, 4x4
};

// tau is the free evolution on each side of the pi pulse (pulse spacing 2 tau).
DDBlockResult dd_block(const HyperfineParams& p, double tau);

// Strong-field resonances: pulse spacings 2 tau = (pi + 2 pi m) / omega0, m = 0..m_max.
std::vector<double> resonance_times(const HyperfineParams& p, int m_max);

double antiparallel_residual(const HyperfineParams& p, double tau);

struct RefinedResonance {
  double spacing = 0.0;  // 2 tau
  int iterations = 0;
  bool bracketed = false;
};

// Root of antiparallel_residual by bisection within +-10% of the strong-field spacing.
RefinedResonance refine_resonance(const HyperfineParams& p, int m, double rel_tol = 1e-6);

double alpha_closed_form(const HyperfineParams& p);
// Alpha at the refined m = 0 resonance from axis-angle algebra only.
double resonant_alpha(const HyperfineParams& p);

// (U X_e U)^N for even N as a 4x4 unitary, built from W^(N/2).
CMatrix xyn_propagator(const HyperfineParams& p, double tau, int n_pulses);
// Explicit product of N blocks; the reference path for xyn_propagator.
CMatrix xyn_propagator_bruteforce(const HyperfineParams& p, double tau, int n_pulses);

// Even pulse count nearest pi / (2 alpha) at the given spacing, at least 2.
int entangling_pulse_count(const HyperfineParams& p, double tau);

}  // namespace spinforge
