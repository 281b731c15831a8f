#include "spinforge/hyperfine.hpp"

#include <cmath>

#include "spinforge/errors.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

HyperfineParams::HyperfineParams(double a_par_, double a_perp_, double omega_l_)
    : a_par(a_par_), a_perp(a_perp_), omega_l(omega_l_) {
  if (!std::isfinite(a_par) || !std::isfinite(a_perp) || !std::isfinite(omega_l))
    throw DomainError("HyperfineParams: non-finite value");
  if (a_perp < 0) throw DomainError("HyperfineParams: a_perp must be >= 0");
  if (omega_l <= 0) throw DomainError("HyperfineParams: omega_l must be > 0");
}

HyperfineParams HyperfineParams::from_khz(double a_par_khz, double a_perp_khz, double omega_l_khz) {
  return {units::khz_to_angular(a_par_khz), units::khz_to_angular(a_perp_khz),
          units::khz_to_angular(omega_l_khz)};
}

HyperfineParams HyperfineParams::with_larmor_shift(double delta) const {
  return {a_par, a_perp, omega_l + delta};
}

HyperfineParams reference_params() { return HyperfineParams::from_khz(19.4, 50.5, 567.4); }

ConditionalPrecession precession(const HyperfineParams& p) {
  ConditionalPrecession c;
  const double zp = p.omega_l + p.a_par, zm = p.omega_l - p.a_par;
  c.omega_plus = std::hypot(zp, p.a_perp);
  c.omega_minus = std::hypot(zm, p.a_perp);
  c.m_plus = Vec3(p.a_perp, 0, zp) / c.omega_plus;
  c.m_minus = Vec3(-p.a_perp, 0, zm) / c.omega_minus;
  c.gamma_axes = std::acos(std::clamp(c.m_plus.dot(c.m_minus), -1.0, 1.0));
  return c;
}

ConditionalHamiltonians conditional_hamiltonians(const HyperfineParams& p) {
  ConditionalHamiltonians out;
  out.h_plus = (p.a_par + p.omega_l) * pauli::sz() + p.a_perp * pauli::sx();
  out.h_minus = (-p.a_par + p.omega_l) * pauli::sz() - p.a_perp * pauli::sx();
  out.precession = precession(p);
  return out;
}

CMatrix hamiltonian(const HyperfineParams& p) {
  const auto h = conditional_hamiltonians(p);
  return tensor(pauli::proj_up(), h.h_plus) + tensor(pauli::proj_down(), h.h_minus);
}

CMatrix free_propagator(const HyperfineParams& p, double t) { return expm_hermitian(hamiltonian(p), t); }

CMatrix electron_pi_x() { return tensor(pauli::x(), pauli::identity()); }

CMatrix electron_rotation(const Vec3& axis, double angle) {
  return tensor(AxisAngle(axis, angle).matrix(), pauli::identity());
}

DDBlockResult dd_block(const HyperfineParams& p, double tau) {
  if (!(tau >= 0)) throw ArgumentError("dd_block: tau must be >= 0");
  const auto c = precession(p);
  DDBlockResult r;
  r.tau = tau;
  r.u_plus = AxisAngle(c.m_plus, c.omega_plus * tau);
  r.u_minus = AxisAngle(c.m_minus, c.omega_minus * tau);
  r.v_plus = compose_axis_angle(r.u_plus, r.u_minus);
  r.v_minus = compose_axis_angle(r.u_minus, r.u_plus);
  r.q_plus = compose_axis_angle(r.v_plus, r.v_minus);
  r.q_minus = compose_axis_angle(r.v_minus, r.v_plus);
  r.alpha = 0.5 * r.q_plus.angle();
  const CMatrix u = free_propagator(p, tau);
  r.v_exact = u * electron_pi_x() * u;
  r.w_exact = r.v_exact * r.v_exact;
  return r;
}

std::vector<double> resonance_times(const HyperfineParams& p, int m_max) {
  if (m_max < 0) throw ArgumentError("resonance_times: m_max must be >= 0");
  const double w0 = precession(p).omega0();
  std::vector<double> out;
  out.reserve(m_max + 1);
  for (int m = 0; m <= m_max; ++m) out.push_back((M_PI + 2.0 * M_PI * m) / w0);
  return out;
}

double antiparallel_residual(const HyperfineParams& p, double tau) {
  if (!(tau > 0)) throw ArgumentError("antiparallel_residual: tau must be > 0");
  const auto c = precession(p);
  const double hp = 0.5 * c.omega_plus * tau, hm = 0.5 * c.omega_minus * tau;
  return std::cos(hp) * std::cos(hm) - std::sin(hp) * std::sin(hm) * std::cos(c.gamma_axes);
}

RefinedResonance refine_resonance(const HyperfineParams& p, int m, double rel_tol) {
  const double guess = 0.5 * resonance_times(p, m).back();
  double lo = 0.9 * guess, hi = 1.1 * guess;
  double flo = antiparallel_residual(p, lo);
  const double fhi = antiparallel_residual(p, hi);
  RefinedResonance out;
  if (flo * fhi > 0) {
    out.spacing = 2.0 * guess;
    return out;
  }
  out.bracketed = true;
  while (hi - lo > rel_tol * guess && out.iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    const double fm = antiparallel_residual(p, mid);
    if (fm == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    ++out.iterations;
  }
  out.spacing = lo + hi;
  return out;
}

double alpha_closed_form(const HyperfineParams& p) {
  const auto c = precession(p);
  return 2.0 * p.a_perp * p.omega_l / (c.omega_plus * c.omega_minus);
}

double resonant_alpha(const HyperfineParams& p) {
  const double tau = 0.5 * refine_resonance(p, 0).spacing;
  const auto c = precession(p);
  const AxisAngle up(c.m_plus, c.omega_plus * tau), um(c.m_minus, c.omega_minus * tau);
  const AxisAngle vp = compose_axis_angle(up, um), vm = compose_axis_angle(um, up);
  return 0.5 * compose_axis_angle(vp, vm).angle();
}

namespace {

// Integer power of an SU(2) block through its axis-angle. Both the -1 that
// the projective axis-angle drops and the 2 pi wraps of k theta are kept.
CMatrix su2_power(const CMatrix& w, int k) {
  const AxisAngle aa = AxisAngle::from_matrix(w);
  const double s = (aa.matrix().adjoint() * w).trace().real() >= 0 ? 1.0 : -1.0;
  const double sign = (k % 2 != 0) ? s : 1.0;
  const double h = 0.5 * aa.angle() * k;
  const Vec3& n = aa.axis();
  const CMatrix ns = n[0] * pauli::x() + n[1] * pauli::y() + n[2] * pauli::z();
  return sign * (std::cos(h) * pauli::identity() - kI * std::sin(h) * ns);
}

}  // namespace

CMatrix xyn_propagator(const HyperfineParams& p, double tau, int n_pulses) {
  if (n_pulses < 2 || n_pulses % 2 != 0) throw ArgumentError("xyn_propagator: n_pulses must be even and >= 2");
  const auto h = conditional_hamiltonians(p);
  const CMatrix up = expm_hermitian(h.h_plus, tau);
  const CMatrix um = expm_hermitian(h.h_minus, tau);
  const CMatrix w_plus = up * um * um * up;
  const CMatrix w_minus = um * up * up * um;
  const int k = n_pulses / 2;
  return tensor(pauli::proj_up(), su2_power(w_plus, k)) + tensor(pauli::proj_down(), su2_power(w_minus, k));
}

CMatrix xyn_propagator_bruteforce(const HyperfineParams& p, double tau, int n_pulses) {
  if (n_pulses < 2 || n_pulses % 2 != 0) throw ArgumentError("xyn_propagator: n_pulses must be even and >= 2");
  const CMatrix u = free_propagator(p, tau);
  const CMatrix v = u * electron_pi_x() * u;
  CMatrix out = CMatrix::Identity(4, 4);
  for (int k = 0; k < n_pulses; ++k) out = v * out;
  return out;
}

int entangling_pulse_count(const HyperfineParams& p, double tau) {
  const double alpha = dd_block(p, tau).alpha;
  if (alpha <= 0) return 2;
  const double target = M_PI / (2.0 * alpha);
  const int n = 2 * static_cast<int>(std::lround(0.5 * target));
  return std::max(2, n);
}

}  // namespace spinforge
