#include <cmath>
#include <random>

#include "doctest.h"
#include "spinforge/errors.hpp"
#include "spinforge/hyperfine.hpp"
#include "spinforge/units.hpp"

using namespace spinforge;
using units::angular_to_khz;

namespace {

constexpr double kDeg = 180.0 / M_PI;

HyperfineParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> par(-120, 120), perp(0, 120), larmor(150, 1200);
  return HyperfineParams::from_khz(par(rng), perp(rng), larmor(rng));
}

}  // namespace

TEST_CASE("conditional precession frequencies") {
  const auto c = precession(reference_params());
  // sqrt((567.4 +- 19.4)^2 + 50.5^2) kHz, evaluated by hand
  CHECK(angular_to_khz(c.omega_plus) == doctest::Approx(588.97).epsilon(2e-5));
  CHECK(angular_to_khz(c.omega_minus) == doctest::Approx(550.32).epsilon(2e-5));
  CHECK(c.m_plus.norm() == doctest::Approx(1.0));
  CHECK(c.m_minus.norm() == doctest::Approx(1.0));
}

TEST_CASE("no transverse coupling gives parallel z axes") {
  const auto c = precession(HyperfineParams::from_khz(30, 0, 500));
  CHECK(c.m_plus.z() == doctest::Approx(1.0));
  CHECK(c.m_minus.z() == doctest::Approx(1.0));
  CHECK(c.gamma_axes == doctest::Approx(0.0));
}

TEST_CASE("conditional Hamiltonians are the electron blocks of the full Hamiltonian") {
  const auto p = reference_params();
  const auto h = conditional_hamiltonians(p);
  const CMatrix full = hamiltonian(p);
  CHECK(max_abs(full.block(0, 0, 2, 2) - h.h_plus) < 1e-9);
  CHECK(max_abs(full.block(2, 2, 2, 2) - h.h_minus) < 1e-9);
  CHECK(max_abs(full.block(0, 2, 2, 2)) == 0.0);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(HyperfineParams(1.0, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(HyperfineParams(1.0, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(dd_block(reference_params(), -1e-6), ArgumentError);
}

TEST_CASE("strong-field resonance near the measured dip") {
  const auto t = resonance_times(reference_params(), 2);
  REQUIRE(t.size() == 3);
  CHECK(t[0] == doctest::Approx(0.875e-6).epsilon(0.01));
  CHECK(t[1] == doctest::Approx(3 * t[0]));
  CHECK(t[2] == doctest::Approx(5 * t[0]));

  const auto p = reference_params();
  const auto doubled = HyperfineParams(2 * p.a_par, 2 * p.a_perp, 2 * p.omega_l);
  CHECK(resonance_times(doubled, 0)[0] == doctest::Approx(0.5 * t[0]));
}

TEST_CASE("rotation per pulse at the refined resonance") {
  const auto p = reference_params();
  const auto ref = refine_resonance(p, 0);
  REQUIRE(ref.bracketed);
  const auto block = dd_block(p, 0.5 * ref.spacing);
  CHECK(block.alpha * kDeg == doctest::Approx(10.2).epsilon(0.2 / 10.2));
  CHECK(block.alpha == doctest::Approx(alpha_closed_form(p)).epsilon(0.02));
  CHECK(resonant_alpha(p) == doctest::Approx(block.alpha).epsilon(1e-12));
  CHECK(std::abs(antiparallel_residual(p, 0.5 * ref.spacing)) < 1e-3);

  // q+ and q- antiparallel; their z tilt is of order A_par A_perp / omega_L^2
  const double dot = block.q_plus.axis().dot(block.q_minus.axis());
  CHECK(dot < -0.999);
  const double tilt = std::abs(block.q_plus.axis().z());
  const double scale = std::abs(p.a_par) * p.a_perp / (p.omega_l * p.omega_l);
  CHECK(tilt > 0.5 * scale);
  CHECK(tilt < 2.0 * scale);
}

TEST_CASE("tiny spacing gives vanishing rotation") {
  const auto block = dd_block(reference_params(), 1e-13);
  CHECK(block.alpha < 1e-6);
}

TEST_CASE("no transverse coupling reduces the residual to a cosine") {
  const auto p = HyperfineParams::from_khz(25, 0, 400);
  const auto c = precession(p);
  for (double tau : {0.1e-6, 0.4e-6, 1.3e-6}) {
    const double expect = std::cos(0.5 * (c.omega_plus + c.omega_minus) * tau);
    CHECK(antiparallel_residual(p, tau) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("axis-angle W matches the explicit 2x2 product chain") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> t(0.05e-6, 3e-6);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_params(rng);
    const double tau = t(rng);
    const auto h = conditional_hamiltonians(p);
    const CMatrix up = expm_hermitian(h.h_plus, tau), um = expm_hermitian(h.h_minus, tau);
    const auto block = dd_block(p, tau);
    CHECK(phase_distance(block.q_plus.matrix(), up * um * um * up) < 1e-9);
    CHECK(phase_distance(block.q_minus.matrix(), um * up * up * um) < 1e-9);
  }
}

TEST_CASE("fast XY-N propagator matches the brute-force product") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> t(0.05e-6, 3e-6);
  std::uniform_int_distribution<int> half(1, 16);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const auto p = random_params(rng);
    const double tau = t(rng);
    const int n = 2 * half(rng);
    worst = std::max(worst, max_abs(xyn_propagator(p, tau, n) - xyn_propagator_bruteforce(p, tau, n)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("XY-N propagator is unitary and electron block diagonal") {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_params(rng);
    const CMatrix u = xyn_propagator(p, 0.7e-6, 16);
    CHECK(max_abs(u * u.adjoint() - CMatrix::Identity(4, 4)) < 1e-10);
    CHECK(max_abs(u.block(0, 2, 2, 2)) < 1e-10);
    CHECK(max_abs(u.block(2, 0, 2, 2)) < 1e-10);
  }
  CHECK_THROWS_AS(xyn_propagator(reference_params(), 1e-6, 7), ArgumentError);
  CHECK_THROWS_AS(xyn_propagator_bruteforce(reference_params(), 1e-6, 0), ArgumentError);
}

TEST_CASE("XY-8 approaches a maximally entangling rotation") {
  const auto p = reference_params();
  const double tau = 0.5 * refine_resonance(p, 0).spacing;
  const double total = 8 * dd_block(p, tau).alpha * kDeg;
  CHECK(total == doctest::Approx(81.6).epsilon(0.02));
  CHECK(entangling_pulse_count(p, tau) == 8);
}

TEST_CASE("refined resonance tracks the strong-field formula in a strong field") {
  for (double larmor : {1100.0, 2000.0}) {
    const auto p = HyperfineParams::from_khz(19.4, 50.5, larmor);
    const double strong = resonance_times(p, 0)[0];
    const auto ref = refine_resonance(p, 0);
    CHECK(ref.bracketed);
    CHECK(std::abs(ref.spacing / strong - 1) < 0.005);
  }
}

// Registered as its own ctest entry.
TEST_CASE("threshold: refined resonance within 0.5 percent once the field exceeds five times the coupling") {
  const double coupling = std::hypot(19.4, 50.5);
  for (double factor : {5.5, 7.0, 567.4 / coupling}) {
    const auto p = HyperfineParams::from_khz(19.4, 50.5, factor * coupling);
    const double strong = resonance_times(p, 0)[0];
    const auto ref = refine_resonance(p, 0);
    CHECK(ref.bracketed);
    CHECK(std::abs(ref.spacing / strong - 1) < 0.005);
  }
}
