#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "spinforge/errors.hpp"
#include "spinforge/locate.hpp"
#include "spinforge/units.hpp"

using namespace spinforge;
using constants::kGammaHydrogenHzPerT;

namespace {

const std::string kData = SPINFORGE_DATA_DIR;

const GTensorSet& tensors() {
  static const GTensorSet g = load_g_tensors(kData + "/g_tensor_er_yso.json");
  return g;
}

const std::vector<FieldSetting>& settings() {
  static const auto s = load_field_settings(kData + "/field_settings.json");
  return s;
}

// Noiseless observations generated by the forward model at `truth`.
std::vector<Observation> synthetic(const Position& truth) {
  std::vector<Observation> out;
  for (const auto& f : settings()) {
    const auto m = model_observables(truth, tensors().ground, f.corrected_vector(), kGammaHydrogenHzPerT);
    out.push_back({f.id, m.omega0_khz, 0.5, m.omega_delta_khz, 0.5, m.alpha_deg, 0.3});
  }
  return out;
}

double angle_diff(double a, double b) { return std::abs(std::remainder(a - b, 360.0)); }

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = "locate_test_" + name + ".json";
  std::ofstream(path) << body;
  return path;
}

}  // namespace

TEST_CASE("shipped data files load") {
  REQUIRE(settings().size() == 4);
  CHECK(settings()[0].b_gauss == 130.0);
  CHECK(settings()[0].d_b == doctest::Approx(3.99));
  CHECK(settings()[0].sigma_theta == doctest::Approx(0.34));
  const auto obs = load_observations(kData + "/observations.json");
  REQUIRE(obs.size() == 1);
  CHECK(obs[0].omega0_khz == doctest::Approx(569.645));
  CHECK(tensors().ground.g.allFinite());
}

TEST_CASE("malformed input files name the offending key") {
  const auto bad =
      write_temp("bad_settings", R"({"field_settings": [{"id": 1, "b_gauss": -3, "theta_deg": 90, "phi_deg": 0}]})");
  try {
    load_field_settings(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key().find("b_gauss") != std::string::npos);
  }
  const auto missing = write_temp("bad_obs", R"({"observations": [{"setting_id": 1, "omega0_khz": 500}]})");
  CHECK_THROWS_AS(load_observations(missing), ConfigError);
  CHECK_THROWS_AS(load_g_tensors("does/not/exist.json"), ConfigError);
  std::remove(bad.c_str());
  std::remove(missing.c_str());
}

TEST_CASE("isotropic g with the nucleus on the field axis") {
  GTensor iso;
  const Vec3 b(0, 0, 0.013);
  const Position on_axis{10.0, 0.0, 0.0};
  const auto h = dipolar_hyperfine(on_axis, iso, b, kGammaHydrogenHzPerT);
  CHECK(h.a_perp < 1e-9 * std::abs(h.a_par));
  // A_par = (mu0/4pi) muB muN g g_n (3 - 1) / (2 r^3 hbar) with g = 2
  const double hbar = constants::kPlanck / (2 * M_PI);
  const double expect = constants::kMu0Over4Pi * constants::kBohrMagneton * constants::kNuclearMagneton * 2.0 *
                        constants::kGHydrogen * 2.0 / (2.0 * 1e-27 * hbar);
  CHECK(h.a_par == doctest::Approx(expect).epsilon(1e-9));
  CHECK(h.omega_l == doctest::Approx(2 * M_PI * kGammaHydrogenHzPerT * 0.013));
}

TEST_CASE("coupling strength scales as 1/r^6 and the ratio is r independent") {
  const auto& g = tensors().ground;
  const Vec3 b = settings()[0].corrected_vector();
  auto strength = [&](double r) {
    const auto h = dipolar_hyperfine({r, 63.0, 41.0}, g, b, kGammaHydrogenHzPerT);
    return std::pair{h.a_par * h.a_par + h.a_perp * h.a_perp, h.a_par / h.a_perp};
  };
  const auto [s10, q10] = strength(10);
  const auto [s20, q20] = strength(20);
  const auto [s40, q40] = strength(40);
  CHECK(s10 / s20 == doctest::Approx(64.0).epsilon(1e-12));
  CHECK(s20 / s40 == doctest::Approx(64.0).epsilon(1e-12));
  CHECK(q10 == doctest::Approx(q20).epsilon(1e-12));
  CHECK(q20 == doctest::Approx(q40).epsilon(1e-12));
  CHECK_THROWS_AS(dipolar_hyperfine({0.4, 10, 10}, g, b, kGammaHydrogenHzPerT), DomainError);
}

TEST_CASE("observation inversion recovers the coupling") {
  const auto p = reference_params();
  const auto o = observables_from_params(p);
  Observation obs{1, o.omega0_khz, 0.5, o.omega_delta_khz, 0.5, o.alpha_deg, 0.3};
  const auto back = hyperfine_from_observation(obs);
  CHECK(back.a_par == doctest::Approx(std::abs(p.a_par)).epsilon(0.01));
  CHECK(back.a_perp == doctest::Approx(p.a_perp).epsilon(0.02));
  CHECK(back.omega_l == doctest::Approx(p.omega_l).epsilon(0.01));
}

TEST_CASE("chi-square vanishes at the generating position and ignores order") {
  const Position truth{18.3, 72.0, 47.0};
  auto obs = synthetic(truth);
  const auto& g = tensors().ground;
  CHECK(chi_square(truth, obs, settings(), {}, g, kGammaHydrogenHzPerT) < 1e-20);
  const Position off{19.0, 70.0, 50.0};
  const double c1 = chi_square(off, obs, settings(), {}, g, kGammaHydrogenHzPerT);
  CHECK(c1 > 0);
  std::reverse(obs.begin(), obs.end());
  CHECK(chi_square(off, obs, settings(), {}, g, kGammaHydrogenHzPerT) == doctest::Approx(c1).epsilon(1e-12));
  CHECK_THROWS_AS(chi_square(off, obs, settings(), {1.0}, g, kGammaHydrogenHzPerT), DimensionError);
}

TEST_CASE("Monte Carlo model sigma") {
  const Position pos{20.0, 66.7, 49.6};
  const auto obs = synthetic(pos);
  const auto& g = tensors().ground;

  auto exact = settings();
  for (auto& f : exact) f.sigma_b = f.sigma_theta = f.sigma_phi = 0;
  for (double s : monte_carlo_sigma(pos, obs, exact, 200, 3, g, kGammaHydrogenHzPerT)) CHECK(s == 0.0);

  const auto base = monte_carlo_sigma(pos, obs, settings(), 10000, 3, g, kGammaHydrogenHzPerT);
  const auto half = monte_carlo_sigma(pos, obs, settings(), 10000, 3, g, kGammaHydrogenHzPerT, 0.5);
  const auto twice = monte_carlo_sigma(pos, obs, settings(), 10000, 3, g, kGammaHydrogenHzPerT, 2.0);
  for (size_t k = 0; k < base.size(); ++k) {
    CHECK(half[k] < base[k]);
    CHECK(twice[k] / base[k] >= 1.7);
    CHECK(twice[k] / base[k] <= 2.3);
  }

  const auto big = monte_carlo_sigma(pos, obs, settings(), 100000, 4, g, kGammaHydrogenHzPerT);
  for (size_t k = 0; k < base.size(); ++k) CHECK(big[k] == doctest::Approx(base[k]).epsilon(0.05));

  const auto serial =
      monte_carlo_sigma(pos, obs, settings(), 2000, 5, g, kGammaHydrogenHzPerT, 1.0, parallel::Exec::Serial);
  const auto par = monte_carlo_sigma(pos, obs, settings(), 2000, 5, g, kGammaHydrogenHzPerT, 1.0);
  CHECK(serial == par);
  CHECK_THROWS_AS(monte_carlo_sigma(pos, obs, settings(), 50, 5, g, kGammaHydrogenHzPerT), ArgumentError);
}

TEST_CASE("chi-square grid serial and parallel agree") {
  const auto obs = synthetic({20.0, 60.0, 40.0});
  SearchRegion reg;
  reg.r_min = 18;
  reg.r_max = 22;
  reg.angle_step = 15;
  const auto& g = tensors().ground;
  const auto a = chi_square_grid(obs, settings(), {}, reg, g, kGammaHydrogenHzPerT, parallel::Exec::Serial);
  const auto b = chi_square_grid(obs, settings(), {}, reg, g, kGammaHydrogenHzPerT);
  CHECK(a.size() == 3 * 13 * 25);
  CHECK(a == b);
}

TEST_CASE("inverse crime: noiseless synthetic data give back the position") {
  const Position truth{18.3, 72.0, 47.0};
  const auto obs = synthetic(truth);
  const int sign = model_a_par(truth, tensors().ground, settings()[0], kGammaHydrogenHzPerT) > 0 ? 1 : -1;
  LocateOptions opt;
  opt.mc_samples = 2000;
  const auto r = localize(obs, settings(), sign, SearchRegion{}, tensors().ground, kGammaHydrogenHzPerT, opt);
  CHECK(r.converged);
  CHECK(r.position.r_angstrom == doctest::Approx(truth.r_angstrom).epsilon(0.1 / truth.r_angstrom));
  CHECK(angle_diff(r.position.theta_deg, truth.theta_deg) < 0.5);
  CHECK(angle_diff(r.position.phi_deg, truth.phi_deg) < 0.5);
  CHECK(r.dof == 9);

  const auto again = localize(obs, settings(), sign, SearchRegion{}, tensors().ground, kGammaHydrogenHzPerT, opt);
  CHECK(again.position.r_angstrom == r.position.r_angstrom);
  CHECK(again.position.theta_deg == r.position.theta_deg);
  CHECK(again.position.phi_deg == r.position.phi_deg);
  CHECK(again.chi2 == r.chi2);
}

TEST_CASE("shipped observation: contours pass through the fit") {
  const auto obs = load_observations(kData + "/observations.json");
  LocateOptions opt;
  opt.mc_samples = 2000;
  const auto r = localize(obs, settings(), +1, SearchRegion{}, tensors().ground, kGammaHydrogenHzPerT, opt);
  CHECK(model_a_par(r.position, tensors().ground, settings()[0], kGammaHydrogenHzPerT) > 0);
  const auto residuals = contour_residuals(r.position, obs, settings(), +1, tensors().ground);
  for (double d : residuals) CHECK(d < 0.05);
  CHECK_FALSE(ratio_contours(obs, settings(), +1, tensors().ground, 2.0).empty());
}

TEST_CASE("threshold: shipped observation reproduces the reference position") {
  const auto obs = load_observations(kData + "/observations.json");
  LocateOptions opt;
  const auto r = localize(obs, settings(), +1, SearchRegion{}, tensors().ground, kGammaHydrogenHzPerT, opt);
  CHECK(std::abs(r.position.r_angstrom - 20.0) <= 0.5);
  CHECK(angle_diff(r.position.theta_deg, 66.7) <= 2.0);
  CHECK(angle_diff(r.position.phi_deg, 49.6) <= 2.0);
  CHECK(r.reduced_chi2 == doctest::Approx(2.7).epsilon(0.5 / 2.7));
}

TEST_CASE("gyromagnetic ratio from proportional data") {
  const std::vector<double> b{0.010, 0.013, 0.020, 0.031};
  std::vector<double> f;
  for (double x : b) f.push_back(42.577e6 * x);
  const auto e = gyromagnetic_estimate(f, b);
  CHECK(e.gamma_hz_per_t == doctest::Approx(42.577e6).epsilon(1e-12));
  CHECK(e.sigma < 1e-6);
  const auto w = gyromagnetic_estimate(f, b, {100, 100, 200, 50});
  CHECK(w.gamma_hz_per_t == doctest::Approx(42.577e6).epsilon(1e-12));
  CHECK_THROWS_AS(gyromagnetic_estimate({1.0}, {1.0}), ArgumentError);
}

TEST_CASE("nucleus-nucleus dipolar shift") {
  const double magic = units::rad_to_deg(std::acos(1 / std::sqrt(3.0)));
  CHECK(std::abs(dipolar_shift(2.0, magic, 5.58, -1.11)) < 1e-9);
  CHECK(dipolar_shift(2.0, magic - 5, 5.58, -1.11) * dipolar_shift(2.0, magic + 5, 5.58, -1.11) < 0);
  CHECK(dipolar_shift(1.7, 30, constants::kGHydrogen, constants::kGSilicon29) ==
        dipolar_shift(1.7, 30, constants::kGSilicon29, constants::kGHydrogen));
  CHECK(std::abs(dipolar_shift(1.5, 0, constants::kGHydrogen, constants::kGSilicon29)) ==
        doctest::Approx(7000).epsilon(0.15));
  CHECK(std::abs(dipolar_shift(2.4, 0, constants::kGHydrogen, constants::kGYttrium89)) ==
        doctest::Approx(400).epsilon(0.15));
  CHECK_THROWS_AS(dipolar_shift(0.0, 0, 1, 1), DomainError);
}
