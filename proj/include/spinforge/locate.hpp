#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spinforge/channels.hpp"
#include "spinforge/hyperfine.hpp"
#include "spinforge/parallel.hpp"

namespace spinforge {

// Electron g-tensor in the crystal frame (x, y, z) = (D1, D2, b).
struct GTensor {
  Eigen::Matrix3d g = 2.0 * Eigen::Matrix3d::Identity();
  std::string label = "ground";
};

struct GTensorSet {
  GTensor ground;
  GTensor excited;
};

GTensorSet load_g_tensors(const std::string& path);

// Nominal field plus first-order correction (mean and 1 sigma of each shift).
struct FieldSetting {
  int id = 0;
  double b_gauss = 130.0;
  double theta_deg = 90.0;  // from +b (z)
  double phi_deg = 0.0;     // from +D1 (x) toward D2
  double d_b = 0.0, d_theta = 0.0, d_phi = 0.0;
  double sigma_b = 0.0, sigma_theta = 0.0, sigma_phi = 0.0;

  // Field vector in tesla after applying the mean correction.
  Vec3 corrected_vector() const;
  Vec3 vector_with(double db, double dtheta, double dphi) const;
};

// Measured (omega0, omega_delta) in kHz and alpha in degrees, with 1 sigma errors.
struct Observation {
  int setting_id = 0;
  double omega0_khz = 0, omega0_err = 1;
  double omega_delta_khz = 0, omega_delta_err = 1;
  double alpha_deg = 0, alpha_err = 1;
};

// JSON loaders; malformed entries raise ConfigError naming the key.
std::vector<FieldSetting> load_field_settings(const std::string& path);
std::vector<Observation> load_observations(const std::string& path);

struct Position {
  double r_angstrom = 20.0;
  double theta_deg = 90.0;
  double phi_deg = 0.0;

  Vec3 unit() const;
};

Vec3 spherical_unit(double theta_deg, double phi_deg);

// Secular hyperfine vector A (rad/s, crystal frame) with H = 2 S_z A.I.
Vec3 hyperfine_vector(const Position& pos, const GTensor& g, const Vec3& b_tesla, double nuclear_g);
HyperfineParams dipolar_hyperfine(const Position& pos, const GTensor& g, const Vec3& b_tesla, double gamma_n_hz_per_t);
HyperfineParams dipolar_hyperfine(const Position& pos, const GTensor& g, const FieldSetting& field,
                                  double gamma_n_hz_per_t);
// Signed A_par at the corrected field.
double model_a_par(const Position& pos, const GTensor& g, const FieldSetting& field, double gamma_n_hz_per_t);

// Excited-state coupling in the ground nuclear frame.
ExcitedHyperfine excited_hyperfine(const Position& pos, const GTensorSet& g, const FieldSetting& field,
                                   double gamma_n_hz_per_t);

struct Observables {
  double omega0_khz = 0, omega_delta_khz = 0, alpha_deg = 0;
};

// Exact-propagator observables for a coupling; omega_delta reported as |omega_delta|.
Observables observables_from_params(const HyperfineParams& p);
Observables model_observables(const Position& pos, const GTensor& g, const Vec3& b_tesla, double gamma_n_hz_per_t);

// Inverts (omega0, |omega_delta|, alpha) for (|A_par|, A_perp, omega_L) using
// the strong-field alpha relation.
HyperfineParams hyperfine_from_observation(const Observation& o);

// Flattened per-point model sigma: 3 entries per observation (omega0, omega_delta, alpha).
using SigmaModel = std::vector<double>;

double chi_square(const Position& pos, const std::vector<Observation>& obs, const std::vector<FieldSetting>& settings,
                  const SigmaModel& sigma_model, const GTensor& g, double gamma_n_hz_per_t);

SigmaModel monte_carlo_sigma(const Position& pos, const std::vector<Observation>& obs,
                             const std::vector<FieldSetting>& settings, int n_samples, std::uint64_t seed,
                             const GTensor& g, double gamma_n_hz_per_t, double uncertainty_scale = 1.0,
                             parallel::Exec exec = parallel::Exec::Parallel);

struct SearchRegion {
  double r_min = 15, r_max = 25;
  double theta_min = 0, theta_max = 180;
  double phi_min = 0, phi_max = 360;
  double r_step = 2.0, angle_step = 5.0;
};

struct LocateOptions {
  int mc_samples = 10000;
  std::uint64_t seed = 7;
  double nm_tolerance = 1e-4;  // relative simplex size
  int max_iterations = 2000;
  int refinement_rounds = 2;
  parallel::Exec exec = parallel::Exec::Parallel;
};

struct LocateResult {
  Position position;
  double chi2 = 0;
  double reduced_chi2 = 0;
  int dof = 0;
  bool converged = false;
  int iterations = 0;
  int sign_a_par = 1;
  SigmaModel sigma_model;
};

// Coarse grid scan then Nelder-Mead, restricted to positions whose model
// A_par at the first setting has the requested sign. The model is inversion
// symmetric, so the reported position has theta <= 90 deg.
LocateResult localize(const std::vector<Observation>& obs, const std::vector<FieldSetting>& settings, int sign_a_par,
                      const SearchRegion& region, const GTensor& g, double gamma_n_hz_per_t,
                      const LocateOptions& opt = {});

// Grid of chi^2 values (sigma_model fixed), row-major over (r, theta, phi).
std::vector<double> chi_square_grid(const std::vector<Observation>& obs, const std::vector<FieldSetting>& settings,
                                    const SigmaModel& sigma_model, const SearchRegion& region, const GTensor& g,
                                    double gamma_n_hz_per_t, parallel::Exec exec = parallel::Exec::Parallel);

struct ContourPoint {
  int setting_id;
  double theta_deg, phi_deg;
};

// Points of the (theta, phi) sphere where the model A_par/A_perp equals the
// observed ratio, for each observed setting (sign of A_par as requested).
std::vector<ContourPoint> ratio_contours(const std::vector<Observation>& obs,
                                         const std::vector<FieldSetting>& settings, int sign_a_par, const GTensor& g,
                                         double step_deg = 1.0);
// |model ratio - observed ratio| at a position, one per observation.
std::vector<double> contour_residuals(const Position& pos, const std::vector<Observation>& obs,
                                      const std::vector<FieldSetting>& settings, int sign_a_par, const GTensor& g);

struct GammaEstimate {
  double gamma_hz_per_t = 0;
  double sigma = 0;
};

// Weighted least squares of omega_L/2pi (Hz) against |B| (T) through the origin.
GammaEstimate gyromagnetic_estimate(const std::vector<double>& larmor_hz, const std::vector<double>& b_tesla,
                                    const std::vector<double>& larmor_sigma_hz = {});

// Point-dipole nucleus-nucleus shift in Hz.
double dipolar_shift(double r_angstrom, double theta_deg, double g1, double g2);

}  // namespace spinforge
