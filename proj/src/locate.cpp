#include "spinforge/locate.hpp"

#include <gsl/gsl_multimin.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include "json.hpp"
#include <random>

#include "spinforge/errors.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

namespace {

constexpr double kHbar = constants::kPlanck / (2 * M_PI);

Eigen::Matrix3d read_tensor(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(key, "g-tensor entry missing");
  const auto& t = j.at(key);
  Eigen::Matrix3d g;
  try {
    if (t.is_array()) {
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) g(i, k) = t.at(i).at(k).get<double>();
    } else {
      const double xx = t.at("xx"), yy = t.at("yy"), zz = t.at("zz");
      const double xy = t.at("xy"), xz = t.at("xz"), yz = t.at("yz");
      g << xx, xy, xz, xy, yy, yz, xz, yz, zz;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("malformed g-tensor: ") + e.what());
  }
  if (!g.allFinite()) throw ConfigError(key, "g-tensor has non-finite entries");
  return g;
}

const FieldSetting& find_setting(const std::vector<FieldSetting>& settings, int id) {
  for (const auto& s : settings)
    if (s.id == id) return s;
  throw ArgumentError("no field setting with id " + std::to_string(id));
}

}  // namespace

GTensorSet load_g_tensors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("g_tensor_file", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("g_tensor_file", std::string("invalid JSON: ") + e.what());
  }
  GTensorSet s;
  s.ground = {read_tensor(j, "ground"), "ground"};
  s.excited = {read_tensor(j, "excited"), "excited"};
  return s;
}

namespace {

nlohmann::json read_json(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw ConfigError(key, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, std::string("invalid JSON: ") + e.what());
  }
}

double number_at(const nlohmann::json& j, const std::string& key, const std::string& where,
                 std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + "." + key, "missing");
  }
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key, "must be a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw ConfigError(where + "." + key, "must be finite");
  return v;
}

}  // namespace

std::vector<FieldSetting> load_field_settings(const std::string& path) {
  const auto j = read_json(path, "settings_file");
  if (!j.contains("field_settings") || !j.at("field_settings").is_array())
    throw ConfigError("field_settings", "array of settings required");
  const nlohmann::json corr = j.value("correction", nlohmann::json::object());
  std::vector<FieldSetting> out;
  for (size_t i = 0; i < j.at("field_settings").size(); ++i) {
    const auto& e = j.at("field_settings").at(i);
    const std::string where = "field_settings[" + std::to_string(i) + "]";
    FieldSetting f;
    f.id = static_cast<int>(number_at(e, "id", where));
    f.b_gauss = number_at(e, "b_gauss", where);
    if (!(f.b_gauss > 0)) throw ConfigError(where + ".b_gauss", "must be > 0");
    f.theta_deg = number_at(e, "theta_deg", where);
    f.phi_deg = number_at(e, "phi_deg", where);
    const auto& c = e.contains("correction") ? e.at("correction") : corr;
    const std::string cw = e.contains("correction") ? where + ".correction" : "correction";
    f.d_b = number_at(c, "d_b_gauss", cw, 0.0);
    f.sigma_b = number_at(c, "sigma_b_gauss", cw, 0.0);
    f.d_theta = number_at(c, "d_theta_deg", cw, 0.0);
    f.sigma_theta = number_at(c, "sigma_theta_deg", cw, 0.0);
    f.d_phi = number_at(c, "d_phi_deg", cw, 0.0);
    f.sigma_phi = number_at(c, "sigma_phi_deg", cw, 0.0);
    out.push_back(f);
  }
  return out;
}

std::vector<Observation> load_observations(const std::string& path) {
  const auto j = read_json(path, "observations_file");
  if (!j.contains("observations") || !j.at("observations").is_array())
    throw ConfigError("observations", "array of observations required");
  std::vector<Observation> out;
  for (size_t i = 0; i < j.at("observations").size(); ++i) {
    const auto& e = j.at("observations").at(i);
    const std::string where = "observations[" + std::to_string(i) + "]";
    Observation o;
    o.setting_id = static_cast<int>(number_at(e, "setting_id", where));
    o.omega0_khz = number_at(e, "omega0_khz", where);
    o.omega0_err = number_at(e, "omega0_err_khz", where);
    o.omega_delta_khz = number_at(e, "omega_delta_khz", where);
    o.omega_delta_err = number_at(e, "omega_delta_err_khz", where);
    o.alpha_deg = number_at(e, "alpha_deg", where);
    o.alpha_err = number_at(e, "alpha_err_deg", where);
    if (!(o.omega0_err > 0) || !(o.omega_delta_err > 0) || !(o.alpha_err > 0))
      throw ConfigError(where, "errors must be > 0");
    out.push_back(o);
  }
  return out;
}

Vec3 spherical_unit(double theta_deg, double phi_deg) {
  const double t = units::deg_to_rad(theta_deg), p = units::deg_to_rad(phi_deg);
  return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
}

Vec3 Position::unit() const { return spherical_unit(theta_deg, phi_deg); }

Vec3 FieldSetting::vector_with(double db, double dtheta, double dphi) const {
  return units::gauss_to_tesla(b_gauss + db) * spherical_unit(theta_deg + dtheta, phi_deg + dphi);
}

Vec3 FieldSetting::corrected_vector() const { return vector_with(d_b, d_theta, d_phi); }

Vec3 hyperfine_vector(const Position& pos, const GTensor& g, const Vec3& b, double nuclear_g) {
  if (pos.r_angstrom < 0.5) throw DomainError("dipolar model needs r >= 0.5 angstrom");
  const Vec3 gb = g.g.transpose() * b;
  if (gb.norm() == 0) throw DomainError("field is in the null space of the g-tensor");
  const Vec3 u = gb / gb.norm();
  const Vec3 v = g.g * u;
  const Vec3 rh = pos.unit();
  const double r = units::angstrom_to_m(pos.r_angstrom);
  const double k = constants::kMu0Over4Pi * constants::kBohrMagneton * constants::kNuclearMagneton * nuclear_g /
                   (r * r * r) / kHbar;
  return -0.5 * k * (v - 3.0 * v.dot(rh) * rh);
}

HyperfineParams dipolar_hyperfine(const Position& pos, const GTensor& g, const Vec3& b, double gamma_n) {
  const double gn = gamma_n * constants::kPlanck / constants::kNuclearMagneton;
  const Vec3 a = hyperfine_vector(pos, g, b, gn);
  const Vec3 bh = b.normalized();
  const double apar = a.dot(bh);
  const double aperp = (a - apar * bh).norm();
  return {apar, aperp, 2 * M_PI * std::abs(gamma_n) * b.norm()};
}

HyperfineParams dipolar_hyperfine(const Position& pos, const GTensor& g, const FieldSetting& f, double gamma_n) {
  return dipolar_hyperfine(pos, g, f.corrected_vector(), gamma_n);
}

double model_a_par(const Position& pos, const GTensor& g, const FieldSetting& f, double gamma_n) {
  return dipolar_hyperfine(pos, g, f, gamma_n).a_par;
}

ExcitedHyperfine excited_hyperfine(const Position& pos, const GTensorSet& gs, const FieldSetting& f, double gamma_n) {
  const double gn = gamma_n * constants::kPlanck / constants::kNuclearMagneton;
  const Vec3 b = f.corrected_vector();
  const Vec3 bh = b.normalized();
  const Vec3 ag = hyperfine_vector(pos, gs.ground, b, gn);
  const Vec3 ae = hyperfine_vector(pos, gs.excited, b, gn);
  Vec3 xg = ag - ag.dot(bh) * bh;
  if (xg.norm() == 0) xg = bh.unitOrthogonal();
  xg.normalize();
  const Vec3 yg = bh.cross(xg);
  ExcitedHyperfine e;
  e.a_par = ae.dot(bh);
  const double ex = ae.dot(xg), ey = ae.dot(yg);
  e.a_perp = std::hypot(ex, ey);
  e.azimuth = std::atan2(ey, ex);
  return e;
}

Observables observables_from_params(const HyperfineParams& p) {
  const auto c = precession(p);
  return {units::angular_to_khz(c.omega0()), std::abs(units::angular_to_khz(c.omega_delta())),
          units::rad_to_deg(resonant_alpha(p))};
}

Observables model_observables(const Position& pos, const GTensor& g, const Vec3& b, double gamma_n) {
  return observables_from_params(dipolar_hyperfine(pos, g, b, gamma_n));
}

HyperfineParams hyperfine_from_observation(const Observation& o) {
  const double w0 = units::khz_to_angular(o.omega0_khz), wd = units::khz_to_angular(std::abs(o.omega_delta_khz));
  const double wp = w0 + wd, wm = w0 - wd, alpha = units::deg_to_rad(o.alpha_deg);
  if (!(wm > 0) || !(alpha >= 0)) throw DomainError("observation outside the invertible range");
  auto parts = [&](double wl) {
    const double apar = (wp * wp - wm * wm) / (4 * wl);
    const double aperp = alpha * wp * wm / (2 * wl);
    return std::pair{apar, aperp};
  };
  auto f = [&](double wl) {
    const auto [apar, aperp] = parts(wl);
    return wl * wl + apar * apar + aperp * aperp - 0.5 * (wp * wp + wm * wm);
  };
  double lo = 0.3 * w0, hi = 1.5 * w0;
  if (f(lo) * f(hi) > 0) throw DomainError("observation has no strong-field solution");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((f(mid) > 0) == (f(hi) > 0) ? hi : lo) = mid;
  }
  const double wl = 0.5 * (lo + hi);
  const auto [apar, aperp] = parts(wl);
  return {apar, aperp, wl};
}

double chi_square(const Position& pos, const std::vector<Observation>& obs, const std::vector<FieldSetting>& settings,
                  const SigmaModel& sm, const GTensor& g, double gamma_n) {
  if (!sm.empty() && sm.size() != 3 * obs.size()) throw DimensionError("chi_square: sigma_model length mismatch");
  double chi2 = 0;
  for (size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    const auto m = model_observables(pos, g, find_setting(settings, o.setting_id).corrected_vector(), gamma_n);
    const double x[3] = {o.omega0_khz, o.omega_delta_khz, o.alpha_deg};
    const double e[3] = {o.omega0_err, o.omega_delta_err, o.alpha_err};
    const double y[3] = {m.omega0_khz, m.omega_delta_khz, m.alpha_deg};
    for (int k = 0; k < 3; ++k) {
      const double smod = sm.empty() ? 0.0 : sm[3 * i + k];
      chi2 += (x[k] - y[k]) * (x[k] - y[k]) / (e[k] * e[k] + smod * smod);
    }
  }
  return chi2;
}

SigmaModel monte_carlo_sigma(const Position& pos, const std::vector<Observation>& obs,
                             const std::vector<FieldSetting>& settings, int n, std::uint64_t seed, const GTensor& g,
                             double gamma_n, double scale, parallel::Exec exec) {
  if (n < 100) throw ArgumentError("monte_carlo_sigma: need at least 100 samples");
  const size_t width = 3 * obs.size();
  std::vector<double> samples(static_cast<size_t>(n) * width);
  auto draw = [&](long s) {
    auto rng = parallel::stream(seed, static_cast<std::uint64_t>(s));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::map<int, Vec3> fields;
    for (const auto& f : settings) {
      const double db = f.d_b + scale * f.sigma_b * gauss(rng);
      const double dt = f.d_theta + scale * f.sigma_theta * gauss(rng);
      const double dp = f.d_phi + scale * f.sigma_phi * gauss(rng);
      fields[f.id] = f.vector_with(db, dt, dp);
    }
    for (size_t i = 0; i < obs.size(); ++i) {
      const auto m = model_observables(pos, g, fields.at(obs[i].setting_id), gamma_n);
      double* row = &samples[s * width + 3 * i];
      row[0] = m.omega0_khz;
      row[1] = m.omega_delta_khz;
      row[2] = m.alpha_deg;
    }
  };
  if (exec == parallel::Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long s = 0; s < n; ++s) draw(s);
  } else {
    for (long s = 0; s < n; ++s) draw(s);
  }
  SigmaModel out(width, 0.0);
  for (size_t k = 0; k < width; ++k) {
    // shifted by the first sample so identical draws give exactly zero
    const double ref = samples[k];
    double mean = 0;
    for (long s = 0; s < n; ++s) mean += samples[s * width + k] - ref;
    mean /= n;
    double var = 0;
    for (long s = 0; s < n; ++s) {
      const double d = samples[s * width + k] - ref - mean;
      var += d * d;
    }
    out[k] = std::sqrt(var / (n - 1));
  }
  return out;
}

std::vector<double> chi_square_grid(const std::vector<Observation>& obs, const std::vector<FieldSetting>& settings,
                                    const SigmaModel& sm, const SearchRegion& reg, const GTensor& g, double gamma_n,
                                    parallel::Exec exec) {
  const int nr = static_cast<int>(std::floor((reg.r_max - reg.r_min) / reg.r_step + 1e-9)) + 1;
  const int nt = static_cast<int>(std::floor((reg.theta_max - reg.theta_min) / reg.angle_step + 1e-9)) + 1;
  const int np = static_cast<int>(std::floor((reg.phi_max - reg.phi_min) / reg.angle_step + 1e-9)) + 1;
  std::vector<double> out(static_cast<size_t>(nr) * nt * np);
  const long total = static_cast<long>(out.size());
  auto eval = [&](long idx) {
    const int ip = idx % np, it = (idx / np) % nt, ir = idx / (np * nt);
    const Position pos{reg.r_min + ir * reg.r_step, reg.theta_min + it * reg.angle_step,
                       reg.phi_min + ip * reg.angle_step};
    out[idx] = chi_square(pos, obs, settings, sm, g, gamma_n);
  };
  if (exec == parallel::Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < total; ++i) eval(i);
  } else {
    for (long i = 0; i < total; ++i) eval(i);
  }
  return out;
}

namespace {

struct NmContext {
  const std::vector<Observation>* obs;
  const std::vector<FieldSetting>* settings;
  const SigmaModel* sm;
  const GTensor* g;
  double gamma_n;
  int sign;
  const FieldSetting* sign_setting;
};

bool sign_ok(const Position& p, const NmContext& c) {
  return c.sign == 0 || (model_a_par(p, *c.g, *c.sign_setting, c.gamma_n) >= 0) == (c.sign > 0);
}

double nm_objective(const gsl_vector* x, void* params) {
  const auto& c = *static_cast<NmContext*>(params);
  const Position p{gsl_vector_get(x, 0), gsl_vector_get(x, 1), gsl_vector_get(x, 2)};
  if (p.r_angstrom < 0.5) return 1e30;
  if (!sign_ok(p, c)) return 1e30;
  return chi_square(p, *c.obs, *c.settings, *c.sm, *c.g, c.gamma_n);
}

struct NmOutcome {
  Position pos;
  double value;
  bool converged;
  int iterations;
};

NmOutcome nelder_mead(NmContext& ctx, const Position& start, const SearchRegion& reg, const LocateOptions& opt) {
  gsl_multimin_function f{&nm_objective, 3, &ctx};
  gsl_vector* x = gsl_vector_alloc(3);
  gsl_vector* step = gsl_vector_alloc(3);
  gsl_vector_set(x, 0, start.r_angstrom);
  gsl_vector_set(x, 1, start.theta_deg);
  gsl_vector_set(x, 2, start.phi_deg);
  gsl_vector_set(step, 0, 0.5 * reg.r_step);
  gsl_vector_set(step, 1, 0.5 * reg.angle_step);
  gsl_vector_set(step, 2, 0.5 * reg.angle_step);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
  gsl_multimin_fminimizer_set(s, &f, x, step);
  NmOutcome out{start, 0, false, 0};
  const double tol = opt.nm_tolerance * std::max(1.0, start.r_angstrom);
  for (; out.iterations < opt.max_iterations; ++out.iterations) {
    if (gsl_multimin_fminimizer_iterate(s)) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), tol) == GSL_SUCCESS) {
      out.converged = true;
      break;
    }
  }
  const gsl_vector* b = gsl_multimin_fminimizer_x(s);
  out.pos = {gsl_vector_get(b, 0), gsl_vector_get(b, 1), gsl_vector_get(b, 2)};
  out.value = gsl_multimin_fminimizer_minimum(s);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return out;
}

}  // namespace

LocateResult localize(const std::vector<Observation>& obs, const std::vector<FieldSetting>& settings, int sign,
                      const SearchRegion& reg, const GTensor& g, double gamma_n, const LocateOptions& opt) {
  if (obs.empty()) throw ArgumentError("localize: no observations");
  if (!(reg.r_max >= reg.r_min) || !(reg.r_step > 0) || !(reg.angle_step > 0))
    throw ArgumentError("localize: search region must be bounded with positive steps");
  SigmaModel sm(3 * obs.size(), 0.0);
  NmContext ctx{&obs, &settings, &sm, &g, gamma_n, sign, &find_setting(settings, obs.front().setting_id)};

  const auto grid = chi_square_grid(obs, settings, sm, reg, g, gamma_n, opt.exec);
  const int nt = static_cast<int>(std::floor((reg.theta_max - reg.theta_min) / reg.angle_step + 1e-9)) + 1;
  const int np = static_cast<int>(std::floor((reg.phi_max - reg.phi_min) / reg.angle_step + 1e-9)) + 1;
  double best = std::numeric_limits<double>::infinity();
  Position start;
  for (size_t idx = 0; idx < grid.size(); ++idx) {
    const int ip = idx % np, it = (idx / np) % nt, ir = idx / (np * nt);
    const Position p{reg.r_min + ir * reg.r_step, reg.theta_min + it * reg.angle_step,
                     reg.phi_min + ip * reg.angle_step};
    if (grid[idx] < best && sign_ok(p, ctx)) {
      best = grid[idx];
      start = p;
    }
  }
  LocateResult r;
  r.sign_a_par = sign;
  if (!std::isfinite(best)) return r;

  NmOutcome nm = nelder_mead(ctx, start, reg, opt);
  int iters = nm.iterations;
  for (int round = 0; round < opt.refinement_rounds && opt.mc_samples >= 100; ++round) {
    sm = monte_carlo_sigma(nm.pos, obs, settings, opt.mc_samples, opt.seed + round, g, gamma_n, 1.0, opt.exec);
    nm = nelder_mead(ctx, nm.pos, reg, opt);
    iters += nm.iterations;
  }
  r.position = nm.pos;
  // The point-dipole model is inversion symmetric; report the upper hemisphere.
  if (r.position.theta_deg > 90.0) {
    r.position.theta_deg = 180.0 - r.position.theta_deg;
    r.position.phi_deg += 180.0;
  }
  r.position.phi_deg = std::fmod(std::fmod(r.position.phi_deg, 360.0) + 360.0, 360.0);
  r.chi2 = nm.value;
  r.dof = static_cast<int>(3 * obs.size()) - 3;
  r.reduced_chi2 = r.dof > 0 ? r.chi2 / r.dof : std::numeric_limits<double>::quiet_NaN();
  r.converged = nm.converged;
  r.iterations = iters;
  r.sigma_model = sm;
  return r;
}

namespace {

double ratio_at(const Position& p, const GTensor& g, const FieldSetting& f) {
  const auto h = dipolar_hyperfine(p, g, f, constants::kGammaHydrogenHzPerT);
  return h.a_perp > 0 ? h.a_par / h.a_perp : std::copysign(1e12, h.a_par);
}

double observed_ratio(const Observation& o, int sign) {
  const auto h = hyperfine_from_observation(o);
  return (sign >= 0 ? 1.0 : -1.0) * h.a_par / h.a_perp;
}

}  // namespace

std::vector<ContourPoint> ratio_contours(const std::vector<Observation>& obs,
                                         const std::vector<FieldSetting>& settings, int sign, const GTensor& g,
                                         double step) {
  std::vector<ContourPoint> out;
  const int nt = static_cast<int>(std::round(180.0 / step)) + 1;
  const int np = static_cast<int>(std::round(360.0 / step)) + 1;
  for (const auto& o : obs) {
    const auto& f = find_setting(settings, o.setting_id);
    const double target = observed_ratio(o, sign);
    std::vector<double> val(static_cast<size_t>(nt) * np);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < np; ++j) val[i * np + j] = ratio_at({20.0, i * step, j * step}, g, f) - target;
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j + 1 < np; ++j) {
        const double a = val[i * np + j], b = val[i * np + j + 1];
        if ((a < 0) != (b < 0) && std::abs(a - b) < 10.0) {
          const double t = a / (a - b);
          out.push_back({o.setting_id, i * step, (j + t) * step});
        }
      }
  }
  return out;
}

std::vector<double> contour_residuals(const Position& pos, const std::vector<Observation>& obs,
                                      const std::vector<FieldSetting>& settings, int sign, const GTensor& g) {
  std::vector<double> out;
  for (const auto& o : obs)
    out.push_back(std::abs(ratio_at(pos, g, find_setting(settings, o.setting_id)) - observed_ratio(o, sign)));
  return out;
}

GammaEstimate gyromagnetic_estimate(const std::vector<double>& f, const std::vector<double>& b,
                                    const std::vector<double>& sig) {
  if (f.size() < 2 || f.size() != b.size()) throw ArgumentError("gyromagnetic_estimate: need >= 2 paired points");
  if (!sig.empty() && sig.size() != f.size()) throw ArgumentError("gyromagnetic_estimate: sigma length mismatch");
  double swb2 = 0, swfb = 0;
  for (size_t i = 0; i < f.size(); ++i) {
    const double w = sig.empty() ? 1.0 : 1.0 / (sig[i] * sig[i]);
    swb2 += w * b[i] * b[i];
    swfb += w * f[i] * b[i];
  }
  GammaEstimate e;
  e.gamma_hz_per_t = swfb / swb2;
  if (!sig.empty()) {
    e.sigma = std::sqrt(1.0 / swb2);
  } else {
    double ss = 0, sb2 = 0;
    for (size_t i = 0; i < f.size(); ++i) {
      const double d = f[i] - e.gamma_hz_per_t * b[i];
      ss += d * d;
      sb2 += b[i] * b[i];
    }
    e.sigma = std::sqrt(ss / (f.size() - 1) / sb2);
  }
  return e;
}

double dipolar_shift(double r_angstrom, double theta_deg, double g1, double g2) {
  if (!(r_angstrom > 0)) throw DomainError("dipolar_shift: r must be > 0");
  const double r = units::angstrom_to_m(r_angstrom);
  const double c = std::cos(units::deg_to_rad(theta_deg));
  return 0.5 * constants::kMu0Over4Pi * constants::kNuclearMagneton * constants::kNuclearMagneton * g1 * g2 *
         (1 - 3 * c * c) / (r * r * r) / constants::kPlanck;
}

}  // namespace spinforge
