#include "spinforge/environment.hpp"

#include <gsl/gsl_cdf.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spinforge/errors.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

void DarkSpinModel::validate() const {
  if (!(a1_hz >= 0) || !(a2_hz >= 0)) throw ArgumentError("dark spin couplings must be >= 0");
  if (!(t1_dark_1 > 0) || !(t1_dark_2 > 0)) throw ArgumentError("dark spin lifetimes must be > 0");
}

double DarkSpinModel::shift(int d1, int d2) const {
  if (std::abs(d1) != 1 || std::abs(d2) != 1) throw ArgumentError("dark spin states must be +-1");
  return units::hz_to_angular(d1 * a1_hz + d2 * a2_hz);
}

double branch_phase(double a_hz, double tau_c, double tau0, int n_pulses) {
  return 2.0 * units::hz_to_angular(a_hz) * (tau_c + 2.0 * n_pulses * tau0);
}

namespace {

struct GateSetup {
  double tau0;
  int n;
};

GateSetup resolve_gate(const HyperfineParams& p, const FourBodyOptions& opt) {
  const double tau0 = opt.tau0 ? *opt.tau0 : gate_tau0(p);
  const int n = opt.n_pulses ? *opt.n_pulses : entangling_pulse_count(p, tau0);
  return {tau0, n};
}

// s0 for one shifted coupling with a fixed gate.
class BranchSignal {
 public:
  BranchSignal(const HyperfineParams& q, const GateSetup& g)
      : q_(q), c_(sequence_unitary(cnot_e_sequence(g.tau0, g.n), q)), x_(electron_pi_x()) {}

  double operator()(double tau_c) const {
    const CMatrix u = free_propagator(q_, 0.5 * tau_c);
    const CMatrix m = c_ * u * x_ * u * c_;
    static const CMatrix rho = ramsey_initial_state().mat();
    static const CMatrix proj = tensor(pauli::proj_down(), pauli::identity());
    return (proj * m * rho * m.adjoint()).trace().real();
  }

 private:
  HyperfineParams q_;
  CMatrix c_, x_;
};

std::vector<double> eval_branch(const BranchSignal& s, const std::vector<double>& grid, parallel::Exec exec) {
  std::vector<double> out(grid.size());
  const long n = static_cast<long>(grid.size());
  if (exec == parallel::Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) out[i] = s(grid[i]);
  } else {
    for (long i = 0; i < n; ++i) out[i] = s(grid[i]);
  }
  return out;
}

void check_grid(const std::vector<double>& grid) {
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0)) throw ArgumentError("tau_c grid must be non-negative");
    if (i > 0 && grid[i] < grid[i - 1]) throw ArgumentError("tau_c grid must be ascending");
  }
}

int branch_index(int d1, int d2) { return (d1 < 0) * 2 + (d2 < 0); }

constexpr int kStates[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

}  // namespace

SignalTrace four_body_ramsey(const HyperfineParams& p, const DarkSpinModel& dark, int d1, int d2,
                             const std::vector<double>& grid, const FourBodyOptions& opt) {
  dark.validate();
  check_grid(grid);
  const auto g = resolve_gate(p, opt);
  SignalTrace tr;
  tr.times = grid;
  tr.values = eval_branch(BranchSignal(p.with_larmor_shift(dark.shift(d1, d2)), g), grid, opt.exec);
  tr.metadata["sequence"] = "ramsey_s0";
  tr.metadata["d1"] = std::to_string(d1);
  tr.metadata["d2"] = std::to_string(d2);
  tr.metadata["tau0_s"] = std::to_string(g.tau0);
  tr.metadata["cnote_pulses"] = std::to_string(g.n);
  return tr;
}

SignalTrace four_body_average(const HyperfineParams& p, const DarkSpinModel& dark, const std::vector<double>& grid,
                              const FourBodyOptions& opt) {
  SignalTrace avg;
  for (const auto& s : kStates) {
    const auto tr = four_body_ramsey(p, dark, s[0], s[1], grid, opt);
    if (avg.values.empty()) {
      avg = tr;
      for (double& v : avg.values) v *= 0.25;
    } else {
      for (size_t i = 0; i < grid.size(); ++i) avg.values[i] += 0.25 * tr.values[i];
    }
  }
  avg.metadata.erase("d1");
  avg.metadata.erase("d2");
  avg.metadata["branches"] = "average";
  return avg;
}

std::array<double, 4> branch_populations(const HyperfineParams& p, const DarkSpinModel& dark, double tau_c,
                                         const FourBodyOptions& opt) {
  dark.validate();
  const auto g = resolve_gate(p, opt);
  std::array<double, 4> out{};
  for (const auto& s : kStates)
    out[branch_index(s[0], s[1])] = BranchSignal(p.with_larmor_shift(dark.shift(s[0], s[1])), g)(tau_c);
  return out;
}

ReadoutPoints readout_points(const DarkSpinModel& dark, const HyperfineParams& p, double tau0, int n_pulses) {
  dark.validate();
  if (!(dark.a2_hz > 0)) throw DomainError("readout_points: d2 coupling must be > 0");
  if (!(tau0 > 0) || n_pulses < 1) throw ArgumentError("readout_points: tau0 > 0 and n_pulses >= 1 required");
  ReadoutPoints r;
  r.d2_insensitive_time = 1.0 / (2.0 * dark.a2_hz) - 2.0 * n_pulses * tau0;
  if (!(r.d2_insensitive_time > 0)) throw DomainError("readout_points: gate longer than the d2 period");

  const GateSetup g{tau0, n_pulses};
  std::vector<BranchSignal> branches;
  for (const auto& s : kStates) branches.emplace_back(p.with_larmor_shift(dark.shift(s[0], s[1])), g);
  auto contrasts = [&](double t) {
    double v[4];
    for (int k = 0; k < 4; ++k) v[k] = branches[k](t);
    return std::pair{0.5 * (v[0] + v[1] - v[2] - v[3]), 0.5 * (v[0] + v[2] - v[1] - v[3])};
  };

  // d1 pair: strongest positive and negative d1 contrast, penalized by residual d2 contrast.
  constexpr double kStep = 5e-9;
  const double period = 1.0 / units::angular_to_hz(precession(p).omega0());
  const double t_end = r.d2_insensitive_time + 6.0 * period;
  double best_pos = -1e9, best_neg = -1e9, t_pos = 0, t_neg = 0;
  for (double t = r.d2_insensitive_time; t <= t_end; t += kStep) {
    const auto [c1, c2] = contrasts(t);
    const double score = std::abs(c1) - std::abs(c2);
    if (c1 > 0 && score > best_pos) best_pos = score, t_pos = t;
    if (c1 < 0 && score > best_neg) best_neg = score, t_neg = t;
  }
  r.d1_readout_times = {std::min(t_pos, t_neg), std::max(t_pos, t_neg)};
  for (double t : r.d1_readout_times) r.d1_phase.push_back(branch_phase(dark.a1_hz, t, tau0, n_pulses));

  // d2 point: zero of d1 contrast with the largest d2 contrast.
  const double t_start = std::max(15e-6, 0.5 * r.d2_insensitive_time);
  double best = -1, prev_c1 = contrasts(t_start).first;
  for (double t = t_start + kStep; t <= r.d2_insensitive_time; t += kStep) {
    const auto [c1, c2] = contrasts(t);
    if ((c1 < 0) != (prev_c1 < 0)) {
      const double tz = t - kStep * c1 / (c1 - prev_c1);
      const double s2 = std::abs(contrasts(tz).second);
      if (s2 > best) best = s2, r.d2_readout_time = tz;
    }
    prev_c1 = c1;
  }
  r.d2_phase = branch_phase(dark.a2_hz, r.d2_readout_time, tau0, n_pulses);
  return r;
}

std::vector<double> telegraph_switch_times(double lifetime, double span, std::mt19937_64& rng) {
  if (!(lifetime > 0)) throw ArgumentError("telegraph: lifetime must be > 0");
  std::vector<double> out;
  if (std::isinf(lifetime)) return out;
  std::exponential_distribution<double> dwell(1.0 / lifetime);
  for (double t = dwell(rng); t < span; t += dwell(rng)) out.push_back(t);
  return out;
}

double noise_for_fidelity(double separation, double fidelity) {
  if (!(fidelity > 0.5 && fidelity < 1)) throw ArgumentError("readout fidelity must be in (0.5, 1)");
  return std::abs(separation) / (2.0 * gsl_cdf_ugaussian_Pinv(fidelity));
}

JumpTrace jump_trace(const DarkSpinModel& dark, const HyperfineParams& p, const JumpTraceConfig& cfg,
                     const FourBodyOptions& opt) {
  dark.validate();
  if (!(cfg.sample_period > 0)) throw ArgumentError("jump_trace: sample_period must be > 0");
  if (cfg.n_samples < 1) throw ArgumentError("jump_trace: n_samples must be >= 1");
  const auto pops = branch_populations(p, dark, cfg.readout_time, opt);
  double sigma = cfg.readout_noise_sigma;
  if (sigma < 0) {
    const double sep = 0.5 * (pops[0] + pops[1] - pops[2] - pops[3]);
    sigma = noise_for_fidelity(sep, 0.98);
  }
  const double span = cfg.n_samples * cfg.sample_period;
  auto rng1 = parallel::stream(cfg.seed, 0), rng2 = parallel::stream(cfg.seed, 1), rng3 = parallel::stream(cfg.seed, 2);
  std::bernoulli_distribution coin(0.5);
  int d1 = coin(rng1) ? 1 : -1, d2 = coin(rng2) ? 1 : -1;
  const auto sw1 = telegraph_switch_times(dark.t1_dark_1, span, rng1);
  const auto sw2 = telegraph_switch_times(dark.t1_dark_2, span, rng2);
  std::normal_distribution<double> noise(0.0, 1.0);
  JumpTrace tr;
  size_t i1 = 0, i2 = 0;
  for (int k = 0; k < cfg.n_samples; ++k) {
    const double t = k * cfg.sample_period;
    for (; i1 < sw1.size() && sw1[i1] <= t; ++i1) d1 = -d1;
    for (; i2 < sw2.size() && sw2[i2] <= t; ++i2) d2 = -d2;
    tr.sample_times.push_back(t);
    tr.hidden_d1.push_back(d1);
    tr.hidden_d2.push_back(d2);
    const double v = pops[branch_index(d1, d2)] + sigma * noise(rng3);
    tr.populations.push_back(std::clamp(v, 0.0, 1.0));
  }
  return tr;
}

namespace {

double otsu_threshold(const std::vector<double>& x) {
  constexpr int kBins = 256;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) return lo;
  std::vector<double> hist(kBins, 0.0);
  for (double v : x) hist[std::min(kBins - 1, static_cast<int>((v - lo) / (hi - lo) * kBins))] += 1;
  double total = 0, sum = 0;
  for (int i = 0; i < kBins; ++i) total += hist[i], sum += i * hist[i];
  double w0 = 0, s0 = 0, best = -1;
  int best_i = 0;
  for (int i = 0; i < kBins - 1; ++i) {
    w0 += hist[i];
    s0 += i * hist[i];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = s0 / w0, m1 = (sum - s0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) best = between, best_i = i;
  }
  return lo + (best_i + 1) * (hi - lo) / kBins;
}

// Per-sample flip probability q of a symmetric telegraph process -> mean dwell time.
double dwell_from_flip(double q, double dt) {
  if (!(q > 0)) return std::numeric_limits<double>::infinity();
  if (q >= 0.5) return 0.0;
  return -2.0 * dt / std::log1p(-2.0 * q);
}

}  // namespace

LifetimeEstimate estimate_lifetime(const JumpTrace& trace, std::optional<double> threshold) {
  const auto& x = trace.populations;
  const size_t n = x.size();
  if (n < 3 || trace.sample_times.size() != n) throw ArgumentError("estimate_lifetime: need >= 3 paired samples");
  for (size_t i = 1; i < n; ++i)
    if (!(trace.sample_times[i] > trace.sample_times[i - 1])) throw ArgumentError("sample times must increase");
  const double dt = (trace.sample_times.back() - trace.sample_times.front()) / (n - 1);

  LifetimeEstimate e;
  e.threshold = threshold ? *threshold : otsu_threshold(x);
  std::vector<int> b(n);
  for (size_t i = 0; i < n; ++i) b[i] = x[i] > e.threshold ? 1 : -1;

  // Binarized autocorrelation at lags 1 and 2: r_k = (1 - 2 eps)^2 (1 - 2 q)^k.
  const double m = std::accumulate(b.begin(), b.end(), 0.0) / n;
  if (1.0 - m * m < 1e-12) {
    e.t1 = e.t1_uncorrected = e.ci_low = e.ci_high = std::numeric_limits<double>::infinity();
    e.low_confidence = true;
    return e;
  }
  auto lag_corr = [&](size_t lag) {
    double s = 0;
    for (size_t i = 0; i + lag < n; ++i) s += (b[i] - m) * (b[i + lag] - m);
    return s / (n - lag) / (1.0 - m * m);
  };
  const double r1 = lag_corr(1), r2 = lag_corr(2);
  if (!(r1 > 3.0 / std::sqrt(static_cast<double>(n))) || !(r2 > 0)) {
    // no persistence: the levels are noise, not dwell states
    e.t1 = e.t1_uncorrected = e.ci_low = e.ci_high = std::numeric_limits<double>::infinity();
    e.low_confidence = true;
    return e;
  }
  e.misclassification = std::clamp(0.5 * (1.0 - std::sqrt(std::min(1.0, r1 * r1 / r2))), 0.0, 0.49);

  size_t run_start = 0;
  bool first = true;
  for (size_t i = 1; i < n; ++i) {
    if (b[i] != b[i - 1]) {
      ++e.n_events;
      if (!first) e.dwell_times.push_back((i - run_start) * dt);
      first = false;
      run_start = i;
    }
  }

  const double eps = e.misclassification;
  auto corrected = [&](double f) { return (f - 2 * eps * (1 - eps)) / ((1 - 2 * eps) * (1 - 2 * eps)); };
  const double steps = static_cast<double>(n - 1);
  const double f = e.n_events / steps;
  e.t1_uncorrected = dwell_from_flip(f, dt);
  e.t1 = dwell_from_flip(corrected(f), dt);
  // Poisson interval on the jump count.
  const double k = e.n_events;
  const double k_lo = k > 0 ? 0.5 * gsl_cdf_chisq_Pinv(0.16, 2 * k) : 0.0;
  const double k_hi = 0.5 * gsl_cdf_chisq_Pinv(0.84, 2 * k + 2);
  e.ci_low = dwell_from_flip(corrected(k_hi / steps), dt);
  e.ci_high = dwell_from_flip(corrected(k_lo / steps), dt);
  e.low_confidence = e.n_events < 5;
  return e;
}

double observable_volume_cm3(double r_obs_m) {
  if (!(r_obs_m > 0)) throw ArgumentError("observable radius must be > 0");
  const double r = units::m_to_cm(r_obs_m);
  return 4.0 / 3.0 * M_PI * r * r * r;
}

ConcentrationPosterior concentration_posterior(int n, int m, double r_obs_m, int grid_points) {
  if (n < 0 || m < 0 || n > m) throw ArgumentError("concentration_posterior: need 0 <= n_obs <= m_trials");
  if (m == 0) throw DomainError("concentration_posterior: no data (n_obs = m_trials = 0)");
  if (n == m) throw DomainError("concentration_posterior: posterior is not normalizable when every trial is positive");
  if (grid_points < 100) throw ArgumentError("concentration_posterior: grid too coarse");
  ConcentrationPosterior post;
  post.v_obs = observable_volume_cm3(r_obs_m);
  const double v = post.v_obs;
  const int k = m - n;

  // x = rho V; log grid from 1e-8/k to 60/k plus the origin
  const double x_lo = 1e-8 / k, x_hi = 60.0 / k;
  std::vector<double> xs{0.0};
  for (int i = 0; i < grid_points - 1; ++i)
    xs.push_back(x_lo * std::pow(x_hi / x_lo, static_cast<double>(i) / (grid_points - 2)));
  auto log_like = [&](double x) {
    if (x == 0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return -k * x + (n > 0 ? n * std::log(-std::expm1(-x)) : 0.0);
  };
  post.grid.resize(xs.size());
  post.density.resize(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    post.grid[i] = xs[i] / v;
    post.density[i] = std::exp(log_like(xs[i]));
  }
  post.cdf.assign(xs.size(), 0.0);
  for (size_t i = 1; i < xs.size(); ++i)
    post.cdf[i] =
        post.cdf[i - 1] + 0.5 * (post.density[i] + post.density[i - 1]) * (post.grid[i] - post.grid[i - 1]);
  const double z = post.cdf.back();
  for (size_t i = 0; i < xs.size(); ++i) {
    post.density[i] /= z;
    post.cdf[i] /= z;
  }

  post.mode = n == 0 ? 0.0 : std::log(static_cast<double>(m) / k) / v;
  post.grid_mode = post.grid[std::max_element(post.density.begin(), post.density.end()) - post.density.begin()];

  auto quantile = [&](double q) {
    const auto it = std::lower_bound(post.cdf.begin(), post.cdf.end(), q);
    const size_t i = std::max<size_t>(1, it - post.cdf.begin());
    const double t = (q - post.cdf[i - 1]) / (post.cdf[i] - post.cdf[i - 1]);
    return post.grid[i - 1] + t * (post.grid[i] - post.grid[i - 1]);
  };
  auto cdf_at = [&](double rho) {
    const auto it = std::lower_bound(post.grid.begin(), post.grid.end(), rho);
    const size_t i = std::clamp<size_t>(it - post.grid.begin(), 1, post.grid.size() - 1);
    const double t = (rho - post.grid[i - 1]) / (post.grid[i] - post.grid[i - 1]);
    return post.cdf[i - 1] + t * (post.cdf[i] - post.cdf[i - 1]);
  };
  post.ci68 = {quantile(0.16), quantile(0.84)};

  // HPD: bisection on the density level; the posterior is unimodal.
  const size_t imax = std::max_element(post.density.begin(), post.density.end()) - post.density.begin();
  auto crossing = [&](double h, bool left) {
    if (left) {
      size_t i = imax;
      while (i > 0 && post.density[i - 1] >= h) --i;
      if (i == 0) return post.grid[0];
      const double t = (h - post.density[i - 1]) / (post.density[i] - post.density[i - 1]);
      return post.grid[i - 1] + t * (post.grid[i] - post.grid[i - 1]);
    }
    size_t i = imax;
    while (i + 1 < post.grid.size() && post.density[i + 1] >= h) ++i;
    if (i + 1 == post.grid.size()) return post.grid.back();
    const double t = (post.density[i] - h) / (post.density[i] - post.density[i + 1]);
    return post.grid[i] + t * (post.grid[i + 1] - post.grid[i]);
  };
  double h_lo = 0, h_hi = post.density[imax];
  for (int it = 0; it < 200; ++it) {
    const double h = 0.5 * (h_lo + h_hi);
    const double mass = cdf_at(crossing(h, false)) - cdf_at(crossing(h, true));
    (mass > 0.68 ? h_lo : h_hi) = h;
  }
  const double h = 0.5 * (h_lo + h_hi);
  post.hpd68 = {crossing(h, true), crossing(h, false)};
  return post;
}

double observable_radius(double alpha, int n_pulses, double threshold_rotation, double reference_radius) {
  if (!(alpha > 0) || n_pulses < 1 || !(threshold_rotation > 0) || !(reference_radius > 0))
    throw ArgumentError("observable_radius: inputs must be positive");
  return reference_radius * std::cbrt(n_pulses * alpha / threshold_rotation);
}

}  // namespace spinforge
