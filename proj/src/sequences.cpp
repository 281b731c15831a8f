#include "spinforge/sequences.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>

#include "spinforge/errors.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

namespace {

// exp(-iHt) for many t from one eigendecomposition.
class Propagator {
 public:
  explicit Propagator(const CMatrix& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(0.5 * (h + h.adjoint())));
    vecs_ = es.eigenvectors();
    vals_ = es.eigenvalues();
  }
  CMatrix operator()(double t) const {
    Eigen::VectorXcd ph(vals_.size());
    for (Eigen::Index k = 0; k < vals_.size(); ++k) ph[k] = std::exp(-kI * vals_[k] * t);
    return vecs_ * ph.asDiagonal() * vecs_.adjoint();
  }

 private:
  Eigen::MatrixXcd vecs_;
  Eigen::VectorXd vals_;
};

void dephase_electron(CMatrix& rho, double factor) {
  const int d = static_cast<int>(rho.rows());
  const int half = d / 2;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if ((i < half) != (j < half)) rho(i, j) *= factor;
}

}  // namespace

PulseSequence& PulseSequence::free(double duration) {
  if (!(duration > 0)) throw ArgumentError("FreeEvolution duration must be > 0");
  elements_.emplace_back(FreeEvolution{duration});
  return *this;
}

PulseSequence& PulseSequence::pulse(const Vec3& axis, double angle) {
  if (axis.norm() == 0) throw ArgumentError("ElectronPulse axis must be nonzero");
  elements_.emplace_back(ElectronPulse{axis.normalized(), angle});
  return *this;
}

PulseSequence& PulseSequence::composite(CompositeKind kind, double tau0, int n_pulses) {
  if (!(tau0 > 0)) throw ArgumentError("NuclearCompositePulse tau0 must be > 0");
  if (n_pulses < 2 || n_pulses % 2) throw ArgumentError("NuclearCompositePulse n_pulses must be even and >= 2");
  elements_.emplace_back(NuclearCompositePulse{kind, tau0, n_pulses});
  return *this;
}

PulseSequence& PulseSequence::measure(std::string basis) {
  elements_.emplace_back(Measure{std::move(basis)});
  return *this;
}

PulseSequence& PulseSequence::append(const PulseSequence& other) {
  elements_.insert(elements_.end(), other.elements_.begin(), other.elements_.end());
  return *this;
}

double PulseSequence::total_duration() const {
  double t = 0;
  const PulseSequence flat = expanded();
  for (const auto& e : flat.elements_)
    if (const auto* f = std::get_if<FreeEvolution>(&e)) t += f->duration;
  return t;
}

PulseSequence xyn_block(double tau, int n_pulses) {
  PulseSequence s("XY-" + std::to_string(n_pulses));
  for (int k = 0; k < n_pulses; ++k) s.free(tau).pulse(Vec3::UnitX(), M_PI).free(tau);
  return s;
}

PulseSequence cnot_e_sequence(double tau0, int n_pulses) {
  PulseSequence s("CnNOTe");
  s.pulse(Vec3::UnitY(), -M_PI / 2).append(xyn_block(tau0, n_pulses));
  s.pulse(Vec3::UnitY(), M_PI / 2).pulse(Vec3::UnitX(), M_PI / 2);
  return s;
}

PulseSequence PulseSequence::expanded() const {
  PulseSequence out(id_);
  for (const auto& e : elements_) {
    if (const auto* c = std::get_if<NuclearCompositePulse>(&e)) {
      switch (c->kind) {
        case CompositeKind::CnNOTe: out.append(cnot_e_sequence(c->tau0, c->n_pulses)); break;
        case CompositeKind::UncondPiX: out.append(xyn_block(c->tau0, 2 * c->n_pulses)); break;
        case CompositeKind::CondRx: out.append(xyn_block(c->tau0, c->n_pulses)); break;
      }
    } else {
      out.elements_.push_back(e);
    }
  }
  return out;
}

PulseSequence PulseSequence::inverse() const {
  const PulseSequence ex = expanded();
  PulseSequence out(id_ + "^-1");
  for (auto it = ex.elements_.rbegin(); it != ex.elements_.rend(); ++it) {
    if (const auto* f = std::get_if<FreeEvolution>(&*it)) {
      out.elements_.emplace_back(FreeEvolution{-f->duration});
    } else if (const auto* p = std::get_if<ElectronPulse>(&*it)) {
      out.elements_.emplace_back(ElectronPulse{p->axis, -p->angle});
    } else {
      out.elements_.push_back(*it);
    }
  }
  return out;
}

CMatrix sequence_unitary(const PulseSequence& seq, const HyperfineParams& p) {
  const Propagator prop(hamiltonian(p));
  CMatrix u = CMatrix::Identity(4, 4);
  std::map<double, CMatrix> cache;
  const PulseSequence flat = seq.expanded();
  for (const auto& e : flat.elements()) {
    if (const auto* f = std::get_if<FreeEvolution>(&e)) {
      auto it = cache.find(f->duration);
      if (it == cache.end()) it = cache.emplace(f->duration, prop(f->duration)).first;
      u = it->second * u;
    } else if (const auto* q = std::get_if<ElectronPulse>(&e)) {
      u = electron_rotation(q->axis, q->angle) * u;
    }
  }
  return u;
}

DensityMatrix simulate_sequence(const PulseSequence& seq, const HyperfineParams& p, const DensityMatrix& initial,
                                std::optional<double> dephasing_t2) {
  if (initial.dim() != 4) throw DimensionError("simulate_sequence: initial state must be 4x4");
  if (dephasing_t2 && !(*dephasing_t2 > 0)) throw ArgumentError("simulate_sequence: dephasing_t2 must be > 0");
  const Propagator prop(hamiltonian(p));
  CMatrix rho = initial.mat();
  std::map<double, CMatrix> cache;
  const PulseSequence flat = seq.expanded();
  for (const auto& e : flat.elements()) {
    if (const auto* f = std::get_if<FreeEvolution>(&e)) {
      auto it = cache.find(f->duration);
      if (it == cache.end()) it = cache.emplace(f->duration, prop(f->duration)).first;
      rho = it->second * rho * it->second.adjoint();
      if (dephasing_t2) dephase_electron(rho, std::exp(-std::abs(f->duration) / *dephasing_t2));
    } else if (const auto* q = std::get_if<ElectronPulse>(&e)) {
      const CMatrix r = electron_rotation(q->axis, q->angle);
      rho = r * rho * r.adjoint();
    }
  }
  rho = 0.5 * (rho + rho.adjoint());
  return DensityMatrix::trusted(rho);
}

double gate_tau0(const HyperfineParams& p) { return 0.5 * refine_resonance(p, 0).spacing; }

SignalTrace xyn_spectrum(const HyperfineParams& p, const std::vector<double>& grid, int n_pulses,
                         parallel::Exec exec) {
  SignalTrace tr;
  tr.times = grid;
  tr.values.assign(grid.size(), 0.0);
  tr.metadata["sequence"] = "xy" + std::to_string(n_pulses);
  tr.metadata["time_axis"] = "tau (half pulse spacing)";
  auto point = [&](long i) {
    if (!(grid[i] > 0)) throw ArgumentError("xyn_spectrum: tau must be > 0");
    const CMatrix u = xyn_propagator(p, grid[i], n_pulses);
    const cplx overlap = (u.block(0, 0, 2, 2) * u.block(2, 2, 2, 2).adjoint()).trace();
    tr.values[i] = 0.5 * (1.0 + 0.5 * overlap.real());
  };
  const long n = static_cast<long>(grid.size());
  if (exec == parallel::Exec::Parallel) {
    std::exception_ptr err;
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) {
      try {
        point(i);
      } catch (...) {
#pragma omp critical
        err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (long i = 0; i < n; ++i) point(i);
  }
  return tr;
}

DensityMatrix ramsey_initial_state() { return DensityMatrix(tensor(pauli::proj_down(), 0.5 * pauli::identity())); }

namespace {

struct RamseyCore {
  double ap = 0, am = 0, term = 0;
};

// Quantities shared by both closed forms at free evolution tau_c.
RamseyCore ramsey_core(const HyperfineParams& p, double tau_c) {
  const auto c = precession(p);
  const double phi_p = c.omega_plus * tau_c / 2, phi_m = c.omega_minus * tau_c / 2;
  RamseyCore r;
  r.ap = phi_p;
  r.am = phi_m;
  r.term = p.a_perp / (c.omega_plus * c.omega_minus) *
           (c.omega0() * std::sin((phi_p - phi_m) / 2) + 2 * p.a_par * std::sin((phi_p + phi_m) / 2));
  return r;
}

SignalTrace ramsey_trace(const HyperfineParams& p, const std::vector<double>& grid, bool exact, bool sdelta,
                         parallel::Exec exec) {
  for (size_t i = 1; i < grid.size(); ++i)
    if (grid[i] < grid[i - 1]) throw ArgumentError("ramsey: tau_c grid must be ascending");
  SignalTrace tr;
  tr.times = grid;
  tr.values.assign(grid.size(), 0.0);
  tr.metadata["sequence"] = sdelta ? "ramsey_sdelta" : "ramsey_s0";
  tr.metadata["path"] = exact ? "exact" : "closed_form";
  if (!grid.empty() && grid.front() < 15e-6) tr.metadata["note"] = "grid starts before the experimental 15 us offset";
  const long n = static_cast<long>(grid.size());
  if (!exact) {
    for (long i = 0; i < n; ++i) tr.values[i] = sdelta ? sdelta_closed_form(p, grid[i]) : s0_closed_form(p, grid[i]);
    return tr;
  }
  const double tau0 = gate_tau0(p);
  const int n_pulses = entangling_pulse_count(p, tau0);
  tr.metadata["tau0_s"] = std::to_string(tau0);
  tr.metadata["cnote_pulses"] = std::to_string(n_pulses);
  const CMatrix c = sequence_unitary(cnot_e_sequence(tau0, n_pulses), p);
  CMatrix mid_pi = electron_pi_x();
  if (sdelta) {
    PulseSequence s;
    s.pulse(Vec3::UnitX(), M_PI).composite(CompositeKind::UncondPiX, tau0, n_pulses);
    mid_pi = sequence_unitary(s, p);
  }
  const Propagator prop(hamiltonian(p));
  const CMatrix rho = ramsey_initial_state().mat();
  const CMatrix pdown = tensor(pauli::proj_down(), pauli::identity());
  auto point = [&](long i) {
    const CMatrix uh = prop(grid[i] / 2);
    const CMatrix u = c * uh * mid_pi * uh * c;
    tr.values[i] = (pdown * u * rho * u.adjoint()).trace().real();
  };
  if (exec == parallel::Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) point(i);
  } else {
    for (long i = 0; i < n; ++i) point(i);
  }
  return tr;
}

}  // namespace

double s0_closed_form(const HyperfineParams& p, double tau_c) {
  const auto c = precession(p);
  const auto r = ramsey_core(p, tau_c);
  const double cos_half = std::cos(r.ap / 2) * std::cos(r.am / 2) -
                          std::sin(r.ap / 2) * std::sin(r.am / 2) * std::cos(c.gamma_axes);
  return 1.0 - cos_half * cos_half - r.term * r.term;
}

double sdelta_closed_form(const HyperfineParams& p, double tau_c) {
  const auto c = precession(p);
  const auto r = ramsey_core(p, tau_c);
  // inverted axis m'_- after the extra nuclear pi pulse
  const Vec3 m_minus_inv = Vec3(-p.a_perp, 0, -(p.omega_l - p.a_par)) / c.omega_minus;
  const double cos_gamma_inv = c.m_plus.dot(m_minus_inv);
  const double cos_half =
      std::cos(r.ap / 2) * std::cos(r.am / 2) - std::sin(r.ap / 2) * std::sin(r.am / 2) * cos_gamma_inv;
  return cos_half * cos_half + r.term * r.term;
}

double s0_exact(const HyperfineParams& p, double tau_c, double tau0, int n_pulses) {
  PulseSequence s("ramsey_s0");
  s.composite(CompositeKind::CnNOTe, tau0, n_pulses);
  if (tau_c > 0) s.free(tau_c / 2);
  s.pulse(Vec3::UnitX(), M_PI);
  if (tau_c > 0) s.free(tau_c / 2);
  s.composite(CompositeKind::CnNOTe, tau0, n_pulses).measure();
  const auto out = simulate_sequence(s, p, ramsey_initial_state());
  return out.population(tensor(pauli::proj_down(), pauli::identity()));
}

double sdelta_exact(const HyperfineParams& p, double tau_c, double tau0, int n_pulses) {
  PulseSequence s("ramsey_sdelta");
  s.composite(CompositeKind::CnNOTe, tau0, n_pulses);
  if (tau_c > 0) s.free(tau_c / 2);
  s.pulse(Vec3::UnitX(), M_PI).composite(CompositeKind::UncondPiX, tau0, n_pulses);
  if (tau_c > 0) s.free(tau_c / 2);
  s.composite(CompositeKind::CnNOTe, tau0, n_pulses).measure();
  const auto out = simulate_sequence(s, p, ramsey_initial_state());
  return out.population(tensor(pauli::proj_down(), pauli::identity()));
}

SignalTrace ramsey_s0(const HyperfineParams& p, const std::vector<double>& grid, bool exact, parallel::Exec exec) {
  return ramsey_trace(p, grid, exact, false, exec);
}

SignalTrace ramsey_sdelta(const HyperfineParams& p, const std::vector<double>& grid, bool exact,
                          parallel::Exec exec) {
  return ramsey_trace(p, grid, exact, true, exec);
}

// ---------------------------------------------------------------- echoes

namespace {

struct Segment {
  double a, b, sign;
};

std::vector<Segment> echo_segments(EchoKind kind, double total) {
  if (kind.n_pi < 1) throw ArgumentError("echo: at least one refocusing pulse required");
  const int k = kind.n_pi;
  std::vector<double> edges{0.0};
  for (int j = 1; j <= k; ++j) edges.push_back(total * (j - 0.5) / k);
  edges.push_back(total);
  std::vector<Segment> segs;
  for (size_t i = 0; i + 1 < edges.size(); ++i) segs.push_back({edges[i], edges[i + 1], (i % 2) ? -1.0 : 1.0});
  return segs;
}

}  // namespace

double echo_phase_variance(EchoKind kind, double total, double tau_c) {
  if (!(tau_c > 0)) throw ArgumentError("echo: correlation time must be > 0");
  if (total <= 0) return 0.0;
  const auto segs = echo_segments(kind, total);
  double var = 0.0;
  for (size_t i = 0; i < segs.size(); ++i) {
    const double li = segs[i].b - segs[i].a;
    const double xi = li / tau_c;
    var += 2 * tau_c * tau_c * (xi - 1 + std::exp(-xi));
    for (size_t j = i + 1; j < segs.size(); ++j) {
      const double lj = segs[j].b - segs[j].a;
      const double gap = segs[j].a - segs[i].b;
      var += 2 * segs[i].sign * segs[j].sign * tau_c * tau_c * (-std::expm1(-li / tau_c)) *
             (-std::expm1(-lj / tau_c)) * std::exp(-gap / tau_c);
    }
  }
  return var;
}

double echo_t2(EchoKind kind, double sigma, double tau_c) {
  if (!(sigma > 0)) return std::numeric_limits<double>::infinity();
  auto f = [&](double t) { return sigma * sigma * echo_phase_variance(kind, t, tau_c) - 2.0; };
  double lo = 0, hi = 1e-6;
  while (f(hi) < 0) {
    lo = hi;
    hi *= 2;
    if (hi > 1e6) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double calibrate_sigma(double hahn_t2, double tau_c) {
  if (!(hahn_t2 > 0)) throw ArgumentError("calibrate_sigma: T2 must be > 0");
  return std::sqrt(2.0 / echo_phase_variance(EchoKind::hahn(), hahn_t2, tau_c));
}

SignalTrace nuclear_echo(const HyperfineParams& p, EchoKind kind, const std::vector<double>& grid,
                         const NoiseModel& noise, parallel::Exec exec) {
  SignalTrace tr;
  tr.times = grid;
  tr.values.assign(grid.size(), 1.0);
  tr.metadata["sequence"] = kind.n_pi == 1 ? "hahn" : "cpmg-" + std::to_string(kind.n_pi);
  tr.metadata["omega_l_khz"] = std::to_string(units::angular_to_khz(p.omega_l));
  tr.metadata["path"] = noise.mc_samples > 0 ? "monte_carlo" : "gaussian";
  const long n = static_cast<long>(grid.size());
  if (noise.mc_samples <= 0) {
    for (long i = 0; i < n; ++i) {
      const double chi = noise.sigma * noise.sigma * echo_phase_variance(kind, grid[i], noise.tau_c);
      // static shifts cancel because the filter integrates to zero
      tr.values[i] = 0.5 * (1.0 + std::exp(-0.5 * chi));
    }
    return tr;
  }
  const int m = noise.mc_samples;
  const int k = kind.n_pi;
  const int steps = std::max(2 * k, (noise.mc_steps / (2 * k)) * 2 * k);
  std::vector<double> cosines(static_cast<size_t>(n) * m);
  auto sample = [&](long idx) {
    const long i = idx / m;
    const double total = grid[i];
    auto rng = parallel::stream(noise.seed, static_cast<std::uint64_t>(idx));
    std::normal_distribution<double> gauss(0.0, 1.0);
    double shift = 0.0;
    if (!noise.static_shifts.empty()) {
      std::uniform_int_distribution<size_t> pick(0, noise.static_shifts.size() - 1);
      shift = noise.static_shifts[pick(rng)];
    }
    const double dt = total / steps;
    const double decay = std::exp(-dt / noise.tau_c);
    const double kick = noise.sigma * std::sqrt(1 - decay * decay);
    double x = noise.sigma * gauss(rng);
    double phase = 0.0;
    const int seg = steps / (2 * k);  // steps per half segment
    for (int s = 0; s < steps; ++s) {
      const int block = (s + seg) / (2 * seg);  // index of the toggling interval
      const double sign = (block % 2) ? -1.0 : 1.0;
      const double xn = x * decay + kick * gauss(rng);
      phase += sign * (0.5 * (x + xn) + shift) * dt;
      x = xn;
    }
    cosines[idx] = std::cos(phase);
  };
  const long total_samples = n * m;
  if (exec == parallel::Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long idx = 0; idx < total_samples; ++idx) sample(idx);
  } else {
    for (long idx = 0; idx < total_samples; ++idx) sample(idx);
  }
  for (long i = 0; i < n; ++i) {
    double acc = 0;
    for (int s = 0; s < m; ++s) acc += cosines[i * m + s];
    tr.values[i] = 0.5 * (1.0 + acc / m);
  }
  return tr;
}

// ---------------------------------------------------------------- spectra

namespace {
std::mutex fftw_plan_mutex;
}

double Spectrum::spectral_energy() const {
  if (n_fft == 0) return 0.0;
  double e = 0;
  const size_t last = amplitudes.size() - 1;
  for (size_t k = 0; k < amplitudes.size(); ++k) {
    const bool single = (k == 0) || (n_fft % 2 == 0 && k == last);
    e += (single ? 1.0 : 2.0) * amplitudes[k] * amplitudes[k];
  }
  return e / n_fft;
}

double Spectrum::peak_frequency(double f_min, double f_max) const {
  double best = -1, f = 0;
  for (size_t k = 1; k < freqs.size(); ++k) {
    if (freqs[k] < f_min || (f_max > 0 && freqs[k] > f_max)) continue;
    if (amplitudes[k] > best) {
      best = amplitudes[k];
      f = freqs[k];
    }
  }
  return f;
}

Spectrum fft_spectrum(const SignalTrace& trace, int zero_pad_factor) {
  const size_t n = trace.values.size();
  if (n < 4 || trace.times.size() != n) throw ArgumentError("fft_spectrum: need at least 4 samples");
  if (zero_pad_factor < 1) throw ArgumentError("fft_spectrum: zero_pad_factor must be >= 1");
  const double dt = (trace.times.back() - trace.times.front()) / (n - 1);
  if (!(dt > 0)) throw ArgumentError("fft_spectrum: time grid must increase");
  for (size_t i = 1; i < n; ++i)
    if (std::abs((trace.times[i] - trace.times[i - 1]) - dt) > 1e-6 * dt)
      throw ArgumentError("fft_spectrum: time grid is not uniform");
  double mean = 0;
  for (double v : trace.values) mean += v;
  mean /= n;
  const int nfft = static_cast<int>(n) * zero_pad_factor;
  std::vector<double> in(nfft, 0.0);
  Spectrum sp;
  for (size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2 * M_PI * i / (n - 1));
    in[i] = (trace.values[i] - mean) * w;
    sp.time_energy += in[i] * in[i];
  }
  std::vector<fftw_complex> out(nfft / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(nfft, in.data(), out.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  sp.n_fft = nfft;
  for (int k = 0; k <= nfft / 2; ++k) {
    sp.freqs.push_back(k / (nfft * dt));
    sp.amplitudes.push_back(std::hypot(out[k][0], out[k][1]));
  }
  return sp;
}

std::vector<double> linspace(double a, double b, int n) {
  if (n < 2) return {a};
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace spinforge
