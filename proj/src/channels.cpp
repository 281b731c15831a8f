#include "spinforge/channels.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <limits>
#include <random>

#include "spinforge/errors.hpp"
#include "spinforge/parallel.hpp"
#include "spinforge/sequences.hpp"
#include "spinforge/units.hpp"

namespace spinforge {

// ---------------------------------------------------------------- superoperators

CMatrix vec(const CMatrix& m) {
  const int d = static_cast<int>(m.rows());
  CMatrix v(d * d, 1);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) v(i + j * d, 0) = m(i, j);
  return v;
}

CMatrix unvec(const CMatrix& v, int d) {
  if (v.size() != d * d) throw DimensionError("unvec: size mismatch");
  CMatrix m(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) m(i, j) = v(i + j * d, 0);
  return m;
}

QuantumChannel::QuantumChannel(CMatrix superop) : s_(std::move(superop)) {
  if (s_.rows() != s_.cols()) throw DimensionError("QuantumChannel: superoperator must be square");
  dim_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(s_.rows()))));
  if (dim_ * dim_ != s_.rows()) throw DimensionError("QuantumChannel: superoperator size is not a square");
}

QuantumChannel QuantumChannel::identity(int dim) { return QuantumChannel(CMatrix::Identity(dim * dim, dim * dim)); }

QuantumChannel QuantumChannel::unitary(const CMatrix& u) { return QuantumChannel(tensor(u.conjugate(), u)); }

QuantumChannel QuantumChannel::from_kraus(const std::vector<CMatrix>& kraus) {
  if (kraus.empty()) throw DimensionError("from_kraus: empty Kraus set");
  const int d = static_cast<int>(kraus.front().rows());
  CMatrix s = CMatrix::Zero(d * d, d * d);
  for (const auto& k : kraus) {
    if (k.rows() != d || k.cols() != d) throw DimensionError("from_kraus: Kraus operators differ in shape");
    s += tensor(k.conjugate(), k);
  }
  return QuantumChannel(s);
}

QuantumChannel QuantumChannel::mixture(const std::vector<QuantumChannel>& channels,
                                       const std::vector<double>& weights) {
  if (channels.empty() || channels.size() != weights.size()) throw DimensionError("mixture: size mismatch");
  CMatrix s = CMatrix::Zero(channels.front().s_.rows(), channels.front().s_.cols());
  for (size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].dim_ != channels.front().dim_) throw DimensionError("mixture: dimension mismatch");
    s += weights[i] * channels[i].s_;
  }
  return QuantumChannel(s);
}

CMatrix QuantumChannel::apply(const CMatrix& rho) const {
  if (rho.rows() != dim_) throw DimensionError("QuantumChannel::apply: state dimension mismatch");
  return unvec(s_ * vec(rho), dim_);
}

DensityMatrix QuantumChannel::apply(const DensityMatrix& rho) const {
  CMatrix out = apply(rho.mat());
  return DensityMatrix::trusted(0.5 * (out + out.adjoint()));
}

QuantumChannel QuantumChannel::then(const QuantumChannel& next) const {
  if (next.dim_ != dim_) throw DimensionError("QuantumChannel::then: dimension mismatch");
  return QuantumChannel(next.s_ * s_);
}

QuantumChannel QuantumChannel::power(int n) const {
  if (n < 0) throw ArgumentError("QuantumChannel::power: n must be >= 0");
  CMatrix result = CMatrix::Identity(s_.rows(), s_.cols());
  CMatrix base = s_;
  while (n > 0) {
    if (n & 1) result = base * result;
    base = base * base;
    n >>= 1;
  }
  return QuantumChannel(result);
}

CMatrix QuantumChannel::choi() const {
  const int d = dim_;
  CMatrix j = CMatrix::Zero(d * d, d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      CMatrix e = CMatrix::Zero(d, d);
      e(a, b) = 1;
      j.block(a * d, b * d, d, d) = apply(e);
    }
  return j;
}

std::vector<CMatrix> QuantumChannel::kraus(double tol) const {
  const CMatrix j = choi();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(0.5 * (j + j.adjoint())));
  std::vector<CMatrix> out;
  const int d = dim_;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double lam = es.eigenvalues()[k];
    if (lam <= tol) continue;
    CMatrix kop(d, d);
    for (int i = 0; i < d; ++i)
      for (int a = 0; a < d; ++a) kop(a, i) = std::sqrt(lam) * es.eigenvectors()(i * d + a, k);
    out.push_back(kop);
  }
  return out;
}

double QuantumChannel::trace_error(const std::vector<CMatrix>& states) const {
  double worst = 0;
  for (const auto& r : states) worst = std::max(worst, std::abs(apply(r).trace() - r.trace()));
  return worst;
}

double QuantumChannel::choi_min_eigenvalue() const {
  const CMatrix j = choi();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(0.5 * (j + j.adjoint())),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double QuantumChannel::kraus_completeness_error() const {
  CMatrix sum = CMatrix::Zero(dim_, dim_);
  for (const auto& k : kraus()) sum += k.adjoint() * k;
  return max_abs(sum - CMatrix::Identity(dim_, dim_));
}

std::vector<CMatrix> random_density_matrices(int dim, int count, std::uint64_t seed) {
  std::vector<CMatrix> out;
  for (int s = 0; s < count; ++s) {
    auto rng = parallel::stream(seed, static_cast<std::uint64_t>(s));
    std::normal_distribution<double> g(0.0, 1.0);
    CMatrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m(i, j) = cplx(g(rng), g(rng));
    CMatrix rho = m * m.adjoint();
    rho /= rho.trace();
    out.push_back(rho);
  }
  return out;
}

// ---------------------------------------------------------------- ensembles

LarmorEnsemble::LarmorEnsemble() : LarmorEnsemble(from_dark_spins(2250.0, 7180.0)) {}

LarmorEnsemble::LarmorEnsemble(std::vector<double> detunings_, std::vector<double> weights_)
    : detunings(std::move(detunings_)), weights(std::move(weights_)) {
  if (detunings.empty() || detunings.size() != weights.size())
    throw ArgumentError("LarmorEnsemble: detunings and weights must have equal nonzero length");
  double sum = 0;
  for (double w : weights) {
    if (w < 0) throw DomainError("LarmorEnsemble: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DomainError("LarmorEnsemble: weights must sum to 1");
}

LarmorEnsemble LarmorEnsemble::single(double detuning) { return LarmorEnsemble({detuning}, {1.0}); }

LarmorEnsemble LarmorEnsemble::from_dark_spins(double a1_hz, double a2_hz) {
  const double s = units::hz_to_angular(a1_hz + a2_hz), d = units::hz_to_angular(a2_hz - a1_hz);
  return LarmorEnsemble({s, d, -d, -s}, {0.25, 0.25, 0.25, 0.25});
}

LarmorEnsemble LarmorEnsemble::scaled(double factor) const {
  LarmorEnsemble e = *this;
  for (double& x : e.detunings) x *= factor;
  return e;
}

// ---------------------------------------------------------------- Lindblad

QuantumChannel electron_dephasing(double t, double t2, int dim) {
  if (!(t2 > 0)) throw ArgumentError("electron_dephasing: T2 must be > 0");
  const double f = std::exp(-std::abs(t) / t2);
  const int half = dim / 2;
  CMatrix s = CMatrix::Identity(dim * dim, dim * dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i)
      if ((i < half) != (j < half)) s(i + j * dim, i + j * dim) = f;
  return QuantumChannel(s);
}

QuantumChannel lindblad_step(const CMatrix& h, double t, std::optional<double> t2) {
  QuantumChannel u = QuantumChannel::unitary(expm_hermitian(h, t));
  if (!t2) return u;
  return u.then(electron_dephasing(t, *t2, static_cast<int>(h.rows())));
}

CMatrix lindblad_rk4(const CMatrix& h, const CMatrix& rho0, double t, double t2, int steps) {
  const int d = static_cast<int>(h.rows());
  const CMatrix z = embed(pauli::z(), 0, qubit_count(d));
  const double g = 1.0 / (2.0 * t2);
  auto rhs = [&](const CMatrix& r) -> CMatrix { return -kI * (h * r - r * h) + g * (z * r * z - r); };
  CMatrix r = rho0;
  const double dt = t / steps;
  for (int s = 0; s < steps; ++s) {
    const CMatrix k1 = rhs(r);
    const CMatrix k2 = rhs(r + 0.5 * dt * k1);
    const CMatrix k3 = rhs(r + 0.5 * dt * k2);
    const CMatrix k4 = rhs(r + dt * k3);
    r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return r;
}

// ---------------------------------------------------------------- SWAP

CMatrix rx(double a) { return AxisAngle(Vec3::UnitX(), a).matrix(); }
CMatrix ry(double a) { return AxisAngle(Vec3::UnitY(), a).matrix(); }
CMatrix rz(double a) { return AxisAngle(Vec3::UnitZ(), a).matrix(); }

CMatrix ideal_xy8() {
  return tensor(pauli::proj_up(), rx(M_PI / 2)) + tensor(pauli::proj_down(), rx(-M_PI / 2));
}

CMatrix swap_unitary_ideal() {
  const CMatrix x = ideal_xy8();
  return x * tensor(ry(-M_PI / 2), rz(M_PI / 2)) * x * tensor(rx(M_PI / 2), rz(M_PI / 2)) * x;
}

CMatrix iswap_from_swap(const CMatrix& u) {
  if (u.rows() != 4) throw DimensionError("iswap_from_swap: need a 4x4 unitary");
  return tensor(rz(5 * M_PI / 4), rz(0)) * u * tensor(rz(M_PI), rz(M_PI / 4));
}

namespace {

PulseSequence swap_sequence(double tau0, int n) {
  PulseSequence s("SWAP");
  s.composite(CompositeKind::CondRx, tau0, n);
  s.pulse(Vec3::UnitX(), M_PI / 2).free(tau0);
  s.composite(CompositeKind::CondRx, tau0, n);
  s.pulse(Vec3::UnitY(), -M_PI / 2).free(tau0);
  s.composite(CompositeKind::CondRx, tau0, n);
  return s;
}

QuantumChannel sequence_channel(const PulseSequence& seq, const CMatrix& h, std::optional<double> t2) {
  std::map<double, QuantumChannel> cache;
  QuantumChannel out = QuantumChannel::identity(4);
  const PulseSequence flat = seq.expanded();
  for (const auto& e : flat.elements()) {
    if (const auto* f = std::get_if<FreeEvolution>(&e)) {
      auto it = cache.find(f->duration);
      if (it == cache.end()) it = cache.emplace(f->duration, lindblad_step(h, f->duration, t2)).first;
      out = out.then(it->second);
    } else if (const auto* q = std::get_if<ElectronPulse>(&e)) {
      out = out.then(QuantumChannel::unitary(electron_rotation(q->axis, q->angle)));
    }
  }
  return out;
}

}  // namespace

SwapGate swap_unitary(const HyperfineParams& p) {
  SwapGate g;
  g.tau0 = gate_tau0(p);
  g.n_pulses = entangling_pulse_count(p, g.tau0);
  g.unitary = sequence_unitary(swap_sequence(g.tau0, g.n_pulses), p);
  const double rot = g.n_pulses * dd_block(p, g.tau0).alpha;
  g.alpha_warning = std::abs(rot - M_PI / 2) > 0.2 * (M_PI / 2);
  return g;
}

QuantumChannel swap_channel(const HyperfineParams& p, const LarmorEnsemble& ens, std::optional<double> t2) {
  const double tau0 = gate_tau0(p);
  const int n = entangling_pulse_count(p, tau0);
  const PulseSequence seq = swap_sequence(tau0, n);
  std::vector<QuantumChannel> branches;
  for (double d : ens.detunings) branches.push_back(sequence_channel(seq, ground_hamiltonian(p, d), t2));
  return QuantumChannel::mixture(branches, ens.weights);
}

double swap_computational_fidelity(const QuantumChannel& swap) {
  double f = 0;
  for (int e = 0; e < 2; ++e)
    for (int n = 0; n < 2; ++n) {
      CMatrix rho = CMatrix::Zero(4, 4);
      rho(2 * e + n, 2 * e + n) = 1;
      f += swap.apply(rho)(2 * n + e, 2 * n + e).real();
    }
  return f / 4;
}

// ---------------------------------------------------------------- optics

CMatrix ground_hamiltonian(const HyperfineParams& p, double detuning) {
  return hamiltonian(p.with_larmor_shift(detuning));
}

CMatrix excited_hamiltonian(const HyperfineParams& p, const ExcitedHyperfine& e, double detuning) {
  const double wl = p.omega_l + detuning;
  const CMatrix perp = std::cos(e.azimuth) * pauli::sx() + std::sin(e.azimuth) * pauli::sy();
  const CMatrix hp = (e.a_par + wl) * pauli::sz() + e.a_perp * perp;
  const CMatrix hm = (-e.a_par + wl) * pauli::sz() - e.a_perp * perp;
  return tensor(pauli::proj_up(), hp) + tensor(pauli::proj_down(), hm);
}

namespace {

class EigenPropagator {
 public:
  explicit EigenPropagator(const CMatrix& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(0.5 * (h + h.adjoint())));
    vecs_ = es.eigenvectors();
    vals_ = es.eigenvalues();
  }
  CMatrix operator()(double t) const {
    Eigen::VectorXcd ph(vals_.size());
    for (Eigen::Index k = 0; k < vals_.size(); ++k) ph[k] = std::exp(-kI * vals_[k] * t);
    return vecs_ * ph.asDiagonal() * vecs_.adjoint();
  }
  double spread() const { return vals_.maxCoeff() - vals_.minCoeff(); }

 private:
  Eigen::MatrixXcd vecs_;
  Eigen::VectorXd vals_;
};

// Conjugation superoperator conj(U) (x) U without building the dense Kronecker product twice.
void add_conjugation(CMatrix& s, const CMatrix& u, double w) { s.noalias() += w * tensor(u.conjugate(), u); }

}  // namespace

QuantumChannel excitation_channel(const HyperfineParams& p, const OpticalParams& opt, ExciteBranch branch,
                                  const LarmorEnsemble& ens) {
  if (!(opt.t1_op > 0) || !(opt.t_window > 0)) throw DomainError("excitation_channel: times must be > 0");
  if (opt.p_flip < 0 || opt.p_flip > 1) throw DomainError("excitation_channel: p_flip outside [0, 1]");
  if (opt.gl_nodes < 2) throw ArgumentError("excitation_channel: need at least 2 quadrature nodes");
  const bool readout = branch == ExciteBranch::Readout;
  const CMatrix p_up = tensor(pauli::proj_up(), pauli::identity());
  const CMatrix p_down = tensor(pauli::proj_down(), pauli::identity());
  const CMatrix p_exc = readout ? p_down : p_up;
  const CMatrix p_dark = readout ? p_up : p_down;
  const CMatrix xe = electron_pi_x();
  const CMatrix pre = (!readout && opt.excited_mw_flip) ? CMatrix(xe) : CMatrix(CMatrix::Identity(4, 4));
  const double tw = opt.t_window, t1 = opt.t1_op, pf = opt.p_flip;

  gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(opt.gl_nodes);
  CMatrix total = CMatrix::Zero(16, 16);
  for (size_t b = 0; b < ens.detunings.size(); ++b) {
    const EigenPropagator ug(ground_hamiltonian(p, ens.detunings[b]));
    const EigenPropagator ue(excited_hamiltonian(p, opt.excited, ens.detunings[b]));
    const double spread = std::max(ug.spread(), ue.spread());
    const int panels = std::max(1, static_cast<int>(std::ceil(spread * tw / opt.max_panel_phase)));
    CMatrix s_exc = CMatrix::Zero(16, 16);
    auto add_decay = [&](double t, double w) {
      const CMatrix ge = ue(t) * pre;
      const CMatrix u = ug(tw - t) * ge;
      add_conjugation(s_exc, u, w * (1 - pf));
      if (pf > 0) add_conjugation(s_exc, ug(tw - t) * xe * ge, w * pf);
    };
    for (int k = 0; k < panels; ++k) {
      const double a = tw * k / panels, c = tw * (k + 1) / panels;
      for (int i = 0; i < opt.gl_nodes; ++i) {
        double t, w;
        gsl_integration_glfixed_point(a, c, static_cast<size_t>(i), &t, &w, table);
        add_decay(t, w * std::exp(-t / t1) / t1);
      }
    }
    // no decay inside the window
    add_decay(tw, std::exp(-tw / t1));
    CMatrix s_dark = CMatrix::Zero(16, 16);
    add_conjugation(s_dark, ug(tw), 1.0);
    const CMatrix proj_exc = tensor(p_exc.conjugate(), p_exc);
    const CMatrix proj_dark = tensor(p_dark.conjugate(), p_dark);
    total += ens.weights[b] * (s_dark * proj_dark + s_exc * proj_exc);
  }
  gsl_integration_glfixed_table_free(table);
  return QuantumChannel(total);
}

QuantumChannel pipeline_channel(const HyperfineParams& p, const OpticalParams& opt, ExciteBranch branch,
                                const LarmorEnsemble& ens) {
  const int n = branch == ExciteBranch::Readout ? opt.n_readout_pulses : opt.n_init_pulses;
  if (n < 1) throw DomainError("pipeline_channel: pulse count must be >= 1");
  return excitation_channel(p, opt, branch, ens).power(n);
}

ReadoutResult readout_pipeline(const HyperfineParams& p, const OpticalParams& opt, const LarmorEnsemble& ens,
                               const DensityMatrix& rho_in, ExciteBranch branch) {
  if (rho_in.dim() != 4) throw DimensionError("readout_pipeline: state must be 4x4");
  const CMatrix p_down = tensor(pauli::proj_down(), pauli::identity());
  const auto ch = pipeline_channel(p, opt, branch, ens);
  ReadoutResult r{ch.apply(rho_in), 0, 0};
  r.p_bright = rho_in.population(p_down);
  r.p_dark = 1 - r.p_bright;
  return r;
}

// ---------------------------------------------------------------- closed forms

double dephasing_purity(double delta_f, double gamma_decay, int n) {
  if (!(gamma_decay > 0)) throw DomainError("dephasing_purity: decay rate must be > 0");
  if (n < 0) throw DomainError("dephasing_purity: n must be >= 0");
  const double r = 2 * M_PI * delta_f / gamma_decay;
  return std::pow(1.0 / std::sqrt(1.0 + r * r), n);
}

cplx coherence_factor(double delta_a, double gamma_decay) { return gamma_decay / cplx(gamma_decay, -delta_a); }

double dephasing_purity_iterated(double delta_a, double gamma_decay, int n) {
  if (!(gamma_decay > 0)) throw DomainError("dephasing_purity_iterated: decay rate must be > 0");
  // Averaging exp(L t) over gamma e^{-gamma t} gives gamma (gamma - L)^{-1}.
  const CMatrix he = delta_a * pauli::sz();
  const CMatrix id = pauli::identity();
  const CMatrix l = -kI * (tensor(id, he) - tensor(he.transpose(), id));
  const CMatrix step = gamma_decay * (gamma_decay * CMatrix::Identity(4, 4) - l).inverse();
  const QuantumChannel ch(step);
  CMatrix rho(2, 2);
  rho << 0.5, 0.5, 0.5, 0.5;
  const CMatrix out = ch.power(n).apply(rho);
  return std::hypot((out(0, 0) - out(1, 1)).real(), 2 * std::abs(out(0, 1)));
}

double t1_bound(double f_exp, double f_sim, double t_store) {
  if (!(f_exp > 0) || f_sim > 1 || !(t_store > 0)) throw DomainError("t1_bound: inputs outside (0, 1] or t_store <= 0");
  if (f_exp > f_sim) throw DomainError("t1_bound: f_exp exceeds f_sim");
  if (f_exp == f_sim) return std::numeric_limits<double>::infinity();
  return t_store / std::log(f_sim / f_exp);
}

// ---------------------------------------------------------------- SWAP experiment

CorrelationHistogram swap_experiment(const HyperfineParams& p, const OpticalParams& opt, const LarmorEnsemble& ens,
                                     const SwapExperimentConfig& cfg) {
  if (cfg.loop_pattern.empty()) throw ArgumentError("swap_experiment: empty loop pattern");
  for (int i : cfg.loop_pattern)
    if (i != 0 && i != 1) throw ArgumentError("swap_experiment: loop pattern entries must be 0 or 1");
  if (cfg.n_loops < 2) throw ArgumentError("swap_experiment: need at least 2 loops");

  const CMatrix p_up = tensor(pauli::proj_up(), pauli::identity());
  const CMatrix p_down = tensor(pauli::proj_down(), pauli::identity());
  const QuantumChannel flip = QuantumChannel::unitary(electron_pi_x());

  QuantumChannel init, readout;
  if (cfg.optics) {
    init = pipeline_channel(p, opt, ExciteBranch::Init, ens);
    readout = pipeline_channel(p, opt, ExciteBranch::Readout, ens);
  } else {
    // reset the electron to |1> keeping the nucleus; non-selective readout
    const CMatrix lower = tensor(CMatrix(pauli::proj_down() * pauli::x()), pauli::identity());
    init = QuantumChannel::from_kraus({p_down, lower});
    readout = QuantumChannel::from_kraus({p_up, p_down});
  }
  const QuantumChannel init0 = init.then(flip);
  const QuantumChannel gate = cfg.control ? QuantumChannel::identity(4) : swap_channel(p, ens, cfg.dephasing_t2);
  const QuantumChannel step0 = init0.then(gate), step1 = init.then(gate);

  const size_t period = cfg.loop_pattern.size();
  CMatrix rho = CMatrix::Identity(4, 4) / 4.0;
  std::vector<double> p_bright(period, 0.0);
  // run to the periodic steady state
  double change = 1;
  for (int sweep = 0; sweep < 10000 && change > 1e-13; ++sweep) {
    change = 0;
    for (size_t k = 0; k < period; ++k) {
      rho = (cfg.loop_pattern[k] ? step1 : step0).apply(rho);
      const double pb = (p_down * rho).trace().real();
      change = std::max(change, std::abs(pb - p_bright[k]));
      p_bright[k] = pb;
      rho = readout.apply(rho);
    }
  }

  CorrelationHistogram h;
  h.pattern = cfg.loop_pattern;
  h.n_loops = cfg.n_loops;
  std::array<std::array<double, 2>, 2> norm_same{}, norm_next{};
  for (size_t k = 0; k < period; ++k) {
    const int i = cfg.loop_pattern[k];
    const double pm_same = p_bright[k], pm_next = p_bright[(k + 1) % period];
    h.p_same[i][1] += pm_same;
    h.p_same[i][0] += 1 - pm_same;
    h.p_next[i][1] += pm_next;
    h.p_next[i][0] += 1 - pm_next;
    norm_same[i][0] += 1;
    norm_next[i][0] += 1;
    h.fidelity += (i == 1 ? pm_next : 1 - pm_next) / period;
    h.control_fidelity += (i == 1 ? pm_same : 1 - pm_same) / period;
  }
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < 2; ++m) {
      if (norm_same[i][0] > 0) h.p_same[i][m] /= norm_same[i][0];
      if (norm_next[i][0] > 0) h.p_next[i][m] /= norm_next[i][0];
    }

  std::vector<int> outcomes(cfg.n_loops);
  for (int k = 0; k < cfg.n_loops; ++k) {
    auto rng = parallel::stream(cfg.seed, static_cast<std::uint64_t>(k));
    std::bernoulli_distribution bright(p_bright[k % period]);
    outcomes[k] = bright(rng) ? 1 : 0;
  }
  for (int k = 0; k < cfg.n_loops; ++k) {
    const int i = cfg.loop_pattern[k % period];
    h.same_loop[i][outcomes[k]]++;
    if (k + 1 < cfg.n_loops) h.next_loop[i][outcomes[k + 1]]++;
  }
  return h;
}

}  // namespace spinforge
