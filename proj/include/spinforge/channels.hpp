#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spinforge/hyperfine.hpp"
#include "spinforge/qmat.hpp"

namespace spinforge {

// Linear map on density matrices stored as a superoperator acting on
// column-stacked vec(rho): vec(A rho B) = (B^T (x) A) vec(rho).
class QuantumChannel {
 public:
  QuantumChannel() = default;
  explicit QuantumChannel(CMatrix superop);

  static QuantumChannel identity(int dim);
  static QuantumChannel unitary(const CMatrix& u);
  static QuantumChannel from_kraus(const std::vector<CMatrix>& kraus);
  // Sum_i w_i E_i; weights are used as given.
  static QuantumChannel mixture(const std::vector<QuantumChannel>& channels, const std::vector<double>& weights);

  int dim() const { return dim_; }
  const CMatrix& superop() const { return s_; }

  CMatrix apply(const CMatrix& rho) const;
  DensityMatrix apply(const DensityMatrix& rho) const;
  // This channel followed by `next` in physical time.
  QuantumChannel then(const QuantumChannel& next) const;
  QuantumChannel power(int n) const;

  CMatrix choi() const;
  std::vector<CMatrix> kraus(double tol = 1e-12) const;

  // max |Tr E(rho) - 1| over the supplied states
  double trace_error(const std::vector<CMatrix>& states) const;
  double choi_min_eigenvalue() const;
  // || sum K^dagger K - I ||_max from the Choi-derived Kraus set
  double kraus_completeness_error() const;

 private:
  int dim_ = 0;
  CMatrix s_;
};

CMatrix vec(const CMatrix& m);
CMatrix unvec(const CMatrix& v, int dim);

// Random density matrices (Ginibre ensemble) of dimension `dim`, seeded.
std::vector<CMatrix> random_density_matrices(int dim, int count, std::uint64_t seed);

// Four Larmor branches from the two dark spins.
struct LarmorEnsemble {
  std::vector<double> detunings;  // rad/s
  std::vector<double> weights;

  LarmorEnsemble();
  LarmorEnsemble(std::vector<double> detunings_, std::vector<double> weights_);
  static LarmorEnsemble single(double detuning = 0.0);
  // omega_L shifts +-a1 +-a2 from Ising couplings given in Hz
  static LarmorEnsemble from_dark_spins(double a1_hz, double a2_hz);
  LarmorEnsemble scaled(double factor) const;
};

// Excited-state coupling expressed in the ground nuclear frame: the
// transverse part points at `azimuth` from the ground A_perp direction.
struct ExcitedHyperfine {
  double a_par = 0.0;
  double a_perp = 0.0;
  double azimuth = 0.0;
};

struct OpticalParams {
  double t1_op = 60e-6;
  double t_window = 120e-6;
  double p_flip = 0.002;
  int n_readout_pulses = 450;
  int n_init_pulses = 40;
  ExcitedHyperfine excited;
  // Composite Gauss-Legendre: nodes per panel and max phase per panel (rad).
  int gl_nodes = 64;
  double max_panel_phase = 8.0 * M_PI;
  bool excited_mw_flip = true;  // excited-state MW pi pulse during init
};

// Lindblad free evolution under H with electron pure dephasing, rate 1/T2
// on the coherences. Dephasing commutes with H, so the step factorizes.
QuantumChannel lindblad_step(const CMatrix& h, double t, std::optional<double> t2);
QuantumChannel electron_dephasing(double t, double t2, int dim = 4);

// Reference RK4 integration of the same master equation, used by tests.
CMatrix lindblad_rk4(const CMatrix& h, const CMatrix& rho, double t, double t2, int steps);

// Ideal gate algebra.
CMatrix ideal_xy8();  // |0><0| (x) R_x(pi/2) + |1><1| (x) R_x(-pi/2)
CMatrix swap_unitary_ideal();
CMatrix iswap_from_swap(const CMatrix& u_swap);
CMatrix rz(double angle);
CMatrix rx(double angle);
CMatrix ry(double angle);

struct SwapGate {
  CMatrix unitary;
  double tau0 = 0.0;
  int n_pulses = 8;
  bool alpha_warning = false;  // 8 alpha more than 20% from pi/2
};

// Physical SWAP: XY-8 blocks at tau0; nuclear R_z(pi/2) by free precession for tau0.
SwapGate swap_unitary(const HyperfineParams& p);
QuantumChannel swap_channel(const HyperfineParams& p, const LarmorEnsemble& ens, std::optional<double> dephasing_t2);
// Average probability that |ij> is mapped to |ji>.
double swap_computational_fidelity(const QuantumChannel& swap);

// Ground and excited 4x4 Hamiltonians for a Larmor-shifted branch.
CMatrix ground_hamiltonian(const HyperfineParams& p, double detuning);
CMatrix excited_hamiltonian(const HyperfineParams& p, const ExcitedHyperfine& e, double detuning);

enum class ExciteBranch { Init, Readout };

// One optical pulse. Readout excites |1>; init excites |0> (projectors
// swapped) and flips the excited electron with a MW pi pulse. With
// probability p_flip the decay lands in the other ground state.
QuantumChannel excitation_channel(const HyperfineParams& p, const OpticalParams& opt, ExciteBranch branch,
                                  const LarmorEnsemble& ens);

struct ReadoutResult {
  DensityMatrix state;
  double p_bright = 0.0;  // probability the electron starts in |1>
  double p_dark = 0.0;
};

// n pulses of the excitation channel in physical order.
QuantumChannel pipeline_channel(const HyperfineParams& p, const OpticalParams& opt, ExciteBranch branch,
                                const LarmorEnsemble& ens);
ReadoutResult readout_pipeline(const HyperfineParams& p, const OpticalParams& opt, const LarmorEnsemble& ens,
                               const DensityMatrix& rho_in, ExciteBranch branch = ExciteBranch::Readout);

// Closed-form Bloch-vector length after n excitation-decay cycles.
double dephasing_purity(double delta_f, double gamma_decay, int n_excitations);
// Single-excitation coherence factor c = gamma / (gamma - i delta_A).
cplx coherence_factor(double delta_a, double gamma_decay);
// Same quantity by iterating the excitation integral on a nuclear qubit with
// H_g = 0 and H_e = delta_A I_z.
double dephasing_purity_iterated(double delta_a, double gamma_decay, int n_excitations);

double t1_bound(double f_exp, double f_sim, double t_store);

struct SwapExperimentConfig {
  std::vector<int> loop_pattern{0, 0, 1, 1};
  int n_loops = 1500;
  bool control = false;  // replace SWAP by identity
  std::optional<double> dephasing_t2 = 16.1e-6;
  bool optics = true;  // false: ideal projective init/readout
  std::uint64_t seed = 1;
};

struct CorrelationHistogram {
  std::vector<int> pattern;
  int n_loops = 0;
  // counts[i][m], i = initialization, m = readout
  std::array<std::array<long, 2>, 2> same_loop{};  // (i_k, m_k)
  std::array<std::array<long, 2>, 2> next_loop{};  // (i_k, m_{k+1})
  std::array<std::array<double, 2>, 2> p_same{};   // exact conditional probabilities
  std::array<std::array<double, 2>, 2> p_next{};
  double fidelity = 0.0;          // mean P(m_{k+1} = i_k)
  double control_fidelity = 0.0;  // mean P(m_k = i_k)
};

CorrelationHistogram swap_experiment(const HyperfineParams& p, const OpticalParams& opt, const LarmorEnsemble& ens,
                                     const SwapExperimentConfig& cfg);

}  // namespace spinforge
