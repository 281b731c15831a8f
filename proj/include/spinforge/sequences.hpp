#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spinforge/hyperfine.hpp"
#include "spinforge/parallel.hpp"
#include "spinforge/qmat.hpp"

namespace spinforge {

struct FreeEvolution {
  double duration = 0.0;
};

struct ElectronPulse {
  Vec3 axis{1, 0, 0};
  double angle = M_PI;
};

enum class CompositeKind { CnNOTe, UncondPiX, CondRx };

// Nuclear gate realized by an XY-N block at pulse spacing 2 tau0. For CnNOTe
// and CondRx the block has n_pulses pulses; UncondPiX uses 2 n_pulses.
struct NuclearCompositePulse {
  CompositeKind kind = CompositeKind::CnNOTe;
  double tau0 = 0.0;
  int n_pulses = 8;
};

struct Measure {
  std::string basis = "z";
};

using SequenceElement = std::variant<FreeEvolution, ElectronPulse, NuclearCompositePulse, Measure>;

class PulseSequence {
 public:
  PulseSequence() = default;
  explicit PulseSequence(std::string id) : id_(std::move(id)) {}

  PulseSequence& free(double duration);
  PulseSequence& pulse(const Vec3& axis, double angle);
  PulseSequence& composite(CompositeKind kind, double tau0, int n_pulses);
  PulseSequence& measure(std::string basis = "z");
  PulseSequence& append(const PulseSequence& other);

  const std::vector<SequenceElement>& elements() const { return elements_; }
  const std::string& id() const { return id_; }
  double total_duration() const;

  // Composite pulses replaced by free evolutions and electron pulses.
  PulseSequence expanded() const;
  // Element-wise inverse in reverse order; valid for free evolutions through
  // negative durations, used for time-reversal checks.
  PulseSequence inverse() const;

 private:
  std::string id_ = "sequence";
  std::vector<SequenceElement> elements_;
};

// XY-N block: N x (tau, pi_x, tau). Pulse phases are carried as labels only.
PulseSequence xyn_block(double tau, int n_pulses);
// Electron flip controlled by the nuclear x-basis state, built on XY-N.
PulseSequence cnot_e_sequence(double tau0, int n_pulses);

// Unitary of a sequence without dephasing (4x4).
CMatrix sequence_unitary(const PulseSequence& seq, const HyperfineParams& p);

// Applies the sequence to `initial`. With dephasing_t2 set, every free
// evolution also dephases the electron with coherence factor exp(-t / T2).
DensityMatrix simulate_sequence(const PulseSequence& seq, const HyperfineParams& p,
                                const DensityMatrix& initial, std::optional<double> dephasing_t2 = std::nullopt);

struct SignalTrace {
  std::vector<double> times;
  std::vector<double> values;
  std::map<std::string, std::string> metadata;
};

struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> amplitudes;
  int n_fft = 0;
  double time_energy = 0.0;  // sum of squared windowed samples

  // Energy of the one-sided spectrum scaled back to the time domain.
  double spectral_energy() const;
  double peak_frequency(double f_min = 0.0, double f_max = -1.0) const;
};

// Pulse spacing used by the composite gates: half of the refined resonance.
double gate_tau0(const HyperfineParams& p);

// Electron population after pi/2 - XY-N(tau) - pi/2 with the nucleus fully
// mixed: (1 + Re Tr(W_up W_down^dagger) / 2) / 2. Dips mark resonances.
SignalTrace xyn_spectrum(const HyperfineParams& p, const std::vector<double>& tau_grid, int n_pulses,
                         parallel::Exec exec = parallel::Exec::Parallel);

// Initial state |down><down| (x) I/2.
DensityMatrix ramsey_initial_state();

SignalTrace ramsey_s0(const HyperfineParams& p, const std::vector<double>& tau_c_grid, bool exact,
                      parallel::Exec exec = parallel::Exec::Parallel);
SignalTrace ramsey_sdelta(const HyperfineParams& p, const std::vector<double>& tau_c_grid, bool exact,
                          parallel::Exec exec = parallel::Exec::Parallel);

// Closed forms for one point; tau_c is the total free evolution.
double s0_closed_form(const HyperfineParams& p, double tau_c);
double sdelta_closed_form(const HyperfineParams& p, double tau_c);

// Exact-engine Ramsey with explicit gate spacing and pulse count.
double s0_exact(const HyperfineParams& p, double tau_c, double tau0, int n_pulses);
double sdelta_exact(const HyperfineParams& p, double tau_c, double tau0, int n_pulses);

struct EchoKind {
  int n_pi = 1;  // 1 = Hahn, k = CPMG-k
  static EchoKind hahn() { return {1}; }
  static EchoKind cpmg(int k) { return {k}; }
};

// Ornstein-Uhlenbeck detuning of the nuclear precession plus static shifts
// drawn uniformly from `static_shifts` (angular).
struct NoiseModel {
  double sigma = 0.0;  // rad/s, stationary std of the OU detuning
  double tau_c = 5e-3;  // s, OU correlation time
  std::vector<double> static_shifts;
  int mc_samples = 0;  // 0 selects the Gaussian closed form
  int mc_steps = 400;
  std::uint64_t seed = 1;
};

// Phase variance of an echo of total length T for an OU process with unit sigma.
double echo_phase_variance(EchoKind kind, double total_time, double tau_c);

// Echo of the nuclear spin; values are (1 + <cos phase>) / 2.
SignalTrace nuclear_echo(const HyperfineParams& p, EchoKind kind, const std::vector<double>& total_time_grid,
                         const NoiseModel& noise, parallel::Exec exec = parallel::Exec::Parallel);

// Time where the Gaussian echo amplitude falls to 1/e.
double echo_t2(EchoKind kind, double sigma, double tau_c);
// OU sigma giving the requested Hahn T2 at correlation time tau_c.
double calibrate_sigma(double hahn_t2, double tau_c);

Spectrum fft_spectrum(const SignalTrace& trace, int zero_pad_factor = 4);

std::vector<double> linspace(double a, double b, int n);

}  // namespace spinforge
