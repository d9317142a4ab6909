#pragma once
// Quantized localized modes coupled to the thermal phonon bath.
//
// Conventions: X_i = a_i^dagger + a_i on a truncated Fock space; the
// composite index of a two-mode state is n1 * d2 + n2. The system-bath
// interaction is hbar * sum_a s_a B_a with system operators
//   two modes : X1, X2, X1^2, X2^2, X1 X2
//   one mode  : X1, X1^2
// and every bath operator of the form
//   B_a = sum_k c_ak X_k + sum_kl q_akl X_k X_l.

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkcoh/couplings.hpp"

namespace kinkcoh {

using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

enum class Variant { FullTwoMode, TruncatedKernel, LowModeInBath };

const char* to_string(Variant v);
/// "A", "B", "C" for the three variants.
const char* variant_label(Variant v);

struct SystemDef {
  /// Indices into the coupling tensors; entry 0 is the high mode.
  std::vector<int> sys_modes;
  /// Fock truncation per system mode.
  std::vector<int> dims;
  double hbar = 1.9e-5;
  double temperature = 0.0;
  Variant variant = Variant::FullTwoMode;
  /// Memory cutoff of the TruncatedKernel variant.
  double tau_c = 15.0;

  int hilbert_dim() const;
};

/// Throws ConfigError on inconsistent definitions.
void validate(const SystemDef& def, int n_modes);

// ---------------------------------------------------------------- Fock space

/// Truncated annihilation operator, sqrt(n) on the first superdiagonal.
Eigen::MatrixXd annihilation(int dim);

/// Kronecker product with the left factor varying slowest.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct FockOperators {
  std::vector<int> dims;
  /// Per system mode, embedded in the composite space.
  std::vector<Eigen::MatrixXd> a;
  std::vector<Eigen::MatrixXd> x;
  std::vector<Eigen::MatrixXd> number;
  /// System operators s_a in interaction order, and their labels.
  std::vector<Eigen::MatrixXd> s;
  std::vector<std::string> labels;
  /// For each s_a the pair of system slots (second = -1 for linear ones).
  std::vector<std::pair<int, int>> slots;

  int dim() const { return static_cast<int>(a.empty() ? 1 : a.front().rows()); }
  int n_ops() const { return static_cast<int>(s.size()); }
};

FockOperators build_fock_operators(const SystemDef& def);

// ---------------------------------------------------------------- bath

struct BathModel {
  std::vector<int> modes;
  Eigen::VectorXd omega;
  Eigen::VectorXd occupation;
  /// c_ak, rows are system operators.
  Eigen::MatrixXd linear;
  /// q_a, symmetric n_bath x n_bath per system operator.
  std::vector<Eigen::MatrixXd> quadratic;
  /// <B_a> in the thermal bath state.
  Eigen::VectorXd mean;

  int n_ops() const { return static_cast<int>(quadratic.size()); }
};

/// Bath sums run over every mode outside def.sys_modes. Terms with three
/// system and one bath index, one system and three bath indices, and
/// bath-only anharmonicities are not part of the interaction.
BathModel build_bath(const CouplingTensors& tensors, const SystemDef& def);

struct RenormConstants {
  /// <B> of the X_i^2 operators.
  Eigen::VectorXd nu;
  /// <B> of the X_i operators.
  Eigen::VectorXd xi;
  /// <B> of X1 X2, i.e. the full coefficient of the induced bilinear term.
  double nu12 = 0.0;
  Eigen::VectorXd bare_freqs;
  Eigen::VectorXd shifted_freqs;
  /// Static shift of Theta_i and the accompanying energy constant.
  Eigen::VectorXd displacement;
  double energy_offset = 0.0;
};

/// omega_i' = omega_i sqrt(1 + 4 nu_i / omega_i), the exact frequency of
/// hbar omega (a^dagger a + 1/2) + hbar nu X^2. Throws NumericalError on a
/// non-positive radicand.
RenormConstants renormalize(const CouplingTensors& tensors, const SystemDef& def);
RenormConstants renormalize(const BathModel& bath, const CouplingTensors& tensors, const SystemDef& def);

/// D_k(tau) = n_k e^{i w_k tau} + (1 + n_k) e^{-i w_k tau}.
/// C_ab(tau) = sum_k c_ak c_bk D_k + 2 sum_kl q_akl q_bkl D_k D_l.
Complex correlation(const BathModel& bath, int alpha, int beta, double tau);

/// All C_ab on tau = 0, dt, ..., (count-1) dt. Entry [step](a, b).
std::vector<CMatrix> correlation_table(const BathModel& bath, double dt, std::size_t count);

struct SpectralTerm {
  double frequency;
  double weight;
};

/// C_ab(tau) = sum weight * exp(-i frequency tau). Terms are merged only if
/// the frequencies are bit-identical.
std::vector<SpectralTerm> correlation_spectrum(const BathModel& bath, int alpha, int beta);

// ---------------------------------------------------------------- system

/// hbar omega' (N + 1/2) per mode, the cubic and quartic terms with every
/// index in the system, hbar nu12 X1 X2 and the constant left by the
/// displacement. The linear mean force itself is removed by the shift.
Eigen::MatrixXd build_system_hamiltonian(const CouplingTensors& tensors, const SystemDef& def,
                                         const RenormConstants& renorm, const FockOperators& ops);

/// Default initial state: (|0> + |1>)/sqrt(2) in mode 1, Fock |low_fock>
/// in mode 2 if present.
CMatrix initial_state(const SystemDef& def, int low_fock = 2);

// ---------------------------------------------------------------- dynamics

/// Eigenbasis of H_S and the maps between the Schroedinger and
/// interaction pictures.
class Propagator {
 public:
  Propagator(const Eigen::MatrixXd& hamiltonian, double hbar);

  const Eigen::VectorXd& energies() const { return energies_; }
  const Eigen::MatrixXd& eigenvectors() const { return vectors_; }
  double hbar() const { return hbar_; }

  /// Fock basis -> eigenbasis and back.
  CMatrix to_eigen(const CMatrix& m) const;
  CMatrix from_eigen(const CMatrix& m) const;
  /// exp(i (E_m - E_n) t / hbar).
  CMatrix phases(double t) const;
  /// Both act on Fock-basis matrices.
  CMatrix to_schrodinger(const CMatrix& rho_int, double t) const;
  CMatrix to_interaction(const CMatrix& rho_s, double t) const;

 private:
  Eigen::VectorXd energies_;
  Eigen::MatrixXd vectors_;
  double hbar_;
};

struct EvolveOptions {
  double dt = 0.1;
  long steps = 1;
  /// The final step is always recorded as well.
  long record_every = 1;
  /// Positivity diagnostics are gathered at recorded steps.
  bool check_positivity = true;
};

struct MasterRun {
  std::vector<double> times;
  /// Interaction-picture density matrices in the Fock basis.
  std::vector<CMatrix> rho;
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 1.0;
  std::vector<std::string> warnings;
};

/// Born master equation with memory, stepped with Heun's method. The
/// memory integral is a trapezoid over the stored history, restricted to
/// [t - tau_c, t] for the TruncatedKernel variant. Throws NumericalError
/// when the trace drifts by more than 1e-4 or entries become non-finite.
MasterRun evolve(const SystemDef& def, const Propagator& prop, const FockOperators& ops, const BathModel& bath,
                 const CMatrix& rho0, const EvolveOptions& options);

/// Partial trace over the second mode (composite index n1 * d2 + n2).
CMatrix reduce(const CMatrix& rho, int dim1, int dim2);

/// tr sqrt(rho^1/2 chi rho^1/2). Eigenvalues in [-1e-6, 0) are clamped;
/// lower ones throw NumericalError. A pure argument is handled through
/// sqrt(<psi|other|psi>).
double fidelity(const CMatrix& rho, const CMatrix& chi);

/// (|0> + e^{-i omega t}|1>)/sqrt(2) as a dim x dim density matrix.
CMatrix rabi_reference(double omega, int dim, double t);

struct FidelityPoint {
  double t_over_period;
  double fidelity;
};

/// Reduced high-mode state against the Rabi reference at every record,
/// evaluated as sqrt(<psi|rho|psi>) so that a transient loss of positivity
/// does not abort the series (see MasterRun::warnings).
std::vector<FidelityPoint> fidelity_series(const MasterRun& run, const SystemDef& def, const Propagator& prop,
                                           double omega_ref);

}  // namespace kinkcoh
