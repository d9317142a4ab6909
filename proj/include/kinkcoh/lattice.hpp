#pragma once
// Nearest-neighbour chains with an on-site substrate: the sine-Gordon
// (Frenkel-Kontorova) chain on a periodic ring with winding, and the
// double-well phi^4 chain with pinned ends. All quantities are
// dimensionless.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace kinkcoh {

enum class ModelKind { SineGordon, Phi4 };
enum class Boundary { FixedEnds, PeriodicWinding };

struct ModelSpec {
  ModelKind kind = ModelKind::Phi4;
  std::size_t n_particles = 0;
  /// Bond stiffness g_i between sites i and i+1; length n_particles - 1.
  std::vector<double> couplings;
  /// Rest length of the coupling springs (2*pi for sine-Gordon, 0 for phi^4).
  double lattice_const = 0.0;
  /// phi^4 quadratic substrate coefficient; must be negative.
  double substrate_k = -0.28;
  /// Stiffness of the boundary term. A value <= 0 means "use the default",
  /// 100 * max(g_i).
  double end_stiffness = 0.0;
  /// Sine-Gordon winding s. For phi^4 it selects the sector: +1 kink,
  /// -1 antikink, 0 both ends in the +a well (vacuum).
  int topo_charge = 1;
  Boundary boundary = Boundary::FixedEnds;

  std::size_t size() const noexcept { return n_particles; }
  /// Effective g0 after default resolution.
  double resolved_end_stiffness() const;
  /// Vacuum displacement sqrt(-k/4) of the phi^4 wells.
  double well_position() const;
  /// Pinning targets (x_1, x_N) of the phi^4 boundary term.
  std::pair<double, double> phi4_end_targets() const;
};

/// Throws ConfigError naming the offending field.
void validate(const ModelSpec& spec);

ModelSpec make_phi4(std::size_t n, double g, double k, int sector = 1);
ModelSpec make_sine_gordon(std::size_t n, double g, int winding = 1);

/// g_i = base for every bond.
std::vector<double> constant_profile(std::size_t n_particles, double base);

/// g_i = base * (1 - depth * exp(-(b - center)^2 / (2 width^2))) where b is
/// the bond midpoint i + 1/2 (1-based sites). center defaults to the chain
/// centre (N+1)/2 when negative.
std::vector<double> gaussian_well_profile(std::size_t n_particles, double base, double depth,
                                          double width, double center = -1.0);

struct ChainState {
  Eigen::VectorXd positions;
  Eigen::VectorXd velocities;
};

/// Analytic derivatives of V at a configuration. The third and fourth order
/// tensors are diagonal (only the substrate is anharmonic), so they are
/// stored as their diagonals.
struct DerivativeBundle {
  Eigen::VectorXd grad;
  Eigen::MatrixXd hessian;
  Eigen::VectorXd third_diag;
  Eigen::VectorXd fourth_diag;
};

/// V_coupling + V_sub + V_bc, summed in ascending site order.
double potential_energy(const ModelSpec& spec, std::span<const double> x);
inline double potential_energy(const ModelSpec& spec, const Eigen::VectorXd& x) {
  return potential_energy(spec, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

Eigen::VectorXd gradient(const ModelSpec& spec, std::span<const double> x);
inline Eigen::VectorXd gradient(const ModelSpec& spec, const Eigen::VectorXd& x) {
  return gradient(spec, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

DerivativeBundle derivatives(const ModelSpec& spec, std::span<const double> x);
inline DerivativeBundle derivatives(const ModelSpec& spec, const Eigen::VectorXd& x) {
  return derivatives(spec, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Continuum kink sampled on the lattice, used as a relaxation seed.
/// center is a 1-based site coordinate in [1, N].
Eigen::VectorXd continuum_seed(const ModelSpec& spec, double center);

/// phi^4: number of sign changes along the chain. Sine-Gordon: winding
/// round((x_N - x_1 - (N-1) a0) / 2pi).
int topological_sector(const ModelSpec& spec, const Eigen::VectorXd& x);

const char* to_string(ModelKind kind);
const char* to_string(Boundary boundary);

}  // namespace kinkcoh
