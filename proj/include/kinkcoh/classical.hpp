#pragma once
// Classical equations of motion of the chain, semi-classical phonon
// initial conditions and mode/spectral diagnostics.

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "kinkcoh/lattice.hpp"
#include "kinkcoh/modes.hpp"

namespace kinkcoh {

struct SimConfig {
  double dt = 0.0;
  long steps = 1;
  long record_every = 1;
  double hbar = 1.9e-5;
  /// Temperature in units of hbar (omega / T enters the occupation).
  double temperature = 0.0;
  std::uint64_t rng_seed = 0;
  /// Mode index -> phonon count, replacing the thermal mean for that mode.
  std::map<int, double> mode_overrides;
  /// Draw n_j from the geometric (Bose-Einstein) distribution instead of
  /// using the mean occupation.
  bool sample_occupations = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ChainState> states;
  std::vector<double> total_energy;
};

/// (exp(omega/T) - 1)^-1, zero at T = 0.
double bose_einstein(double omega, double temperature);

/// 1/2 |v|^2 + V(x).
double total_energy(const ModelSpec& spec, const ChainState& state);

/// Positions at equilibrium, velocities lam_j * sqrt(2 n hbar omega_j).
ChainState phonon_kick(const ModeBasis& basis, const Eigen::VectorXd& equilibrium, int mode, double n,
                       double hbar);

/// Every mode gets E_j = n_j hbar omega_j with a uniformly random phase
/// from the seeded generator; overrides replace n_j.
ChainState thermal_state(const ModeBasis& basis, const Eigen::VectorXd& equilibrium, const SimConfig& cfg);

/// Velocity Verlet. Records a snapshot every record_every steps, including
/// the initial state. Throws NumericalError on a non-finite force.
Trajectory integrate(const ModelSpec& spec, const ChainState& initial, const SimConfig& cfg);

/// Same integrator without trajectory storage: calls observe(step, state)
/// at step 0 and after every record_every steps.
template <typename Observer>
void integrate_streaming(const ModelSpec& spec, const ChainState& initial, const SimConfig& cfg,
                         Observer&& observe);

struct ModeSeries {
  std::vector<double> theta;
  std::vector<double> theta_dot;
  std::vector<double> energy;
};

/// Theta_j = lam_j . (x - xbar), Theta_dot_j = lam_j . v,
/// E_j = (Theta_dot^2 + omega_j^2 Theta^2) / 2.
ModeSeries mode_series(const Trajectory& traj, const ModeBasis& basis, const Eigen::VectorXd& equilibrium,
                       int mode);

struct Spectrum {
  /// omega_k = 2 pi (k-1) / tau for k = 2 .. L/2.
  std::vector<double> omega;
  std::vector<double> magnitude;
  /// F(1), the plain sum of the input.
  double dc = 0.0;
};

/// |F(k)| with F(k) = sum_j x(j) exp(-2 pi i (k-1)(j-1) / L). L must be even
/// and at least 4.
Spectrum dft(const std::vector<double>& series, double duration);

/// Trailing running mean over `window` samples (shorter at the start).
std::vector<double> running_mean(const std::vector<double>& series, std::size_t window);

namespace detail {
void verlet_step(const ModelSpec& spec, ChainState& state, Eigen::VectorXd& force, double dt, long step);
void check_sim_config(const ModelSpec& spec, const ChainState& initial, const SimConfig& cfg);
}  // namespace detail

template <typename Observer>
void integrate_streaming(const ModelSpec& spec, const ChainState& initial, const SimConfig& cfg,
                         Observer&& observe) {
  detail::check_sim_config(spec, initial, cfg);
  ChainState state = initial;
  Eigen::VectorXd force = -gradient(spec, state.positions);
  observe(0L, static_cast<const ChainState&>(state));
  for (long step = 1; step <= cfg.steps; ++step) {
    detail::verlet_step(spec, state, force, cfg.dt, step);
    if (step % cfg.record_every == 0) observe(step, static_cast<const ChainState&>(state));
  }
}

}  // namespace kinkcoh
