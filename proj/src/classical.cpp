#include "kinkcoh/classical.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>

#include <fftw3.h>

#include "kinkcoh/errors.hpp"

namespace kinkcoh {

double bose_einstein(double omega, double temperature) {
  if (!(temperature > 0.0)) return 0.0;
  return 1.0 / std::expm1(omega / temperature);
}

double total_energy(const ModelSpec& spec, const ChainState& state) {
  return 0.5 * state.velocities.squaredNorm() + potential_energy(spec, state.positions);
}

ChainState phonon_kick(const ModeBasis& basis, const Eigen::VectorXd& equilibrium, int mode, double n,
                       double hbar) {
  if (mode < 0 || mode >= basis.size()) throw ConfigError("phonon_kick: mode index out of range");
  if (!(n >= 0.0)) throw ConfigError("phonon_kick: phonon count must be non-negative");
  if (equilibrium.size() != basis.vectors.rows()) throw ConfigError("phonon_kick: equilibrium length mismatch");
  ChainState s;
  s.positions = equilibrium;
  s.velocities = basis.vectors.col(mode) * std::sqrt(2.0 * n * hbar * basis.freqs[mode]);
  return s;
}

ChainState thermal_state(const ModeBasis& basis, const Eigen::VectorXd& equilibrium, const SimConfig& cfg) {
  if (!(cfg.temperature >= 0.0)) throw ConfigError("classical.temperature: must be non-negative");
  if (!(cfg.hbar > 0.0)) throw ConfigError("classical.hbar: must be positive");
  if (equilibrium.size() != basis.vectors.rows()) throw ConfigError("thermal_state: equilibrium length mismatch");
  for (const auto& [mode, count] : cfg.mode_overrides) {
    if (mode < 0 || mode >= basis.size()) {
      throw ConfigError("classical.mode_overrides: mode " + std::to_string(mode) + " out of range");
    }
    if (!(count >= 0.0)) throw ConfigError("classical.mode_overrides: counts must be non-negative");
  }

  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const int n = basis.size();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd theta_dot = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    const double w = basis.freqs[j];
    double occupation;
    if (auto it = cfg.mode_overrides.find(j); it != cfg.mode_overrides.end()) {
      occupation = it->second;
    } else if (cfg.sample_occupations && cfg.temperature > 0.0) {
      std::geometric_distribution<long> geo(-std::expm1(-w / cfg.temperature));
      occupation = static_cast<double>(geo(rng));
    } else {
      occupation = bose_einstein(w, cfg.temperature);
    }
    // One phase draw per mode regardless of branch keeps streams aligned.
    const double phi = phase(rng);
    const double amp = std::sqrt(2.0 * occupation * cfg.hbar * w);
    theta[j] = amp / w * std::sin(phi);
    theta_dot[j] = amp * std::cos(phi);
  }
  ChainState s;
  s.positions = equilibrium + basis.vectors * theta;
  s.velocities = basis.vectors * theta_dot;
  return s;
}

namespace detail {

void check_sim_config(const ModelSpec& spec, const ChainState& initial, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw ConfigError("classical.dt: must be positive");
  if (cfg.steps < 1) throw ConfigError("classical.steps: must be at least 1");
  if (cfg.record_every < 1) throw ConfigError("classical.record_every: must be at least 1");
  if (!(cfg.hbar > 0.0)) throw ConfigError("classical.hbar: must be positive");
  const auto n = static_cast<Eigen::Index>(spec.size());
  if (initial.positions.size() != n || initial.velocities.size() != n) {
    throw ConfigError("classical: initial state length does not match the model");
  }
  if (!initial.positions.allFinite() || !initial.velocities.allFinite()) {
    throw ConfigError("classical: initial state has non-finite entries");
  }
}

void verlet_step(const ModelSpec& spec, ChainState& state, Eigen::VectorXd& force, double dt, long step) {
  state.velocities.noalias() += 0.5 * dt * force;
  state.positions.noalias() += dt * state.velocities;
  force = -gradient(spec, state.positions);
  if (!force.allFinite()) {
    throw NumericalError("classical: non-finite force at step " + std::to_string(step));
  }
  state.velocities.noalias() += 0.5 * dt * force;
}

}  // namespace detail

Trajectory integrate(const ModelSpec& spec, const ChainState& initial, const SimConfig& cfg) {
  Trajectory traj;
  detail::check_sim_config(spec, initial, cfg);
  const auto records = static_cast<std::size_t>(cfg.steps / cfg.record_every + 1);
  traj.times.reserve(records);
  traj.states.reserve(records);
  traj.total_energy.reserve(records);
  integrate_streaming(spec, initial, cfg, [&](long step, const ChainState& s) {
    traj.times.push_back(static_cast<double>(step) * cfg.dt);
    traj.states.push_back(s);
    traj.total_energy.push_back(total_energy(spec, s));
  });
  return traj;
}

ModeSeries mode_series(const Trajectory& traj, const ModeBasis& basis, const Eigen::VectorXd& equilibrium,
                       int mode) {
  if (mode < 0 || mode >= basis.size()) throw ConfigError("mode_series: mode index out of range");
  const auto col = basis.vectors.col(mode);
  const double w2 = basis.freqs[mode] * basis.freqs[mode];
  ModeSeries out;
  out.theta.reserve(traj.states.size());
  out.theta_dot.reserve(traj.states.size());
  out.energy.reserve(traj.states.size());
  for (const ChainState& s : traj.states) {
    const double th = col.dot(s.positions - equilibrium);
    const double thd = col.dot(s.velocities);
    out.theta.push_back(th);
    out.theta_dot.push_back(thd);
    out.energy.push_back(0.5 * (thd * thd + w2 * th * th));
  }
  return out;
}

Spectrum dft(const std::vector<double>& series, double duration) {
  const std::size_t len = series.size();
  if (len < 4 || len % 2 != 0) throw ConfigError("dft: series length must be even and at least 4");
  if (!(duration > 0.0)) throw ConfigError("dft: duration must be positive");

  std::vector<double> in(series);
  std::vector<std::complex<double>> out(len / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), in.data(),
                                        reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  if (plan == nullptr) throw NumericalError("dft: FFTW planning failed");
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  Spectrum s;
  s.dc = out[0].real();
  for (std::size_t k = 2; k <= len / 2; ++k) {
    s.omega.push_back(2.0 * std::numbers::pi * static_cast<double>(k - 1) / duration);
    s.magnitude.push_back(std::abs(out[k - 1]));
  }
  return s;
}

std::vector<double> running_mean(const std::vector<double>& series, std::size_t window) {
  if (window == 0) throw ConfigError("running_mean: window must be positive");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= window) sum -= series[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace kinkcoh
