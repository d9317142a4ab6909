#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kinkcoh/errors.hpp"
#include "kinkcoh/quantum.hpp"

namespace kinkcoh {
namespace {

constexpr double kTraceAbort = 1e-4;
constexpr double kClampTol = 1e-6;

// q += s * p on interleaved storage; Eigen's complex-scalar axpy path is an
// order of magnitude slower here and this loop dominates the run time.
void axpy(CMatrix& q, Complex s, const CMatrix& p) {
  const double sr = s.real(), si = s.imag();
  const double* src = reinterpret_cast<const double*>(p.data());
  double* dst = reinterpret_cast<double*>(q.data());
  const std::size_t len = 2 * static_cast<std::size_t>(p.size());
  for (std::size_t i = 0; i < len; i += 2) {
    const double pr = src[i], pi = src[i + 1];
    dst[i] += sr * pr - si * pi;
    dst[i + 1] += sr * pi + si * pr;
  }
}

// -sum_a [s_a, Q_a - Q_a^dagger] over the operators whose Q can be non-zero.
CMatrix master_rhs(const std::vector<CMatrix>& s, const std::vector<CMatrix>& q, const std::vector<int>& rows) {
  const Eigen::Index d = s.front().rows();
  CMatrix out = CMatrix::Zero(d, d);
  CMatrix anti(d, d);
  for (const int ai : rows) {
    const auto a = static_cast<std::size_t>(ai);
    anti = q[a] - q[a].adjoint();
    out.noalias() -= s[a] * anti;
    out.noalias() += anti * s[a];
  }
  return out;
}

}  // namespace

Propagator::Propagator(const Eigen::MatrixXd& hamiltonian, double hbar) : hbar_(hbar) {
  if (hamiltonian.rows() != hamiltonian.cols() || hamiltonian.rows() == 0) {
    throw ConfigError("Propagator: Hamiltonian must be square and non-empty");
  }
  if (!(hbar > 0.0)) throw ConfigError("Propagator: hbar must be positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hamiltonian);
  if (es.info() != Eigen::Success) throw NumericalError("Propagator: eigendecomposition of H_S failed");
  energies_ = es.eigenvalues();
  vectors_ = es.eigenvectors();
}

CMatrix Propagator::to_eigen(const CMatrix& m) const {
  return vectors_.transpose().cast<Complex>() * m * vectors_.cast<Complex>();
}

CMatrix Propagator::from_eigen(const CMatrix& m) const {
  return vectors_.cast<Complex>() * m * vectors_.transpose().cast<Complex>();
}

CMatrix Propagator::phases(double t) const {
  const Eigen::Index d = energies_.size();
  Eigen::VectorXcd f(d);
  for (Eigen::Index m = 0; m < d; ++m) f[m] = std::polar(1.0, (energies_[m] - energies_[0]) / hbar_ * t);
  return f * f.adjoint();
}

CMatrix Propagator::to_schrodinger(const CMatrix& rho_int, double t) const {
  return from_eigen(to_eigen(rho_int).cwiseProduct(phases(t).conjugate()));
}

CMatrix Propagator::to_interaction(const CMatrix& rho_s, double t) const {
  return from_eigen(to_eigen(rho_s).cwiseProduct(phases(t)));
}

MasterRun evolve(const SystemDef& def, const Propagator& prop, const FockOperators& ops, const BathModel& bath,
                 const CMatrix& rho0, const EvolveOptions& options) {
  if (!(options.dt > 0.0)) throw ConfigError("quantum.dt: must be positive");
  if (options.steps < 1) throw ConfigError("quantum.steps: must be at least 1");
  if (options.record_every < 1) throw ConfigError("quantum.record_every: must be at least 1");
  const int dim = ops.dim();
  const int n_ops = ops.n_ops();
  if (rho0.rows() != dim || rho0.cols() != dim) throw ConfigError("evolve: initial state has the wrong size");
  if (prop.energies().size() != dim) throw ConfigError("evolve: propagator does not match the operators");
  if (bath.n_ops() != n_ops) throw ConfigError("evolve: bath model does not match the operators");

  const double dt = options.dt;
  const long steps = options.steps;
  const long window = def.variant == Variant::TruncatedKernel
                          ? std::max<long>(1, std::lround(def.tau_c / dt))
                          : steps + 1;

  std::vector<CMatrix> s_eig;
  for (const auto& s : ops.s) s_eig.push_back(prop.to_eigen(s.cast<Complex>()));
  const std::size_t table_len = static_cast<std::size_t>(std::min(steps, window) + 1);
  const std::vector<CMatrix> corr = correlation_table(bath, dt, table_len);

  // partners[b] lists the a with a kernel C_ab that is not identically zero.
  // Columns without partners are never stored, so an uncoupled system runs
  // without any history at all.
  std::vector<std::vector<int>> partners(static_cast<std::size_t>(n_ops));
  for (int b = 0; b < n_ops; ++b) {
    for (int a = 0; a < n_ops; ++a) {
      const bool live = std::any_of(corr.begin(), corr.end(), [&](const CMatrix& c) { return c(a, b) != 0.0; });
      if (live) partners[static_cast<std::size_t>(b)].push_back(a);
    }
  }
  std::vector<int> rows;
  for (int a = 0; a < n_ops; ++a) {
    const bool used = std::any_of(partners.begin(), partners.end(), [&](const std::vector<int>& p) {
      return std::find(p.begin(), p.end(), a) != p.end();
    });
    if (used) rows.push_back(a);
  }

  MasterRun run;
  auto record = [&](long step, const CMatrix& rho_eig) {
    const CMatrix rho = prop.from_eigen(rho_eig);
    run.times.push_back(static_cast<double>(step) * dt);
    run.max_hermiticity_error =
        std::max(run.max_hermiticity_error, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
    if (options.check_positivity) {
      Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
      run.min_eigenvalue = std::min(run.min_eigenvalue, es.eigenvalues()[0]);
    }
    run.rho.push_back(rho);
  };

  auto interaction_ops = [&](double t) {
    const CMatrix ph = prop.phases(t);
    std::vector<CMatrix> out;
    out.reserve(s_eig.size());
    for (const auto& s : s_eig) out.push_back(s.cwiseProduct(ph));
    return out;
  };

  // P[h * n_ops + b] = s_b(t_h) rho(t_h)
  std::vector<CMatrix> history;
  history.reserve(static_cast<std::size_t>((steps + 1) * n_ops));
  auto push_history = [&](const std::vector<CMatrix>& s_t, const CMatrix& rho) {
    for (int b = 0; b < n_ops; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      history.push_back(partners[ub].empty() ? CMatrix() : CMatrix(s_t[ub] * rho));
    }
  };

  // Trapezoid over h in [h0, n), the endpoint h = n is added separately.
  auto history_sum = [&](long n) {
    std::vector<CMatrix> q(static_cast<std::size_t>(n_ops), CMatrix::Zero(dim, dim));
    const long h0 = std::max<long>(0, n - window);
    for (long h = h0; h < n; ++h) {
      const double w = h == h0 ? 0.5 * dt : dt;
      const CMatrix& c = corr[static_cast<std::size_t>(n - h)];
      for (int b = 0; b < n_ops; ++b) {
        const CMatrix& p = history[static_cast<std::size_t>(h * n_ops + b)];
        for (int a : partners[static_cast<std::size_t>(b)]) axpy(q[static_cast<std::size_t>(a)], w * c(a, b), p);
      }
    }
    return q;
  };
  auto add_endpoint = [&](std::vector<CMatrix> q, long n, const std::vector<CMatrix>& s_t, const CMatrix& rho) {
    if (n == 0) return q;
    const CMatrix& c0 = corr[0];
    for (int b = 0; b < n_ops; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      if (partners[ub].empty()) continue;
      const CMatrix p = s_t[ub] * rho;
      for (int a : partners[ub]) axpy(q[static_cast<std::size_t>(a)], 0.5 * dt * c0(a, b), p);
    }
    return q;
  };

  CMatrix rho = prop.to_eigen(rho0);
  const Complex trace0 = rho.trace();
  std::vector<CMatrix> s_now = interaction_ops(0.0);
  push_history(s_now, rho);
  record(0, rho);
  std::vector<CMatrix> q_hist(static_cast<std::size_t>(n_ops), CMatrix::Zero(dim, dim));

  for (long n = 0; n < steps; ++n) {
    const double t1 = static_cast<double>(n + 1) * dt;
    const CMatrix k1 = master_rhs(s_now, add_endpoint(q_hist, n, s_now, rho), rows);
    const CMatrix pred = rho + dt * k1;

    std::vector<CMatrix> s_next = interaction_ops(t1);
    std::vector<CMatrix> q_next = history_sum(n + 1);
    const CMatrix k2 = master_rhs(s_next, add_endpoint(q_next, n + 1, s_next, pred), rows);
    rho += (0.5 * dt) * (k1 + k2);

    const double drift = std::abs(rho.trace() - trace0);
    run.max_trace_error = std::max(run.max_trace_error, drift);
    if (!rho.allFinite()) {
      throw NumericalError("evolve: non-finite density matrix at step " + std::to_string(n + 1));
    }
    if (drift > kTraceAbort) {
      throw NumericalError("evolve: trace drift " + std::to_string(drift) + " at step " + std::to_string(n + 1) +
                           " (t = " + std::to_string(t1) + ")");
    }
    push_history(s_next, rho);
    // Histories older than the window are never read again.
    const long stale = n + 1 - window - 1;
    if (stale >= 0) {
      for (int b = 0; b < n_ops; ++b) history[static_cast<std::size_t>(stale * n_ops + b)] = CMatrix();
    }
    s_now = std::move(s_next);
    q_hist = std::move(q_next);
    if ((n + 1) % options.record_every == 0 || n + 1 == steps) record(n + 1, rho);
  }

  if (run.min_eigenvalue < 0.0) {
    run.warnings.push_back("density matrix lost positivity: minimum eigenvalue " +
                           std::to_string(run.min_eigenvalue) +
                           (run.min_eigenvalue >= -kClampTol ? " (clamped in fidelity)" : " (beyond clamping)"));
  }
  return run;
}

std::vector<FidelityPoint> fidelity_series(const MasterRun& run, const SystemDef& def, const Propagator& prop,
                                           double omega_ref) {
  std::vector<FidelityPoint> out;
  out.reserve(run.times.size());
  const double period = 2.0 * std::numbers::pi / omega_ref;
  // The reference is pure, so F = sqrt(<psi|rho|psi>) needs no
  // eigendecomposition of rho. Born runs can leave rho slightly outside the
  // positive cone; that is reported through the run warnings instead of
  // aborting the series.
  for (std::size_t r = 0; r < run.times.size(); ++r) {
    const double t = run.times[r];
    CMatrix rho = prop.to_schrodinger(run.rho[r], t);
    if (def.dims.size() == 2) rho = reduce(rho, def.dims[0], def.dims[1]);
    const Complex phase = std::polar(1.0, -omega_ref * t);
    const Complex overlap = rho(0, 0) + rho(1, 1) + phase * rho(0, 1) + std::conj(phase) * rho(1, 0);
    out.push_back({t / period, std::sqrt(std::max(0.0, 0.5 * overlap.real()))});
  }
  return out;
}

}  // namespace kinkcoh
