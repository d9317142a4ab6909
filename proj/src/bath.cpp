#include <algorithm>
#include <cmath>
#include <string>

#include "kinkcoh/classical.hpp"
#include "kinkcoh/errors.hpp"
#include "kinkcoh/quantum.hpp"

namespace kinkcoh {
namespace {

Eigen::VectorXd frequencies(const CouplingTensors& tensors) {
  if (tensors.omega2.size() != tensors.n_modes || (tensors.omega2.array() <= 0.0).any()) {
    throw ConfigError("coupling tensors: omega^2 must be positive for every mode");
  }
  return tensors.omega2.cwiseSqrt();
}

Eigen::VectorXcd propagator_factors(const BathModel& bath, double tau) {
  Eigen::VectorXcd d(bath.omega.size());
  for (Eigen::Index k = 0; k < bath.omega.size(); ++k) {
    const double n = bath.occupation[k];
    const Complex phase = std::polar(1.0, bath.omega[k] * tau);
    d[k] = n * phase + (1.0 + n) * std::conj(phase);
  }
  return d;
}

void check_op(const BathModel& bath, int alpha) {
  if (alpha < 0 || alpha >= bath.n_ops()) throw ConfigError("correlation: operator index out of range");
}

}  // namespace

BathModel build_bath(const CouplingTensors& tensors, const SystemDef& def) {
  validate(def, tensors.n_modes);
  const Eigen::VectorXd w = frequencies(tensors);
  BathModel bath;
  for (int k = 0; k < tensors.n_modes; ++k) {
    if (std::find(def.sys_modes.begin(), def.sys_modes.end(), k) == def.sys_modes.end()) bath.modes.push_back(k);
  }
  const auto nb = static_cast<Eigen::Index>(bath.modes.size());
  bath.omega.resize(nb);
  bath.occupation.resize(nb);
  for (Eigen::Index k = 0; k < nb; ++k) {
    bath.omega[k] = w[bath.modes[static_cast<std::size_t>(k)]];
    bath.occupation[k] = bose_einstein(bath.omega[k], def.temperature);
  }

  const FockOperators ops = build_fock_operators(def);
  const int n_ops = ops.n_ops();
  const double sqrt_hbar = std::sqrt(def.hbar);
  bath.linear = Eigen::MatrixXd::Zero(n_ops, nb);
  bath.quadratic.assign(static_cast<std::size_t>(n_ops), Eigen::MatrixXd::Zero(nb, nb));
  for (int op = 0; op < n_ops; ++op) {
    const auto [slot_a, slot_b] = ops.slots[static_cast<std::size_t>(op)];
    const int p = def.sys_modes[static_cast<std::size_t>(slot_a)];
    Eigen::MatrixXd& q = bath.quadratic[static_cast<std::size_t>(op)];
    if (slot_b < 0) {
      // 3 * (1/3!) sum_kl L_pkl ... X_p X_k X_l
      for (Eigen::Index k = 0; k < nb; ++k) {
        const int mk = bath.modes[static_cast<std::size_t>(k)];
        for (Eigen::Index l = k; l < nb; ++l) {
          const int ml = bath.modes[static_cast<std::size_t>(l)];
          const double v = 0.5 * tensors.L(p, mk, ml) * sqrt_hbar / std::sqrt(8.0 * w[p] * w[mk] * w[ml]);
          q(k, l) = q(l, k) = v;
        }
      }
      continue;
    }
    const int r = def.sys_modes[static_cast<std::size_t>(slot_b)];
    // X_p X_r appears once in the ordered sum when p == r and twice otherwise.
    const double mult = slot_a == slot_b ? 1.0 : 2.0;
    for (Eigen::Index k = 0; k < nb; ++k) {
      const int mk = bath.modes[static_cast<std::size_t>(k)];
      bath.linear(op, k) = mult * 0.5 * tensors.L(p, r, mk) * sqrt_hbar / std::sqrt(8.0 * w[p] * w[r] * w[mk]);
      for (Eigen::Index l = k; l < nb; ++l) {
        const int ml = bath.modes[static_cast<std::size_t>(l)];
        const double v =
            mult * 0.25 * tensors.M(p, r, mk, ml) * def.hbar / std::sqrt(16.0 * w[p] * w[r] * w[mk] * w[ml]);
        q(k, l) = q(l, k) = v;
      }
    }
  }

  bath.mean.resize(n_ops);
  const Eigen::VectorXd var = (1.0 + 2.0 * bath.occupation.array()).matrix();
  for (int op = 0; op < n_ops; ++op) {
    bath.mean[op] = bath.quadratic[static_cast<std::size_t>(op)].diagonal().dot(var);
  }
  return bath;
}

RenormConstants renormalize(const CouplingTensors& tensors, const SystemDef& def) {
  return renormalize(build_bath(tensors, def), tensors, def);
}

RenormConstants renormalize(const BathModel& bath, const CouplingTensors& tensors, const SystemDef& def) {
  validate(def, tensors.n_modes);
  const Eigen::VectorXd w = frequencies(tensors);
  const FockOperators ops = build_fock_operators(def);
  const auto ns = static_cast<Eigen::Index>(def.sys_modes.size());
  if (bath.n_ops() != ops.n_ops()) throw ConfigError("renormalize: bath model does not match the system");

  RenormConstants rc;
  rc.nu = Eigen::VectorXd::Zero(ns);
  rc.xi = Eigen::VectorXd::Zero(ns);
  rc.bare_freqs.resize(ns);
  for (Eigen::Index i = 0; i < ns; ++i) rc.bare_freqs[i] = w[def.sys_modes[static_cast<std::size_t>(i)]];
  for (int op = 0; op < ops.n_ops(); ++op) {
    const auto [a, b] = ops.slots[static_cast<std::size_t>(op)];
    if (b < 0) {
      rc.xi[a] = bath.mean[op];
    } else if (a == b) {
      rc.nu[a] = bath.mean[op];
    } else {
      rc.nu12 = bath.mean[op];
    }
  }

  rc.shifted_freqs.resize(ns);
  rc.displacement.resize(ns);
  rc.energy_offset = 0.0;
  for (Eigen::Index i = 0; i < ns; ++i) {
    const double w0 = rc.bare_freqs[i];
    const double radicand = 1.0 + 4.0 * rc.nu[i] / w0;
    if (!(radicand > 0.0)) {
      throw NumericalError("renormalize: frequency shift of system mode " + std::to_string(i + 1) +
                           " has a non-positive radicand " + std::to_string(radicand));
    }
    const double ws = w0 * std::sqrt(radicand);
    rc.shifted_freqs[i] = ws;
    // hbar xi X = f Theta with X = sqrt(2 w0 / hbar) Theta.
    const double force = rc.xi[i] * std::sqrt(2.0 * def.hbar * w0);
    rc.displacement[i] = -force / (ws * ws);
    rc.energy_offset -= force * force / (2.0 * ws * ws);
  }
  return rc;
}

Complex correlation(const BathModel& bath, int alpha, int beta, double tau) {
  check_op(bath, alpha);
  check_op(bath, beta);
  const Eigen::VectorXcd d = propagator_factors(bath, tau);
  Complex c = 0.0;
  for (Eigen::Index k = 0; k < d.size(); ++k) c += bath.linear(alpha, k) * bath.linear(beta, k) * d[k];
  const Eigen::MatrixXd qq =
      bath.quadratic[static_cast<std::size_t>(alpha)].cwiseProduct(bath.quadratic[static_cast<std::size_t>(beta)]);
  c += 2.0 * (d.transpose() * qq * d)(0, 0);
  return c;
}

std::vector<CMatrix> correlation_table(const BathModel& bath, double dt, std::size_t count) {
  const int n_ops = bath.n_ops();
  std::vector<Eigen::MatrixXd> products;
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n_ops; ++a) {
    for (int b = a; b < n_ops; ++b) {
      products.push_back(
          bath.quadratic[static_cast<std::size_t>(a)].cwiseProduct(bath.quadratic[static_cast<std::size_t>(b)]));
      pairs.emplace_back(a, b);
    }
  }
  std::vector<CMatrix> table;
  table.reserve(count);
  for (std::size_t step = 0; step < count; ++step) {
    const Eigen::VectorXcd d = propagator_factors(bath, static_cast<double>(step) * dt);
    const CMatrix lin = bath.linear.cast<Complex>() * d.asDiagonal() * bath.linear.transpose().cast<Complex>();
    CMatrix c(n_ops, n_ops);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [a, b] = pairs[p];
      const Complex v = lin(a, b) + 2.0 * (d.transpose() * products[p] * d)(0, 0);
      c(a, b) = c(b, a) = v;
    }
    table.push_back(std::move(c));
  }
  return table;
}

std::vector<SpectralTerm> correlation_spectrum(const BathModel& bath, int alpha, int beta) {
  check_op(bath, alpha);
  check_op(bath, beta);
  std::vector<SpectralTerm> terms;
  const auto nb = bath.omega.size();
  const Eigen::MatrixXd& qa = bath.quadratic[static_cast<std::size_t>(alpha)];
  const Eigen::MatrixXd& qb = bath.quadratic[static_cast<std::size_t>(beta)];
  for (Eigen::Index k = 0; k < nb; ++k) {
    const double amp = bath.linear(alpha, k) * bath.linear(beta, k);
    const double n = bath.occupation[k];
    terms.push_back({bath.omega[k], amp * (1.0 + n)});
    terms.push_back({-bath.omega[k], amp * n});
  }
  for (Eigen::Index k = 0; k < nb; ++k) {
    for (Eigen::Index l = 0; l < nb; ++l) {
      const double amp = 2.0 * qa(k, l) * qb(k, l);
      const double nk = bath.occupation[k], nl = bath.occupation[l];
      const double wk = bath.omega[k], wl = bath.omega[l];
      terms.push_back({wk + wl, amp * (1.0 + nk) * (1.0 + nl)});
      terms.push_back({wk - wl, amp * (1.0 + nk) * nl});
      terms.push_back({wl - wk, amp * nk * (1.0 + nl)});
      terms.push_back({-(wk + wl), amp * nk * nl});
    }
  }
  std::sort(terms.begin(), terms.end(),
            [](const SpectralTerm& x, const SpectralTerm& y) { return x.frequency < y.frequency; });
  std::vector<SpectralTerm> merged;
  for (const SpectralTerm& t : terms) {
    if (t.weight == 0.0) continue;
    if (!merged.empty() && merged.back().frequency == t.frequency) {
      merged.back().weight += t.weight;
    } else {
      merged.push_back(t);
    }
  }
  return merged;
}

Eigen::MatrixXd build_system_hamiltonian(const CouplingTensors& tensors, const SystemDef& def,
                                         const RenormConstants& renorm, const FockOperators& ops) {
  validate(def, tensors.n_modes);
  const Eigen::VectorXd w = frequencies(tensors);
  const int ns = static_cast<int>(def.sys_modes.size());
  const int dim = ops.dim();
  const double hbar = def.hbar;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(dim, dim);
  for (int i = 0; i < ns; ++i) h += hbar * renorm.shifted_freqs[i] * (ops.number[i] + 0.5 * id);

  auto mode = [&](int slot) { return def.sys_modes[static_cast<std::size_t>(slot)]; };
  // Ordered sums over system slots; X operators of different modes commute.
  for (int a = 0; a < ns; ++a) {
    for (int b = 0; b < ns; ++b) {
      for (int c = 0; c < ns; ++c) {
        const double l = tensors.L(mode(a), mode(b), mode(c));
        if (l != 0.0) {
          const double pref = l * std::pow(hbar, 1.5) / std::sqrt(8.0 * w[mode(a)] * w[mode(b)] * w[mode(c)]) / 6.0;
          h += pref * ops.x[a] * ops.x[b] * ops.x[c];
        }
        for (int d = 0; d < ns; ++d) {
          const double m = tensors.M(mode(a), mode(b), mode(c), mode(d));
          if (m == 0.0) continue;
          const double pref =
              m * hbar * hbar / std::sqrt(16.0 * w[mode(a)] * w[mode(b)] * w[mode(c)] * w[mode(d)]) / 24.0;
          h += pref * ops.x[a] * ops.x[b] * ops.x[c] * ops.x[d];
        }
      }
    }
  }
  if (ns == 2) h += hbar * renorm.nu12 * ops.x[0] * ops.x[1];
  // The mean force hbar xi_i X_i is absorbed by shifting Theta_i, which
  // leaves only the constant below; the Fock basis is that of the shifted
  // oscillator.
  h += renorm.energy_offset * id;
  return 0.5 * (h + h.transpose());
}

}  // namespace kinkcoh
