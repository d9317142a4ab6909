#include "kinkcoh/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kinkcoh/errors.hpp"

namespace kinkcoh {
namespace {

void check_dimension(const ModelSpec& spec, std::size_t n) {
  if (n != spec.size()) {
    throw ConfigError("configuration length " + std::to_string(n) + " does not match n = " +
                      std::to_string(spec.size()));
  }
}

// Sine-Gordon boundary argument x_1 - x_N + (N+s-1) a0, evaluated as
// s*a0 - sum_i (x_{i+1} - x_i - a0). Consecutive absolute positions are close,
// so each stretch is exact and the sum is compensated; the naive form loses
// ~eps*|x_N| which g0 then amplifies.
double winding_argument(const ModelSpec& spec, std::span<const double> x) {
  const double a0 = spec.lattice_const;
  double sum = 0.0;
  double comp = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double term = (x[i + 1] - x[i]) - a0;
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  return static_cast<double>(spec.topo_charge) * a0 - (sum + comp);
}

}  // namespace

double ModelSpec::resolved_end_stiffness() const {
  if (end_stiffness > 0.0) return end_stiffness;
  double gmax = 0.0;
  for (double g : couplings) gmax = std::max(gmax, g);
  return 100.0 * gmax;
}

double ModelSpec::well_position() const {
  return substrate_k < 0.0 ? std::sqrt(-substrate_k / 4.0) : 0.0;
}

std::pair<double, double> ModelSpec::phi4_end_targets() const {
  const double a = well_position();
  if (topo_charge == 0) return {a, a};
  const double s = topo_charge > 0 ? 1.0 : -1.0;
  return {-s * a, s * a};
}

void validate(const ModelSpec& spec) {
  if (spec.n_particles < 3) throw ConfigError("model.n: need at least 3 particles");
  if (spec.couplings.size() + 1 != spec.n_particles) {
    throw ConfigError("model.g: expected " + std::to_string(spec.n_particles - 1) +
                      " bond couplings, got " + std::to_string(spec.couplings.size()));
  }
  for (std::size_t i = 0; i < spec.couplings.size(); ++i) {
    if (!(spec.couplings[i] >= 0.0) || !std::isfinite(spec.couplings[i])) {
      throw ConfigError("model.g[" + std::to_string(i) + "]: couplings must be finite and non-negative");
    }
  }
  if (!std::isfinite(spec.lattice_const)) throw ConfigError("model.a0: must be finite");
  if (!(spec.resolved_end_stiffness() > 0.0) || !std::isfinite(spec.resolved_end_stiffness())) {
    throw ConfigError("model.g0: end stiffness must be positive");
  }
  if (spec.kind == ModelKind::Phi4) {
    if (!(spec.substrate_k < 0.0)) throw ConfigError("model.k: must be negative for phi4");
    if (spec.boundary != Boundary::FixedEnds) {
      throw ConfigError("model.boundary: phi4 chains use fixed_ends");
    }
    if (spec.topo_charge < -1 || spec.topo_charge > 1) {
      throw ConfigError("model.s: phi4 sector must be -1, 0 or 1");
    }
  } else {
    if (spec.boundary != Boundary::PeriodicWinding) {
      throw ConfigError("model.boundary: sine-gordon chains use periodic_winding");
    }
  }
}

ModelSpec make_phi4(std::size_t n, double g, double k, int sector) {
  ModelSpec spec;
  spec.kind = ModelKind::Phi4;
  spec.n_particles = n;
  spec.couplings = constant_profile(n, g);
  spec.lattice_const = 0.0;
  spec.substrate_k = k;
  spec.topo_charge = sector;
  spec.boundary = Boundary::FixedEnds;
  return spec;
}

ModelSpec make_sine_gordon(std::size_t n, double g, int winding) {
  ModelSpec spec;
  spec.kind = ModelKind::SineGordon;
  spec.n_particles = n;
  spec.couplings = constant_profile(n, g);
  spec.lattice_const = 2.0 * std::numbers::pi;
  spec.substrate_k = 0.0;
  spec.topo_charge = winding;
  spec.boundary = Boundary::PeriodicWinding;
  return spec;
}

std::vector<double> constant_profile(std::size_t n_particles, double base) {
  return std::vector<double>(n_particles > 0 ? n_particles - 1 : 0, base);
}

std::vector<double> gaussian_well_profile(std::size_t n_particles, double base, double depth,
                                          double width, double center) {
  if (!(width > 0.0)) throw ConfigError("model.g_profile.width: must be positive");
  if (center < 0.0) center = 0.5 * static_cast<double>(n_particles + 1);
  std::vector<double> g(n_particles > 0 ? n_particles - 1 : 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double b = static_cast<double>(i + 1) + 0.5;
    const double u = (b - center) / width;
    g[i] = base * (1.0 - depth * std::exp(-0.5 * u * u));
  }
  return g;
}

double potential_energy(const ModelSpec& spec, std::span<const double> x) {
  check_dimension(spec, x.size());
  const std::size_t n = x.size();
  const double a0 = spec.lattice_const;
  double v = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = (x[i + 1] - x[i]) - a0;
    v += 0.5 * spec.couplings[i] * d * d;
  }
  const double g0 = spec.resolved_end_stiffness();
  if (spec.kind == ModelKind::Phi4) {
    const double k = spec.substrate_k;
    for (std::size_t i = 0; i < n; ++i) {
      const double x2 = x[i] * x[i];
      v += 0.5 * k * x2 + x2 * x2;
    }
    const auto [t1, tn] = spec.phi4_end_targets();
    const double d1 = x[0] - t1;
    const double dn = x[n - 1] - tn;
    v += 0.5 * g0 * d1 * d1 + 0.5 * g0 * dn * dn;
  } else {
    for (std::size_t i = 0; i < n; ++i) v += 1.0 - std::cos(x[i]);
    const double w = winding_argument(spec, x);
    v += 0.5 * g0 * w * w;
  }
  return v;
}

Eigen::VectorXd gradient(const ModelSpec& spec, std::span<const double> x) {
  check_dimension(spec, x.size());
  const std::size_t n = x.size();
  const double a0 = spec.lattice_const;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double f = spec.couplings[i] * ((x[i + 1] - x[i]) - a0);
    g[i] -= f;
    g[i + 1] += f;
  }
  const double g0 = spec.resolved_end_stiffness();
  if (spec.kind == ModelKind::Phi4) {
    const double k = spec.substrate_k;
    for (std::size_t i = 0; i < n; ++i) g[i] += k * x[i] + 4.0 * x[i] * x[i] * x[i];
    const auto [t1, tn] = spec.phi4_end_targets();
    g[0] += g0 * (x[0] - t1);
    g[n - 1] += g0 * (x[n - 1] - tn);
  } else {
    for (std::size_t i = 0; i < n; ++i) g[i] += std::sin(x[i]);
    const double w = winding_argument(spec, x);
    g[0] += g0 * w;
    g[n - 1] -= g0 * w;
  }
  return g;
}

DerivativeBundle derivatives(const ModelSpec& spec, std::span<const double> x) {
  check_dimension(spec, x.size());
  const auto n = static_cast<Eigen::Index>(x.size());
  DerivativeBundle out;
  out.grad = gradient(spec, x);
  out.hessian = Eigen::MatrixXd::Zero(n, n);
  out.third_diag.resize(n);
  out.fourth_diag.resize(n);
  Eigen::MatrixXd& h = out.hessian;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double g = spec.couplings[static_cast<std::size_t>(i)];
    h(i, i) += g;
    h(i + 1, i + 1) += g;
    h(i, i + 1) -= g;
    h(i + 1, i) -= g;
  }
  const double g0 = spec.resolved_end_stiffness();
  if (spec.kind == ModelKind::Phi4) {
    const double k = spec.substrate_k;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      h(i, i) += k + 12.0 * xi * xi;
      out.third_diag[i] = 24.0 * xi;
      out.fourth_diag[i] = 24.0;
    }
    h(0, 0) += g0;
    h(n - 1, n - 1) += g0;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      h(i, i) += std::cos(xi);
      out.third_diag[i] = -std::sin(xi);
      out.fourth_diag[i] = -std::cos(xi);
    }
    h(0, 0) += g0;
    h(n - 1, n - 1) += g0;
    h(0, n - 1) -= g0;
    h(n - 1, 0) -= g0;
  }
  return out;
}

Eigen::VectorXd continuum_seed(const ModelSpec& spec, double center) {
  validate(spec);
  const std::size_t n = spec.size();
  if (!(center >= 1.0 && center <= static_cast<double>(n))) {
    throw ConfigError("seed.center: must lie in [1, N]");
  }
  double gmean = 0.0;
  for (double g : spec.couplings) gmean += g;
  gmean /= static_cast<double>(spec.couplings.size());

  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  if (spec.kind == ModelKind::Phi4) {
    // Continuum solution of g phi'' = k phi + 4 phi^3: a tanh(a sqrt(2/g) (i - c)).
    const double a = spec.well_position();
    const double width = std::max(std::sqrt(0.5 * gmean) / a, 0.5);
    const double sign = spec.topo_charge >= 0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(i + 1) - center) / width;
      x[static_cast<Eigen::Index>(i)] = spec.topo_charge == 0 ? a : sign * a * std::tanh(u);
    }
  } else {
    // 4 atan(exp((i - c)/sqrt(g))) on top of the commensurate lattice i*a0.
    const double width = std::max(std::sqrt(gmean), 0.5);
    const double s = static_cast<double>(spec.topo_charge);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (static_cast<double>(i + 1) - center) / width;
      x[static_cast<Eigen::Index>(i)] =
          static_cast<double>(i + 1) * spec.lattice_const + s * 4.0 * std::atan(std::exp(u));
    }
  }
  return x;
}

int topological_sector(const ModelSpec& spec, const Eigen::VectorXd& x) {
  if (spec.kind == ModelKind::Phi4) {
    int changes = 0;
    int last = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const int sgn = x[i] > 0.0 ? 1 : (x[i] < 0.0 ? -1 : 0);
      if (sgn == 0) continue;
      if (last != 0 && sgn != last) ++changes;
      last = sgn;
    }
    return changes;
  }
  const double n = static_cast<double>(x.size());
  const double excess = x[x.size() - 1] - x[0] - (n - 1.0) * spec.lattice_const;
  return static_cast<int>(std::lround(excess / (2.0 * std::numbers::pi)));
}

const char* to_string(ModelKind kind) {
  return kind == ModelKind::Phi4 ? "phi4" : "sine_gordon";
}

const char* to_string(Boundary boundary) {
  return boundary == Boundary::FixedEnds ? "fixed_ends" : "periodic_winding";
}

}  // namespace kinkcoh
