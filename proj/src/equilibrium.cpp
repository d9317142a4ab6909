#include "kinkcoh/equilibrium.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "kinkcoh/errors.hpp"

namespace kinkcoh {
namespace {

double ulp(double v) {
  const double a = std::abs(v);
  return std::nextafter(a, std::numeric_limits<double>::infinity()) - a;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

double gradient_rounding_floor(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& x) {
  Eigen::VectorXd u(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) u[j] = ulp(x[j]);
  return (hessian.cwiseAbs() * u).maxCoeff();
}

Equilibrium relax(const ModelSpec& spec, const Eigen::VectorXd& seed, const RelaxOptions& options,
                  std::vector<double>* energy_trace) {
  validate(spec);
  if (!(options.tol > 0.0)) throw ConfigError("relax.tol: must be positive");
  if (static_cast<std::size_t>(seed.size()) != spec.size()) {
    throw ConfigError("relax: seed length does not match model size");
  }

  Eigen::VectorXd x = seed;
  double v = potential_energy(spec, x);
  if (energy_trace) energy_trace->push_back(v);

  int iter = 0;
  for (;; ++iter) {
    DerivativeBundle d = derivatives(spec, x);
    const double gnorm = d.grad.lpNorm<Eigen::Infinity>();
    const double threshold = std::max(options.tol, gradient_rounding_floor(d.hessian, x));
    if (!std::isfinite(gnorm)) throw NumericalError("relax: non-finite gradient");
    if (gnorm <= threshold) {
      Equilibrium eq;
      eq.positions = x;
      eq.energy = v;
      eq.grad_norm = gnorm;
      eq.iterations = iter;
      eq.tolerance = threshold;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.hessian, Eigen::EigenvaluesOnly);
      eq.min_hessian_eig = es.eigenvalues()[0];
      eq.sector = topological_sector(spec, x);
      if (!(eq.min_hessian_eig > 0.0)) {
        throw SaddleError("relax: converged to a saddle (min Hessian eigenvalue " +
                              std::to_string(eq.min_hessian_eig) + ")",
                          eq.min_hessian_eig);
      }
      if (options.check_sector) {
        const int seeded = topological_sector(spec, seed);
        if (seeded != eq.sector) {
          throw SectorError("relax: solution left the seed's topological sector (" + std::to_string(seeded) +
                                " -> " + std::to_string(eq.sector) + ")",
                            seeded, eq.sector);
        }
      }
      return eq;
    }
    if (iter >= options.max_iters) {
      throw RelaxError("relax: no convergence after " + std::to_string(iter) +
                           " iterations (||grad||_inf = " + std::to_string(gnorm) + ")",
                       to_std(x), gnorm);
    }

    Eigen::VectorXd step;
    Eigen::LLT<Eigen::MatrixXd> llt(d.hessian);
    bool newton = llt.info() == Eigen::Success;
    if (newton) {
      step = llt.solve(-d.grad);
      newton = step.allFinite() && step.dot(d.grad) < 0.0;
    }
    if (!newton) {
      // Descent fallback on H + mu I with mu past the lowest eigenvalue. Large
      // mu is a scaled gradient step; the shift keeps the well-conditioned
      // directions Newton-like, which plain gradient descent does not when
      // g0 dominates the diagonal.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.hessian, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues()[0];
      const double scale = std::max(d.hessian.diagonal().cwiseAbs().maxCoeff(), 1.0);
      const double mu = std::max(2.0 * std::abs(lo), 1e-8 * scale);
      Eigen::MatrixXd shifted = d.hessian;
      shifted.diagonal().array() += mu;
      Eigen::LLT<Eigen::MatrixXd> sllt(shifted);
      step = sllt.info() == Eigen::Success ? Eigen::VectorXd(sllt.solve(-d.grad)) : Eigen::VectorXd(-d.grad / scale);
      if (!step.allFinite() || !(step.dot(d.grad) < 0.0)) step = -d.grad / scale;
    }

    const double slope = step.dot(d.grad);
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(v) + 1.0);
    double alpha = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double vt = v;
    for (int k = 0; k < 60; ++k) {
      trial = x + alpha * step;
      vt = potential_energy(spec, trial);
      if (std::isfinite(vt) && vt <= v + options.armijo * alpha * slope) {
        accepted = true;
        break;
      }
      // Predicted decrease below rounding: V cannot discriminate, accept
      // the step on gradient reduction instead.
      if (newton && alpha == 1.0 && -slope <= noise) {
        const double gt = gradient(spec, trial).lpNorm<Eigen::Infinity>();
        if (gt < gnorm && vt <= v + noise) {
          accepted = true;
          break;
        }
      }
      alpha *= options.backtrack;
    }
    if (!accepted) {
      throw RelaxError("relax: line search failed (||grad||_inf = " + std::to_string(gnorm) + ")",
                       to_std(x), gnorm);
    }
    x = trial;
    v = vt;
    if (energy_trace) energy_trace->push_back(v);
  }
}

}  // namespace kinkcoh
