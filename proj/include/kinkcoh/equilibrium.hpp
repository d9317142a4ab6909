#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kinkcoh/lattice.hpp"

namespace kinkcoh {

struct Equilibrium {
  Eigen::VectorXd positions;
  double energy = 0.0;
  /// Infinity norm of the gradient at the returned configuration.
  double grad_norm = 0.0;
  double min_hessian_eig = 0.0;
  int iterations = 0;
  /// Stopping threshold actually applied (see RelaxOptions::tol).
  double tolerance = 0.0;
  int sector = 0;
};

struct RelaxOptions {
  /// Target for ||grad||_inf. The solver never asks for less than the
  /// rounding floor of the gradient at the current iterate (sum_j |H_ij|
  /// ulp(x_j)), which matters for long sine-Gordon chains in absolute
  /// coordinates.
  double tol = 1e-12;
  int max_iters = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
  bool check_sector = true;
};

/// Damped Newton minimisation of V with an Armijo backtracking line search.
/// Where the Hessian is not positive definite the step falls back to a
/// descent direction from H + mu I, mu beyond the most negative eigenvalue.
/// Throws RelaxError on non-convergence, SaddleError when the converged point
/// is not a strict minimum and SectorError if the topological sector of the
/// seed is not preserved.
///
/// When energy_trace is non-null it receives V at every accepted iterate.
Equilibrium relax(const ModelSpec& spec, const Eigen::VectorXd& seed, const RelaxOptions& options = {},
                  std::vector<double>* energy_trace = nullptr);

/// sum_j |H_ij| ulp(x_j), maximised over i.
double gradient_rounding_floor(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& x);

}  // namespace kinkcoh
