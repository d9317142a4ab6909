#include <doctest.h>

#include <cmath>
#include <random>

#include "kinkcoh/equilibrium.hpp"
#include "kinkcoh/errors.hpp"
#include "kinkcoh/lattice.hpp"

using namespace kinkcoh;
using Eigen::VectorXd;

TEST_SUITE("equilibrium") {
  TEST_CASE("phi4 vacuum from a noisy seed") {
    const double k = -0.28, g = 0.4;
    const ModelSpec spec = make_phi4(20, g, k, 0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    VectorXd seed = VectorXd::Constant(20, spec.well_position());
    for (Eigen::Index i = 0; i < seed.size(); ++i) seed[i] += u(rng);
    const Equilibrium eq = relax(spec, seed);
    CHECK(eq.energy == doctest::Approx(20 * (-k * k / 16.0)).epsilon(1e-12));
    CHECK((eq.positions.array() - spec.well_position()).abs().maxCoeff() <= 1e-10);
    // Uniform mode of the pinned chain: -2k plus a boundary correction of order g.
    CHECK(eq.min_hessian_eig > -2.0 * k);
    CHECK(eq.min_hessian_eig < -2.0 * k + 4.0 * g);
    CHECK(eq.grad_norm <= eq.tolerance);
  }

  TEST_CASE("phi4 kink is monotone with one zero crossing and symmetric") {
    const ModelSpec spec = make_phi4(60, 0.4, -0.28);
    const Equilibrium eq = relax(spec, continuum_seed(spec, 30.5));
    int crossings = 0;
    for (Eigen::Index i = 0; i + 1 < eq.positions.size(); ++i) {
      CHECK(eq.positions[i + 1] > eq.positions[i]);
      crossings += (eq.positions[i] < 0) != (eq.positions[i + 1] < 0);
    }
    CHECK(crossings == 1);
    CHECK(eq.sector == 1);
    CHECK(eq.min_hessian_eig > 0.0);
    for (Eigen::Index i = 0; i < 60; ++i) CHECK(std::abs(eq.positions[i] + eq.positions[59 - i]) <= 1e-9);
  }

  TEST_CASE("re-relaxation is idempotent") {
    const ModelSpec sg = make_sine_gordon(60, 4.0, 1);
    RelaxOptions opt;
    const Equilibrium first = relax(sg, continuum_seed(sg, 30.5), opt);
    opt.tol = first.tolerance / 10.0;
    const Equilibrium again = relax(sg, first.positions, opt);
    CHECK((again.positions - first.positions).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(again.sector == 1);

    const ModelSpec phi4 = make_phi4(60, 0.4, -0.28);
    const Equilibrium p1 = relax(phi4, continuum_seed(phi4, 30.5));
    const Equilibrium p2 = relax(phi4, p1.positions);
    CHECK((p2.positions - p1.positions).cwiseAbs().maxCoeff() <= 1e-10);
  }

  TEST_CASE("energy never increases across accepted steps") {
    const ModelSpec spec = make_sine_gordon(40, 4.0, 1);
    std::vector<double> trace;
    relax(spec, continuum_seed(spec, 13.0), {}, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12 * std::abs(trace[0]));
  }

  TEST_CASE("strong coupling chain with an indefinite seed converges") {
    const ModelSpec spec = make_phi4(201, 5.0, -0.28);
    const Equilibrium eq = relax(spec, continuum_seed(spec, 101.0));
    CHECK(eq.min_hessian_eig > 0.0);
    CHECK(eq.iterations < 50);
  }

  TEST_CASE("iteration limit reports the last iterate") {
    const ModelSpec spec = make_phi4(30, 0.4, -0.28);
    RelaxOptions opt;
    opt.max_iters = 1;
    const VectorXd seed = continuum_seed(spec, 8.0);
    try {
      relax(spec, seed, opt);
      FAIL("expected RelaxError");
    } catch (const RelaxError& e) {
      CHECK(e.last_iterate().size() == 30);
      CHECK(e.grad_norm() > 0.0);
    }
  }

  TEST_CASE("a symmetric saddle is reported as such") {
    // x = 0 sits on the barrier top of every site; with negligible pinning
    // it is stationary to within tol.
    ModelSpec spec = make_phi4(8, 0.01, -0.28, 0);
    spec.end_stiffness = 1e-9;
    VectorXd seed = VectorXd::Zero(8);
    RelaxOptions opt;
    opt.tol = 1e-6;
    bool saddle = false;
    try {
      relax(spec, seed, opt);
    } catch (const SaddleError& e) {
      saddle = e.min_eigenvalue() <= 0.0;
    } catch (const Error&) {
    }
    CHECK(saddle);
  }

  TEST_CASE("invalid tolerance and seed length") {
    const ModelSpec spec = make_phi4(10, 0.4, -0.28);
    RelaxOptions opt;
    opt.tol = 0.0;
    CHECK_THROWS_AS(relax(spec, VectorXd::Zero(10), opt), ConfigError);
    CHECK_THROWS_AS(relax(spec, VectorXd::Zero(9)), ConfigError);
  }
}
