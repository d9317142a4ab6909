#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kinkcoh/equilibrium.hpp"
#include "kinkcoh/errors.hpp"
#include "kinkcoh/lattice.hpp"
#include "oracles.hpp"

using namespace kinkcoh;
using Eigen::VectorXd;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Random configurations near the model's natural scale.
VectorXd random_config(const ModelSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorXd x(static_cast<Eigen::Index>(spec.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = spec.kind == ModelKind::SineGordon ? (i + 1) * spec.lattice_const + 2.0 * u(rng) : 0.5 * u(rng);
  }
  return x;
}

ModelSpec soft_pinned(ModelSpec spec) {
  // Keeps finite differences of the boundary term well conditioned.
  spec.end_stiffness = 5.0;
  return spec;
}

}  // namespace

TEST_SUITE("lattice") {
  TEST_CASE("sine-gordon vacuum has zero energy") {
    ModelSpec spec = make_sine_gordon(4, 1.0, 0);
    VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = (i + 1) * kTwoPi;
    CHECK(potential_energy(spec, x) == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("phi4 uniform well bottom") {
    const double k = -0.28;
    for (int sector : {0}) {
      ModelSpec spec = make_phi4(10, 0.4, k, sector);
      const VectorXd x = VectorXd::Constant(10, std::sqrt(-k / 4.0));
      CHECK(spec.well_position() == doctest::Approx(0.264575).epsilon(1e-6));
      CHECK(potential_energy(spec, x) == doctest::Approx(10 * (-k * k / 16.0)).epsilon(1e-14));
    }
  }

  TEST_CASE("relaxed phi4 kink energy matches reversed summation") {
    const ModelSpec spec = make_phi4(60, 0.4, -0.28);
    const Equilibrium eq = relax(spec, continuum_seed(spec, 30.5));
    const double forward = potential_energy(spec, eq.positions);
    CHECK(forward == eq.energy);
    CHECK(std::abs(oracle::reversed_energy(spec, eq.positions) - forward) <= 1e-12 * std::abs(forward));
  }

  TEST_CASE("dimension mismatch is a configuration error") {
    const ModelSpec spec = make_phi4(10, 0.4, -0.28);
    CHECK_THROWS_AS(potential_energy(spec, VectorXd::Zero(9)), ConfigError);
    CHECK_THROWS_AS(derivatives(spec, VectorXd::Zero(11)), ConfigError);
  }

  TEST_CASE("gradient and Hessian agree with finite differences") {
    std::mt19937_64 rng(42);
    const ModelSpec models[] = {soft_pinned(make_phi4(12, 0.4, -0.28)), soft_pinned(make_sine_gordon(12, 4.0, 1))};
    for (const ModelSpec& spec : models) {
      double gerr = 0.0, herr = 0.0;
      for (int trial = 0; trial < 100; ++trial) {
        const VectorXd x = random_config(spec, rng);
        const DerivativeBundle d = derivatives(spec, x);
        gerr = std::max(gerr, (d.grad - oracle::fd_gradient(spec, x, 1e-6)).cwiseAbs().maxCoeff());
        herr = std::max(herr, (d.hessian - oracle::fd_hessian(spec, x, 1e-6)).cwiseAbs().maxCoeff());
        REQUIRE(d.hessian == d.hessian.transpose());
      }
      CAPTURE(to_string(spec.kind));
      CHECK(gerr <= 1e-6);
      CHECK(herr <= 1e-5);
    }
  }

  TEST_CASE("default end stiffness is 100 max g") {
    ModelSpec spec = make_phi4(6, 0.4, -0.28);
    spec.couplings = {0.1, 0.4, 0.3, 0.2, 0.1};
    CHECK(spec.resolved_end_stiffness() == doctest::Approx(40.0));
    spec.end_stiffness = 3.0;
    CHECK(spec.resolved_end_stiffness() == 3.0);
  }

  TEST_CASE("cubic and quartic substrate diagonals") {
    const ModelSpec phi4 = make_phi4(5, 0.4, -0.28);
    VectorXd x = VectorXd::Constant(5, 0.1);
    x[2] = 0.0;
    const DerivativeBundle dp = derivatives(phi4, x);
    CHECK(dp.third_diag[2] == 0.0);
    CHECK(dp.fourth_diag[2] == 24.0);
    CHECK(dp.third_diag[0] == doctest::Approx(2.4));

    const ModelSpec sg = make_sine_gordon(5, 4.0, 0);
    VectorXd y(5);
    for (int i = 0; i < 5; ++i) y[i] = (i + 1) * kTwoPi;
    y[2] = 3 * kTwoPi + std::numbers::pi / 2.0;
    const DerivativeBundle ds = derivatives(sg, y);
    CHECK(ds.third_diag[2] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(std::abs(ds.fourth_diag[2]) <= 1e-14);
  }

  TEST_CASE("global 2 pi shift leaves the sine-gordon energy unchanged") {
    // Near the kink; large strains on the stiff closing bond would amplify
    // the rounding of x + 2 pi itself past the tolerance.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e-2, 1e-2);
    const ModelSpec spec = make_sine_gordon(20, 4.0, 1);
    const VectorXd kink = relax(spec, continuum_seed(spec, 10.5)).positions;
    for (int trial = 0; trial < 10; ++trial) {
      const VectorXd x = kink + VectorXd::NullaryExpr(20, [&] { return u(rng); });
      const VectorXd shifted = (x.array() + kTwoPi).matrix();
      CHECK(std::abs(potential_energy(spec, shifted) - potential_energy(spec, x)) <= 1e-12);
    }
  }

  TEST_CASE("phi4 continuum seed shape") {
    const ModelSpec spec = make_phi4(41, 0.4, -0.28);
    const VectorXd x = continuum_seed(spec, 21.0);
    for (int d = 1; d <= 20; ++d) CHECK(x[20 + d] == -x[20 - d]);
    const double a = spec.well_position();
    CHECK(std::abs(x[0] + a) <= 0.01 * a);
    CHECK(std::abs(x[40] - a) <= 0.01 * a);
    CHECK(topological_sector(spec, x) == 1);
  }

  TEST_CASE("sine-gordon continuum seed carries one winding") {
    const ModelSpec spec = make_sine_gordon(40, 4.0, 1);
    const VectorXd x = continuum_seed(spec, 20.5);
    const double extra = x[39] - x[0] - 39 * spec.lattice_const;
    CHECK(std::abs(extra - kTwoPi) <= 0.01 * kTwoPi);
    CHECK(topological_sector(spec, x) == 1);
  }

  TEST_CASE("seed centre outside the chain is rejected") {
    const ModelSpec spec = make_phi4(10, 0.4, -0.28);
    CHECK_THROWS_AS(continuum_seed(spec, 0.5), ConfigError);
    CHECK_THROWS_AS(continuum_seed(spec, 10.5), ConfigError);
  }

  TEST_CASE("validation names the field") {
    ModelSpec spec = make_phi4(10, 0.4, 0.1);
    CHECK_THROWS_WITH_AS(validate(spec), doctest::Contains("model.k"), ConfigError);
    spec = make_phi4(10, 0.4, -0.28);
    spec.couplings.pop_back();
    CHECK_THROWS_WITH_AS(validate(spec), doctest::Contains("model.g"), ConfigError);
    spec = make_sine_gordon(10, 1.0);
    spec.boundary = Boundary::FixedEnds;
    CHECK_THROWS_WITH_AS(validate(spec), doctest::Contains("model.boundary"), ConfigError);
  }

  TEST_CASE("gaussian well profile") {
    const auto g = gaussian_well_profile(41, 1.8, 0.7, 2.5);
    REQUIRE(g.size() == 40);
    // Bonds 20 and 21 straddle the centre 21 symmetrically.
    CHECK(g[19] == doctest::Approx(g[20]));
    CHECK(g[0] == doctest::Approx(1.8).epsilon(1e-6));
    CHECK(g[19] < 1.8 * 0.4);
  }
}
