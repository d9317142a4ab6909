#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "kinkcoh/couplings.hpp"
#include "kinkcoh/equilibrium.hpp"
#include "kinkcoh/errors.hpp"
#include "kinkcoh/lattice.hpp"
#include "kinkcoh/modes.hpp"
#include "oracles.hpp"

using namespace kinkcoh;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Kink {
  ModelSpec spec;
  Equilibrium eq;
  DerivativeBundle bundle;
  ModeBasis basis;
};

Kink solve(const ModelSpec& spec) {
  Kink k{spec, relax(spec, continuum_seed(spec, 0.5 * (spec.size() + 1.0))), {}, {}};
  k.bundle = derivatives(spec, k.eq.positions);
  k.basis = normal_modes(k.bundle.hessian);
  classify(k.basis);
  return k;
}

CouplingOptions keep_all() {
  CouplingOptions o;
  o.threshold3 = 0.0;
  o.threshold4 = 0.0;
  return o;
}

}  // namespace

TEST_SUITE("couplings") {
  TEST_CASE("canonical keys ignore index order") {
    CHECK(coupling_key(3, 1, 2) == coupling_key(1, 2, 3));
    CHECK(coupling_key(2, 3, 1) == coupling_key(3, 2, 1));
    CHECK(coupling_key(4, 0, 4, 1) == coupling_key(0, 1, 4, 4));
    CHECK(unpack_key3(coupling_key(9, 2, 5)) == std::array<int, 3>{2, 5, 9});
    CHECK(unpack_key4(coupling_key(7, 7, 1, 300)) == std::array<int, 4>{1, 7, 7, 300});
  }

  TEST_CASE("fast contraction equals the naive one") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    const int n = 6;
    MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = nd(rng);
    const MatrixXd h = a * a.transpose() + n * MatrixXd::Identity(n, n);
    const ModeBasis basis = normal_modes(h);
    DerivativeBundle bundle;
    bundle.hessian = h;
    bundle.grad = VectorXd::Zero(n);
    bundle.third_diag = VectorXd::NullaryExpr(n, [&] { return nd(rng); });
    bundle.fourth_diag = VectorXd::NullaryExpr(n, [&] { return nd(rng); });
    const CouplingTensors t = transform(bundle, basis, keep_all());

    CHECK(t.omega2.isApprox(basis.freqs.array().square().matrix(), 0.0));
    double err3 = 0.0, err4 = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
          err3 = std::max(err3, std::abs(t.L(i, j, k) - oracle::naive_cubic(bundle.third_diag, basis.vectors, i, j, k)));
          for (int l = 0; l < n; ++l) {
            err4 = std::max(err4, std::abs(t.M(i, j, k, l) -
                                           oracle::naive_quartic(bundle.fourth_diag, basis.vectors, i, j, k, l)));
          }
        }
      }
    }
    CHECK(err3 <= 1e-12);
    CHECK(err4 <= 1e-12);
    CHECK(t.L(1, 4, 2) == t.L(4, 2, 1));
    CHECK(t.M(0, 3, 5, 2) == t.M(5, 2, 3, 0));
  }

  TEST_CASE("harmonic chain has no anharmonic couplings") {
    const Kink k = solve(make_sine_gordon(12, 4.0, 1));
    DerivativeBundle b = k.bundle;
    b.third_diag.setZero();
    b.fourth_diag.setZero();
    const CouplingTensors t = transform(b, k.basis);
    CHECK(t.third.empty());
    CHECK(t.fourth.empty());
    CHECK(coupling_slice(t, 3, 3).isZero(0.0));
    CHECK(coupling_slice(t, 3, 4).isZero(0.0));
  }

  TEST_CASE("phi4 kink couplings follow the parity chessboard") {
    // The cubic substrate 24 x is odd on the kink, the quartic one even.
    const Kink k = solve(make_phi4(40, 0.4, -0.28));
    const CouplingTensors t = transform(k.bundle, k.basis, keep_all());
    const double l_scale = t.third.empty() ? 1.0 : std::abs(t.third.front().second);
    double l_max_even = 0.0, m_max_odd = 0.0;
    const auto& p = k.basis.parity;
    for (const auto& [key, v] : t.third) {
      const auto [i, j, kk] = unpack_key3(key);
      if (p[i] * p[j] * p[kk] > 0) l_max_even = std::max(l_max_even, std::abs(v));
    }
    for (const auto& [key, v] : t.fourth) {
      const auto [i, j, kk, l] = unpack_key4(key);
      if (p[i] * p[j] * p[kk] * p[l] < 0) m_max_odd = std::max(m_max_odd, std::abs(v));
    }
    CHECK(l_scale > 0.0);
    CHECK(l_max_even <= 1e-12);
    CHECK(m_max_odd <= 1e-12);
    // The default threshold removes exactly these zeros.
    const CouplingTensors d = transform(k.bundle, k.basis);
    for (const auto& [key, v] : d.third) {
      const auto [i, j, kk] = unpack_key3(key);
      CHECK(p[i] * p[j] * p[kk] < 0);
    }
  }

  TEST_CASE("slices are symmetric and non-negative") {
    const Kink k = solve(make_phi4(30, 0.4, -0.28));
    const CouplingTensors t = transform(k.bundle, k.basis);
    for (int order : {3, 4}) {
      const MatrixXd s = coupling_slice(t, 28, order);
      CHECK(s == s.transpose());
      CHECK(s.minCoeff() >= 0.0);
    }
    CHECK(coupling_slice(t, 28, 3)(5, 9) == doctest::Approx(std::abs(t.L(28, 5, 9)) / 6.0));
    CHECK(coupling_slice(t, 28, 4)(5, 9) == doctest::Approx(std::abs(t.M(28, 28, 5, 9)) / 24.0));
    CHECK_THROWS_AS(coupling_slice(t, 30, 3), ConfigError);
    CHECK_THROWS_AS(coupling_slice(t, 0, 5), ConfigError);
  }

  TEST_CASE("sine-gordon G=4: translational quartic slice an order of magnitude below cubic") {
    const Kink k = solve(make_sine_gordon(60, 4.0, 1));
    const CouplingTensors t = transform(k.bundle, k.basis);
    const int mode = k.basis.lowest_localized();
    REQUIRE(mode >= 0);
    const double m3 = coupling_slice(t, mode, 3).maxCoeff();
    const double m4 = coupling_slice(t, mode, 4).maxCoeff();
    CHECK(m4 * 10.0 <= m3);
  }

  TEST_CASE("cubic term reproduces the Taylor residual of V") {
    // phi4 is a quartic polynomial, so the residual after the harmonic and
    // quartic terms is exactly the cubic term.
    const Kink k = solve(make_phi4(24, 0.4, -0.28));
    const CouplingTensors t = transform(k.bundle, k.basis, keep_all());
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    const double v0 = potential_energy(k.spec, k.eq.positions);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd theta = VectorXd::NullaryExpr(24, [&] { return u(rng); });
      const VectorXd dx = k.basis.vectors * theta;
      const double v = potential_energy(k.spec, VectorXd(k.eq.positions + dx));
      const double harmonic = 0.5 * t.omega2.dot(theta.cwiseAbs2());
      const double residual = v - v0 - k.bundle.grad.dot(dx) - harmonic - t.quartic_term(theta);
      worst = std::max(worst, std::abs(residual - t.cubic_term(theta)));
    }
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("binary sidecar round trip") {
    const Kink k = solve(make_phi4(20, 0.4, -0.28));
    const CouplingTensors t = transform(k.bundle, k.basis);
    const auto path = std::filesystem::temp_directory_path() / "kinkcoh_couplings_test.bin";
    write_couplings_binary(t, path);
    const CouplingTensors r = read_couplings_binary(path);
    CHECK(r.n_modes == t.n_modes);
    CHECK(r.omega2 == t.omega2);
    CHECK(r.third == t.third);
    CHECK(r.fourth == t.fourth);
    CHECK(r.threshold3 == t.threshold3);

    // Truncation and foreign files are I/O errors.
    std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
    CHECK_THROWS_AS(read_couplings_binary(path), IoError);
    std::ofstream(path) << "definitely not a tensor file";
    CHECK_THROWS_AS(read_couplings_binary(path), IoError);
    std::filesystem::remove(path);
  }

  TEST_CASE("dimension mismatch") {
    const Kink k = solve(make_phi4(10, 0.4, -0.28));
    DerivativeBundle b = k.bundle;
    b.third_diag.resize(9);
    CHECK_THROWS_AS(transform(b, k.basis), ConfigError);
  }
}
