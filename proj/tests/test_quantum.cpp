#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kinkcoh/errors.hpp"
#include "kinkcoh/quantum.hpp"
#include "oracles.hpp"

using namespace kinkcoh;
using Eigen::MatrixXd;

namespace {

// Mode 0 (w = 1) and mode 1 (w = 0.4) form the system, mode 2 (w = 2) is
// the whole bath.
CouplingTensors three_mode(double l011_bath, double m0022) {
  CouplingTensors t;
  t.n_modes = 3;
  t.omega2 = Eigen::Vector3d(1.0, 0.16, 4.0);
  if (l011_bath != 0.0) t.third.emplace_back(coupling_key(0, 2, 2), l011_bath);
  if (m0022 != 0.0) t.fourth.emplace_back(coupling_key(0, 0, 2, 2), m0022);
  std::sort(t.third.begin(), t.third.end());
  return t;
}

SystemDef two_mode_def(double hbar = 1.0, double temperature = 0.0) {
  SystemDef d;
  d.sys_modes = {0, 1};
  d.dims = {3, 3};
  d.hbar = hbar;
  d.temperature = temperature;
  return d;
}

CMatrix projector(const Eigen::VectorXcd& v) { return v * v.adjoint(); }

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("quantum") {
  TEST_CASE("truncated ladder operators") {
    for (int d : {2, 5, 9}) {
      const MatrixXd a = annihilation(d);
      const MatrixXd n = a.transpose() * a;
      for (int i = 0; i < d; ++i) CHECK(n(i, i) == doctest::Approx(i));
      CHECK((n - MatrixXd(n.diagonal().asDiagonal())).isZero(0.0));
      const MatrixXd x = a + a.transpose();
      CHECK(x == x.transpose());
      const MatrixXd comm = a * a.transpose() - a.transpose() * a;
      for (int i = 0; i + 1 < d; ++i) CHECK(comm(i, i) == doctest::Approx(1.0));
      CHECK(comm(d - 1, d - 1) == doctest::Approx(1.0 - d));
    }
  }

  TEST_CASE("kron ordering") {
    MatrixXd a(2, 2), b(3, 3);
    a << 1, 2, 3, 4;
    b.setRandom();
    const MatrixXd k = kron(a, b);
    REQUIRE(k.rows() == 6);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) CHECK(k(i * 3 + p, j * 3 + q) == a(i, j) * b(p, q));
  }

  TEST_CASE("system operator sets") {
    SystemDef d = two_mode_def();
    const FockOperators two = build_fock_operators(d);
    CHECK(two.dim() == 9);
    CHECK(two.n_ops() == 5);
    CHECK((two.s[4] - two.x[0] * two.x[1]).isZero(0.0));
    CHECK((two.x[0] * two.x[1] - two.x[1] * two.x[0]).isZero(0.0));
    d.variant = Variant::LowModeInBath;
    d.sys_modes = {0};
    d.dims = {3};
    const FockOperators one = build_fock_operators(d);
    CHECK(one.n_ops() == 2);
    CHECK(one.dim() == 3);
  }

  TEST_CASE("invalid system definitions") {
    SystemDef d = two_mode_def();
    CHECK_NOTHROW(validate(d, 3));
    CHECK_THROWS_AS(validate(d, 1), ConfigError);
    d.dims = {3, 1};
    CHECK_THROWS_AS(validate(d, 3), ConfigError);
    d = two_mode_def();
    d.sys_modes = {0, 0};
    CHECK_THROWS_AS(validate(d, 3), ConfigError);
    d = two_mode_def();
    d.variant = Variant::TruncatedKernel;
    d.tau_c = 0.0;
    CHECK_THROWS_AS(validate(d, 3), ConfigError);
  }

  TEST_CASE("renormalization by hand") {
    // H contains (M/4) theta_0^2 theta_2^2 = hbar (M hbar / (16 w0 w2)) X_0^2 X_2^2
    // and (L/2) theta_0 theta_2^2 = hbar L sqrt(hbar) / (4 sqrt(2 w0) w2) X_0 X_2^2.
    const double m = 0.32, l = 0.05;
    const RenormConstants r = renormalize(three_mode(l, m), two_mode_def());
    CHECK(r.nu[0] == doctest::Approx(m / 32.0).epsilon(1e-13));
    CHECK(r.nu[1] == 0.0);
    CHECK(r.nu12 == 0.0);
    CHECK(r.xi[0] == doctest::Approx(l / (8.0 * std::sqrt(2.0))).epsilon(1e-13));
    CHECK(r.shifted_freqs[0] == doctest::Approx(std::sqrt(1.0 + 4.0 * m / 32.0)).epsilon(1e-13));
    CHECK(r.shifted_freqs[1] == doctest::Approx(0.4).epsilon(1e-15));

    // One thermal quantum in the bath mode triples <X_2^2>.
    const double temp = 2.0 / std::log(2.0);
    const RenormConstants warm = renormalize(three_mode(l, m), two_mode_def(1.0, temp));
    CHECK(warm.nu[0] == doctest::Approx(3.0 * m / 32.0).epsilon(1e-12));

    const RenormConstants none = renormalize(three_mode(l, m).harmonic_only(), two_mode_def());
    CHECK(none.nu.isZero(0.0));
    CHECK(none.xi.isZero(0.0));
    CHECK(none.shifted_freqs == none.bare_freqs);

    CHECK_THROWS_AS(renormalize(three_mode(0.0, -100.0), two_mode_def()), NumericalError);
  }

  TEST_CASE("renormalized frequency matches the diagonalized oscillator") {
    const double nu = 0.013, w = 1.0;
    const int d = 40;
    const MatrixXd a = annihilation(d);
    const MatrixXd x = a + a.transpose();
    const MatrixXd h = w * (a.transpose() * a + 0.5 * MatrixXd::Identity(d, d)) + nu * x * x;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    const RenormConstants r = renormalize(three_mode(0.0, nu * 32.0), two_mode_def());
    CHECK(es.eigenvalues()[1] - es.eigenvalues()[0] == doctest::Approx(r.shifted_freqs[0]).epsilon(1e-10));
  }

  TEST_CASE("correlation symmetry") {
    const oracle::ClosedSystem cs = oracle::make_closed_system({1.0, 0.37}, {1.25, 1.37, 1.52}, 3, 0.05, 7);
    SystemDef def = cs.def;
    def.temperature = 0.5;
    const BathModel bath = build_bath(cs.tensors, def);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> tau_dist(-30.0, 30.0);
    for (int rep = 0; rep < 50; ++rep) {
      const double tau = tau_dist(rng);
      for (int a = 0; a < bath.n_ops(); ++a) {
        const double scale = std::abs(correlation(bath, a, a, 0.0));
        if (scale == 0.0) continue;
        for (int b = 0; b < bath.n_ops(); ++b) {
          const Complex lhs = correlation(bath, a, b, -tau);
          const Complex rhs = std::conj(correlation(bath, b, a, tau));
          CHECK(std::abs(lhs - rhs) <= 1e-13 * scale);
        }
      }
    }
    // Same sums in a different order, so agreement is to rounding.
    const std::vector<CMatrix> table = correlation_table(bath, 0.3, 5);
    const double big = table[0].cwiseAbs().maxCoeff();
    for (int a = 0; a < bath.n_ops(); ++a)
      for (int b = 0; b < bath.n_ops(); ++b)
        CHECK(std::abs(table[3](a, b) - correlation(bath, a, b, 3 * 0.3)) <= 1e-14 * big);
  }

  TEST_CASE("correlation against an explicit thermal trace") {
    const oracle::ClosedSystem cs = oracle::make_closed_system({1.0, 0.37}, {1.0, 1.3, 1.7}, 3, 0.05, 12);
    SystemDef def = cs.def;
    def.temperature = 0.5;
    const BathModel bath = build_bath(cs.tensors, def);
    for (double tau : {0.0, 0.8, 3.1}) {
      for (auto [a, b] : {std::pair{0, 0}, std::pair{0, 4}, std::pair{2, 3}}) {
        const Complex fast = correlation(bath, a, b, tau);
        const Complex slow = oracle::thermal_trace_correlation(bath, a, b, tau, 10);
        CHECK(std::abs(fast - slow) <= 1e-6 * std::max(1e-12, std::abs(fast)));
      }
    }
  }

  TEST_CASE("system Hamiltonian") {
    const CouplingTensors harm = three_mode(0.0, 0.0);
    const SystemDef def = two_mode_def(0.5);
    const FockOperators ops = build_fock_operators(def);
    const MatrixXd h = build_system_hamiltonian(harm, def, renormalize(harm, def), ops);
    CHECK(h.isDiagonal(0.0));
    for (int n1 = 0; n1 < 3; ++n1)
      for (int n2 = 0; n2 < 3; ++n2)
        CHECK(h(n1 * 3 + n2, n1 * 3 + n2) == doctest::Approx(0.5 * ((n1 + 0.5) + 0.4 * (n2 + 0.5))));

    const oracle::ClosedSystem cs = oracle::make_closed_system({1.0, 0.37}, {1.25, 1.37, 1.52}, 5, 0.05, 3);
    const RenormConstants r = renormalize(cs.tensors, cs.def);
    const FockOperators ops5 = build_fock_operators(cs.def);
    const MatrixXd hs = build_system_hamiltonian(cs.tensors, cs.def, r, ops5);
    CHECK((hs - hs.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(hs);
    const double harmonic_ground = 0.5 * (r.shifted_freqs[0] + r.shifted_freqs[1]) + r.energy_offset;
    CHECK(es.eigenvalues()[0] == doctest::Approx(harmonic_ground).epsilon(0.01));
  }

  TEST_CASE("partial trace") {
    Eigen::Matrix2cd a;
    a << 0.7, Complex(0.1, 0.2), Complex(0.1, -0.2), 0.3;
    Eigen::Matrix3cd b = Eigen::Matrix3cd::Zero();
    b.diagonal() << 0.5, 0.3, 0.2;
    b(0, 2) = Complex(0.0, 0.1);
    b(2, 0) = Complex(0.0, -0.1);
    CMatrix prod(6, 6);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) prod.block(i * 3, j * 3, 3, 3) = a(i, j) * b;
    CHECK(max_abs(reduce(prod, 2, 3) - a) <= 1e-15);

    Eigen::VectorXcd bell = Eigen::VectorXcd::Zero(4);
    bell[0] = bell[3] = 1.0 / std::sqrt(2.0);
    CHECK(max_abs(reduce(projector(bell), 2, 2) - 0.5 * CMatrix::Identity(2, 2)) <= 1e-15);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    CMatrix g(12, 12);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = Complex(nd(rng), nd(rng));
    CMatrix rho = g * g.adjoint();
    rho /= rho.trace();
    CHECK(std::abs(reduce(rho, 3, 4).trace() - 1.0) <= 1e-14);
    CHECK_THROWS_AS(reduce(rho, 5, 2), ConfigError);
  }

  TEST_CASE("fidelity") {
    Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(2), one = Eigen::VectorXcd::Zero(2), tilt(2);
    zero[0] = 1.0;
    one[1] = 1.0;
    tilt << std::sqrt(3.0) / 2.0, 0.5;
    CHECK(fidelity(projector(zero), projector(zero)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fidelity(projector(zero), projector(one)) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(fidelity(projector(zero), projector(tilt)) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));
    const CMatrix mixed = 0.5 * CMatrix::Identity(2, 2);
    CHECK(fidelity(mixed, mixed) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fidelity(mixed, projector(zero)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CMatrix bad = CMatrix::Zero(2, 2);
    bad(0, 0) = 1.1;
    bad(1, 1) = -0.1;
    CHECK_THROWS_AS(fidelity(bad, mixed), NumericalError);
  }

  TEST_CASE("Rabi reference") {
    const double w = 0.743;
    const double period = 2.0 * std::numbers::pi / w;
    for (double t : {0.0, 1.3, 17.0}) {
      const CMatrix r = rabi_reference(w, 4, t);
      CHECK(r(0, 0).real() == doctest::Approx(0.5));
      CHECK(r(1, 1).real() == doctest::Approx(0.5));
      CHECK(std::abs(r(2, 2)) == 0.0);
      CHECK(max_abs(r - rabi_reference(w, 4, t + period)) <= 1e-12);
      CHECK(std::abs(r(1, 0) - 0.5 * std::polar(1.0, -w * t)) <= 1e-14);
    }
  }

  TEST_CASE("picture changes invert each other") {
    const oracle::ClosedSystem cs = oracle::make_closed_system({1.0, 0.37}, {1.25, 1.37, 1.52}, 4, 0.05, 9);
    const RenormConstants r = renormalize(cs.tensors, cs.def);
    const FockOperators ops = build_fock_operators(cs.def);
    const Propagator prop(build_system_hamiltonian(cs.tensors, cs.def, r, ops), cs.def.hbar);
    const CMatrix rho = initial_state(cs.def);
    for (double t : {0.0, 2.5, 90.0}) {
      CHECK(max_abs(prop.to_schrodinger(prop.to_interaction(rho, t), t) - rho) <= 1e-12);
    }
    CHECK(std::abs(rho.trace() - 1.0) <= 1e-15);
    CHECK(rho(2, 2).real() == doctest::Approx(0.5));
    CHECK(rho(4 + 2, 4 + 2).real() == doctest::Approx(0.5));
  }

  TEST_CASE("uncoupled system does not evolve in the interaction picture") {
    const oracle::ClosedSystem cs = oracle::make_closed_system({1.0, 0.37}, {1.25, 1.37, 1.52}, 4, 0.05, 9);
    const CouplingTensors harm = cs.tensors.harmonic_only();
    const RenormConstants r = renormalize(harm, cs.def);
    const FockOperators ops = build_fock_operators(cs.def);
    const Propagator prop(build_system_hamiltonian(harm, cs.def, r, ops), cs.def.hbar);
    const CMatrix rho0 = initial_state(cs.def);
    EvolveOptions opt;
    opt.dt = 0.1;
    opt.steps = 200;
    opt.record_every = 50;
    const MasterRun run = evolve(cs.def, prop, ops, build_bath(harm, cs.def), rho0, opt);
    CHECK(run.rho.size() == 5);
    for (const CMatrix& rho : run.rho) CHECK(max_abs(rho - rho0) == 0.0);
  }

  TEST_CASE("master equation invariants") {
    const oracle::ClosedSystem cs = oracle::make_closed_system({1.0, 0.37}, {1.25, 1.37, 1.52}, 4, 0.05, 21);
    for (Variant v : {Variant::FullTwoMode, Variant::TruncatedKernel}) {
      SystemDef def = cs.def;
      def.variant = v;
      def.tau_c = 3.0;
      def.temperature = 0.5;
      const RenormConstants r = renormalize(cs.tensors, def);
      const FockOperators ops = build_fock_operators(def);
      const Propagator prop(build_system_hamiltonian(cs.tensors, def, r, ops), def.hbar);
      EvolveOptions opt;
      opt.dt = 0.05;
      opt.steps = 400;
      opt.record_every = 7;
      const MasterRun run = evolve(def, prop, ops, build_bath(cs.tensors, def), initial_state(def), opt);
      CHECK(run.times.back() == doctest::Approx(20.0));
      CHECK(run.max_trace_error <= 1e-12);
      CHECK(run.max_hermiticity_error <= 1e-12);
      const std::vector<FidelityPoint> f = fidelity_series(run, def, prop, r.shifted_freqs[0]);
      CHECK(f.front().fidelity == doctest::Approx(1.0).epsilon(1e-12));
      for (const FidelityPoint& p : f) CHECK((p.fidelity >= 0.0 && p.fidelity <= 1.0 + 1e-12));
      for (std::size_t i = 0; i < f.size(); i += 5) {
        const double t = run.times[i];
        const CMatrix rho = reduce(prop.to_schrodinger(run.rho[i], t), 4, 4);
        const CMatrix ref = rabi_reference(r.shifted_freqs[0], 4, t);
        CHECK(f[i].fidelity == doctest::Approx(std::sqrt((rho * ref).trace().real())).epsilon(1e-12));
        Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
        if (es.eigenvalues()[0] >= 0.0) CHECK(f[i].fidelity == doctest::Approx(fidelity(rho, ref)).epsilon(1e-10));
      }
    }
    EvolveOptions bad;
    bad.dt = 0.0;
    const FockOperators ops = build_fock_operators(cs.def);
    const Propagator prop(MatrixXd::Identity(16, 16), 1.0);
    CHECK_THROWS_AS(evolve(cs.def, prop, ops, build_bath(cs.tensors, cs.def), initial_state(cs.def), bad),
                    ConfigError);
  }
}
