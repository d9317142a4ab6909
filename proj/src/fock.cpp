#include <algorithm>
#include <cmath>
#include <string>

#include "kinkcoh/errors.hpp"
#include "kinkcoh/quantum.hpp"

namespace kinkcoh {
namespace {

constexpr double kPureTol = 1e-10;
constexpr double kClampTol = 1e-6;

Eigen::MatrixXd identity(int d) { return Eigen::MatrixXd::Identity(d, d); }

Eigen::MatrixXd embed(const Eigen::MatrixXd& op, int slot, const std::vector<int>& dims) {
  Eigen::MatrixXd out = slot == 0 ? op : identity(dims[0]);
  for (std::size_t m = 1; m < dims.size(); ++m) {
    out = kron(out, static_cast<int>(m) == slot ? op : identity(dims[m]));
  }
  return out;
}

// Hermitian eigendecomposition with the clamping policy of fidelity().
Eigen::SelfAdjointEigenSolver<CMatrix> checked_eigen(const CMatrix& m, const char* what) {
  const CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  if (es.info() != Eigen::Success) throw NumericalError(std::string("fidelity: eigendecomposition of ") + what);
  if (es.eigenvalues()[0] < -kClampTol) {
    throw NumericalError(std::string("fidelity: ") + what + " has eigenvalue " +
                         std::to_string(es.eigenvalues()[0]) + " below the clamping limit");
  }
  return es;
}

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::FullTwoMode:
      return "full_two_mode";
    case Variant::TruncatedKernel:
      return "truncated_kernel";
    case Variant::LowModeInBath:
      return "low_mode_in_bath";
  }
  return "?";
}

const char* variant_label(Variant v) {
  switch (v) {
    case Variant::FullTwoMode:
      return "A";
    case Variant::TruncatedKernel:
      return "B";
    case Variant::LowModeInBath:
      return "C";
  }
  return "?";
}

int SystemDef::hilbert_dim() const {
  int d = 1;
  for (int k : dims) d *= k;
  return d;
}

void validate(const SystemDef& def, int n_modes) {
  if (def.sys_modes.empty() || def.sys_modes.size() > 2) {
    throw ConfigError("quantum.sys_modes: need one or two system modes");
  }
  if (def.dims.size() != def.sys_modes.size()) {
    throw ConfigError("quantum.dims: one truncation per system mode");
  }
  for (int d : def.dims) {
    if (d < 2) throw ConfigError("quantum.dims: truncation must be at least 2");
  }
  for (int m : def.sys_modes) {
    if (m < 0 || m >= n_modes) throw ConfigError("quantum.sys_modes: mode index out of range");
  }
  if (def.sys_modes.size() == 2 && def.sys_modes[0] == def.sys_modes[1]) {
    throw ConfigError("quantum.sys_modes: system modes must differ");
  }
  if (!(def.hbar > 0.0)) throw ConfigError("quantum.hbar: must be positive");
  if (!(def.temperature >= 0.0)) throw ConfigError("quantum.temperature: must be non-negative");
  if (def.variant == Variant::TruncatedKernel && !(def.tau_c > 0.0)) {
    throw ConfigError("quantum.tau_c: must be positive");
  }
  if (def.variant == Variant::LowModeInBath && def.sys_modes.size() != 1) {
    throw ConfigError("quantum.variant: low_mode_in_bath needs exactly one system mode");
  }
}

Eigen::MatrixXd annihilation(int dim) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

FockOperators build_fock_operators(const SystemDef& def) {
  if (def.dims.empty()) throw ConfigError("quantum.dims: no system modes");
  FockOperators ops;
  ops.dims = def.dims;
  const int modes = static_cast<int>(def.dims.size());
  for (int m = 0; m < modes; ++m) {
    const Eigen::MatrixXd a = annihilation(def.dims[m]);
    ops.a.push_back(embed(a, m, def.dims));
    ops.x.push_back(embed(a + a.transpose(), m, def.dims));
    ops.number.push_back(embed(a.transpose() * a, m, def.dims));
  }
  for (int m = 0; m < modes; ++m) {
    ops.s.push_back(ops.x[m]);
    ops.labels.push_back("X" + std::to_string(m + 1));
    ops.slots.emplace_back(m, -1);
  }
  for (int m = 0; m < modes; ++m) {
    ops.s.push_back(ops.x[m] * ops.x[m]);
    ops.labels.push_back("X" + std::to_string(m + 1) + "^2");
    ops.slots.emplace_back(m, m);
  }
  for (int m = 0; m < modes; ++m) {
    for (int n = m + 1; n < modes; ++n) {
      ops.s.push_back(ops.x[m] * ops.x[n]);
      ops.labels.push_back("X" + std::to_string(m + 1) + "X" + std::to_string(n + 1));
      ops.slots.emplace_back(m, n);
    }
  }
  return ops;
}

CMatrix initial_state(const SystemDef& def, int low_fock) {
  if (def.dims.empty()) throw ConfigError("quantum.dims: no system modes");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(def.dims[0]);
  psi[0] = psi[1] = 1.0 / std::sqrt(2.0);
  if (def.dims.size() == 2) {
    if (low_fock < 0 || low_fock >= def.dims[1]) throw ConfigError("quantum.low_fock: outside the truncation");
    Eigen::VectorXcd low = Eigen::VectorXcd::Zero(def.dims[1]);
    low[low_fock] = 1.0;
    Eigen::VectorXcd full(def.dims[0] * def.dims[1]);
    for (int i = 0; i < def.dims[0]; ++i) full.segment(i * def.dims[1], def.dims[1]) = psi[i] * low;
    psi = full;
  }
  return psi * psi.adjoint();
}

CMatrix reduce(const CMatrix& rho, int dim1, int dim2) {
  if (rho.rows() != dim1 * dim2 || rho.cols() != rho.rows()) {
    throw ConfigError("reduce: matrix size does not match the mode dimensions");
  }
  CMatrix out = CMatrix::Zero(dim1, dim1);
  for (int i = 0; i < dim1; ++i) {
    for (int j = 0; j < dim1; ++j) {
      Complex sum = 0.0;
      for (int k = 0; k < dim2; ++k) sum += rho(i * dim2 + k, j * dim2 + k);
      out(i, j) = sum;
    }
  }
  return out;
}

double fidelity(const CMatrix& rho, const CMatrix& chi) {
  if (rho.rows() != chi.rows() || rho.cols() != chi.cols() || rho.rows() != rho.cols()) {
    throw ConfigError("fidelity: matrices must be square and of equal size");
  }
  const auto es_chi = checked_eigen(chi, "chi");
  const auto es_rho = checked_eigen(rho, "rho");
  const Eigen::Index top = rho.rows() - 1;

  auto pure_case = [](const Eigen::SelfAdjointEigenSolver<CMatrix>& pure, const CMatrix& other) {
    const Eigen::VectorXcd psi = pure.eigenvectors().col(pure.eigenvalues().size() - 1);
    const double overlap = (psi.adjoint() * other * psi)(0, 0).real();
    const double weight = pure.eigenvalues()[pure.eigenvalues().size() - 1];
    return std::sqrt(std::max(0.0, weight * overlap));
  };
  if (es_chi.eigenvalues()[top] >= 1.0 - kPureTol) return std::min(1.0, pure_case(es_chi, rho));
  if (es_rho.eigenvalues()[top] >= 1.0 - kPureTol) return std::min(1.0, pure_case(es_rho, chi));

  const Eigen::VectorXd root = es_rho.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMatrix sqrt_rho = es_rho.eigenvectors() * root.asDiagonal() * es_rho.eigenvectors().adjoint();
  const CMatrix inner = sqrt_rho * chi * sqrt_rho;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (inner + inner.adjoint()), Eigen::EigenvaluesOnly);
  double f = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) f += std::sqrt(std::max(0.0, es.eigenvalues()[i]));
  return std::min(1.0, f);
}

CMatrix rabi_reference(double omega, int dim, double t) {
  if (dim < 2) throw ConfigError("rabi_reference: dimension must be at least 2");
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
  psi[0] = 1.0 / std::sqrt(2.0);
  psi[1] = std::polar(1.0 / std::sqrt(2.0), -omega * t);
  return psi * psi.adjoint();
}

}  // namespace kinkcoh
