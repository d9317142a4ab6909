#include "kinkcoh/couplings.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "kinkcoh/errors.hpp"

namespace kinkcoh {
namespace {

constexpr char kMagic[8] = {'K', 'C', 'T', 'E', 'N', 'S', '0', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void check_index(int i) {
  if (i < 0 || i > 0xFFFF) throw ConfigError("coupling index out of range");
}

double lookup(const std::vector<CouplingTensors::Entry>& entries, std::uint64_t key) {
  auto it = std::lower_bound(entries.begin(), entries.end(), key,
                             [](const CouplingTensors::Entry& e, std::uint64_t k) { return e.first < k; });
  return (it != entries.end() && it->first == key) ? it->second : 0.0;
}

template <std::size_t R>
std::array<int, R> unpack(std::uint64_t key) {
  std::array<int, R> idx{};
  for (std::size_t r = 0; r < R; ++r) {
    idx[R - 1 - r] = static_cast<int>((key >> (16 * r)) & 0xFFFF);
  }
  return idx;
}

// Number of distinct orderings of a sorted index tuple.
template <std::size_t R>
double multiplicity(const std::array<int, R>& idx) {
  double perms = R == 3 ? 6.0 : 24.0;
  std::size_t run = 1;
  for (std::size_t r = 1; r <= R; ++r) {
    if (r < R && idx[r] == idx[r - 1]) {
      ++run;
    } else {
      for (std::size_t f = 2; f <= run; ++f) perms /= static_cast<double>(f);
      run = 1;
    }
  }
  return perms;
}

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("couplings sidecar: truncated file");
  return v;
}

}  // namespace

std::array<int, 3> unpack_key3(std::uint64_t key) { return unpack<3>(key); }
std::array<int, 4> unpack_key4(std::uint64_t key) { return unpack<4>(key); }

std::uint64_t coupling_key(int i, int j, int k) {
  std::array<int, 3> a{i, j, k};
  for (int v : a) check_index(v);
  std::sort(a.begin(), a.end());
  return (static_cast<std::uint64_t>(a[0]) << 32) | (static_cast<std::uint64_t>(a[1]) << 16) |
         static_cast<std::uint64_t>(a[2]);
}

std::uint64_t coupling_key(int i, int j, int k, int l) {
  std::array<int, 4> a{i, j, k, l};
  for (int v : a) check_index(v);
  std::sort(a.begin(), a.end());
  return (static_cast<std::uint64_t>(a[0]) << 48) | (static_cast<std::uint64_t>(a[1]) << 32) |
         (static_cast<std::uint64_t>(a[2]) << 16) | static_cast<std::uint64_t>(a[3]);
}

double CouplingTensors::L(int i, int j, int k) const { return lookup(third, coupling_key(i, j, k)); }

double CouplingTensors::M(int i, int j, int k, int l) const {
  return lookup(fourth, coupling_key(i, j, k, l));
}

double CouplingTensors::cubic_term(const Eigen::VectorXd& theta) const {
  if (theta.size() != n_modes) throw ConfigError("cubic_term: displacement length mismatch");
  double sum = 0.0;
  for (const auto& [key, value] : third) {
    const auto idx = unpack<3>(key);
    sum += multiplicity(idx) * value * theta[idx[0]] * theta[idx[1]] * theta[idx[2]];
  }
  return sum / 6.0;
}

double CouplingTensors::quartic_term(const Eigen::VectorXd& theta) const {
  if (theta.size() != n_modes) throw ConfigError("quartic_term: displacement length mismatch");
  double sum = 0.0;
  for (const auto& [key, value] : fourth) {
    const auto idx = unpack<4>(key);
    sum += multiplicity(idx) * value * theta[idx[0]] * theta[idx[1]] * theta[idx[2]] * theta[idx[3]];
  }
  return sum / 24.0;
}

CouplingTensors CouplingTensors::harmonic_only() const {
  CouplingTensors out;
  out.n_modes = n_modes;
  out.omega2 = omega2;
  out.threshold3 = threshold3;
  out.threshold4 = threshold4;
  return out;
}

CouplingTensors transform(const DerivativeBundle& bundle, const ModeBasis& basis, const CouplingOptions& options) {
  const Eigen::Index n = basis.vectors.rows();
  if (bundle.third_diag.size() != n || bundle.fourth_diag.size() != n || basis.vectors.cols() != n ||
      basis.freqs.size() != n) {
    throw ConfigError("transform: basis and derivative bundle dimensions differ");
  }
  if (n > 0xFFFF) throw ConfigError("transform: too many modes for the key format");

  CouplingTensors t;
  t.n_modes = static_cast<int>(n);
  t.omega2 = basis.freqs.array().square();
  const double max3 = bundle.third_diag.cwiseAbs().maxCoeff();
  const double max4 = bundle.fourth_diag.cwiseAbs().maxCoeff();
  t.threshold3 = options.threshold3 >= 0.0 ? options.threshold3 : 1e-12 * max3;
  t.threshold4 = options.threshold4 >= 0.0 ? options.threshold4 : 1e-12 * max4;

  const Eigen::MatrixXd& lam = basis.vectors;
  const bool any3 = max3 > 0.0;
  const bool any4 = max4 > 0.0;

  // For fixed leading indices the remaining pair is lam^T diag(w) lam.
  Eigen::MatrixXd block(n, n);
  if (any3) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd w = bundle.third_diag.cwiseProduct(lam.col(i));
      block.noalias() = lam.transpose() * w.asDiagonal() * lam;
      for (Eigen::Index j = i; j < n; ++j) {
        for (Eigen::Index k = j; k < n; ++k) {
          const double v = block(j, k);
          if (std::abs(v) >= t.threshold3 && v != 0.0) {
            t.third.emplace_back(coupling_key(static_cast<int>(i), static_cast<int>(j), static_cast<int>(k)), v);
          }
        }
      }
    }
  }
  if (any4) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) {
        const Eigen::VectorXd w = bundle.fourth_diag.cwiseProduct(lam.col(i)).cwiseProduct(lam.col(j));
        const Eigen::MatrixXd right = lam.rightCols(n - j);
        block.topLeftCorner(n - j, n - j).noalias() = right.transpose() * w.asDiagonal() * right;
        for (Eigen::Index k = j; k < n; ++k) {
          for (Eigen::Index l = k; l < n; ++l) {
            const double v = block(k - j, l - j);
            if (std::abs(v) >= t.threshold4 && v != 0.0) {
              t.fourth.emplace_back(coupling_key(static_cast<int>(i), static_cast<int>(j), static_cast<int>(k),
                                                 static_cast<int>(l)),
                                    v);
            }
          }
        }
      }
    }
  }
  // Loop order i <= j <= k (<= l) already yields ascending keys.
  return t;
}

Eigen::MatrixXd coupling_slice(const CouplingTensors& tensors, int mode, int order) {
  const int n = tensors.n_modes;
  if (mode < 0 || mode >= n) throw ConfigError("coupling_slice: mode index out of range");
  if (order != 3 && order != 4) throw ConfigError("coupling_slice: order must be 3 or 4");
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = j; k < n; ++k) {
      const double v = order == 3 ? std::abs(tensors.L(mode, j, k)) / 6.0
                                  : std::abs(tensors.M(mode, mode, j, k)) / 24.0;
      s(j, k) = v;
      s(k, j) = v;
    }
  }
  return s;
}

void write_couplings_binary(const CouplingTensors& tensors, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kFormatVersion);
  put(out, static_cast<std::uint32_t>(tensors.n_modes));
  put(out, tensors.threshold3);
  put(out, tensors.threshold4);
  for (Eigen::Index i = 0; i < tensors.omega2.size(); ++i) put(out, tensors.omega2[i]);
  for (const auto* list : {&tensors.third, &tensors.fourth}) {
    put(out, static_cast<std::uint64_t>(list->size()));
    for (const auto& [key, value] : *list) {
      put(out, key);
      put(out, value);
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

CouplingTensors read_couplings_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + ": not a coupling tensor file");
  }
  if (get<std::uint32_t>(in) != kFormatVersion) throw IoError(path.string() + ": unsupported format version");
  CouplingTensors t;
  t.n_modes = static_cast<int>(get<std::uint32_t>(in));
  t.threshold3 = get<double>(in);
  t.threshold4 = get<double>(in);
  t.omega2.resize(t.n_modes);
  for (int i = 0; i < t.n_modes; ++i) t.omega2[i] = get<double>(in);
  for (auto* list : {&t.third, &t.fourth}) {
    const auto count = get<std::uint64_t>(in);
    list->reserve(count);
    for (std::uint64_t e = 0; e < count; ++e) {
      const auto key = get<std::uint64_t>(in);
      const auto value = get<double>(in);
      list->emplace_back(key, value);
    }
    if (!std::is_sorted(list->begin(), list->end())) throw IoError(path.string() + ": entries out of order");
  }
  return t;
}

}  // namespace kinkcoh
