#pragma once
// Anharmonic couplings in normal coordinates. The physical-coordinate
// cubic and quartic tensors are diagonal, so
//   L_ijk  = sum_m L'_m  lam_mi lam_mj lam_mk
//   M_ijkl = sum_m M'_m  lam_mi lam_mj lam_mk lam_ml
// and the quadratic part is diag(omega^2).

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kinkcoh/lattice.hpp"
#include "kinkcoh/modes.hpp"

namespace kinkcoh {

/// Packs up to four mode indices (each < 65536) into a canonical key. The
/// indices are sorted first, so every permutation maps to the same key.
std::uint64_t coupling_key(int i, int j, int k);
std::uint64_t coupling_key(int i, int j, int k, int l);
/// Inverse of coupling_key: the sorted indices.
std::array<int, 3> unpack_key3(std::uint64_t key);
std::array<int, 4> unpack_key4(std::uint64_t key);

struct CouplingTensors {
  using Entry = std::pair<std::uint64_t, double>;

  int n_modes = 0;
  Eigen::VectorXd omega2;
  /// Entries sorted by key; only |value| >= threshold is kept.
  std::vector<Entry> third;
  std::vector<Entry> fourth;
  double threshold3 = 0.0;
  double threshold4 = 0.0;

  /// Lookups accept any index order; dropped entries read as zero.
  double L(int i, int j, int k) const;
  double M(int i, int j, int k, int l) const;

  /// (1/3!) sum_ijk L_ijk t_i t_j t_k over all ordered index triples.
  double cubic_term(const Eigen::VectorXd& theta) const;
  /// (1/4!) sum_ijkl M_ijkl t_i t_j t_k t_l.
  double quartic_term(const Eigen::VectorXd& theta) const;

  /// Copy with every anharmonic coefficient set to zero.
  CouplingTensors harmonic_only() const;
};

struct CouplingOptions {
  /// Absolute drop thresholds. Negative means 1e-12 * max|L'| (resp. M').
  double threshold3 = -1.0;
  double threshold4 = -1.0;
};

CouplingTensors transform(const DerivativeBundle& bundle, const ModeBasis& basis,
                          const CouplingOptions& options = {});

/// |L_{mode,j,k}| / 3! for order 3, |M_{mode,mode,j,k}| / 4! for order 4.
Eigen::MatrixXd coupling_slice(const CouplingTensors& tensors, int mode, int order);

/// Binary sidecar: magic, version, sizes, thresholds, omega^2, then
/// (key, value) records for both orders, little-endian as laid out in memory.
void write_couplings_binary(const CouplingTensors& tensors, const std::filesystem::path& path);
CouplingTensors read_couplings_binary(const std::filesystem::path& path);

}  // namespace kinkcoh
