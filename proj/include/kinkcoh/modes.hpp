#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kinkcoh {

/// Normal modes of a Hessian, ordered from the highest to the lowest
/// frequency. Column j of `vectors` is mode j, unit norm, with its
/// largest-magnitude entry positive.
struct ModeBasis {
  Eigen::VectorXd freqs;
  Eigen::MatrixXd vectors;
  /// Indices (into freqs) of gap-separated modes, ascending index order.
  std::vector<int> localized;
  /// 1 / (N sum_i lambda_ij^4); 1 for a uniform vector, 1/N for a delta.
  Eigen::VectorXd participation;
  /// Weight on the two end particles exceeds 0.5.
  std::vector<bool> is_end;
  /// sum_i lambda_ij lambda_(N+1-i)j: +1 even, -1 odd under reflection.
  Eigen::VectorXd parity;

  int size() const noexcept { return static_cast<int>(freqs.size()); }
  bool is_localized(int j) const;
  /// Lowest-frequency localized mode, or -1.
  int lowest_localized() const;
  /// Second-lowest localized mode below the band, or -1.
  int second_lowest_localized() const;
};

/// Full symmetric eigendecomposition. Throws NumericalError naming the
/// first non-positive eigenvalue. Degenerate clusters are rotated onto
/// reflection eigenvectors and ordered even before odd.
ModeBasis normal_modes(const Eigen::MatrixXd& hessian);

struct BandInfo {
  double bottom = 0.0;
  double top = 0.0;
  double median_spacing = 0.0;
  int band_size = 0;
};

/// Participation ratios, end-mode flags and localization flags. A non-end
/// mode is localized when it lies more than gap_factor * (median band
/// spacing) below the band bottom or above the band top.
void classify(ModeBasis& basis, double gap_factor = 3.0, BandInfo* band = nullptr);
BandInfo band_info(const ModeBasis& basis, double gap_factor = 3.0);

struct Resonance {
  std::string signature;
  int mode_index = -1;
  double detuning = 0.0;
};
using ResonanceReport = std::vector<Resonance>;

/// Three-phonon detunings w_i -/+ w_j - w_k over all non-localized k, plus
/// the 20 smallest four-phonon detunings w_i +/- w_j +/- w_k - w_l. Sorted by
/// |detuning| ascending.
ResonanceReport resonances(const ModeBasis& basis, int i, int j);

double participation_ratio(const Eigen::VectorXd& v);

}  // namespace kinkcoh
