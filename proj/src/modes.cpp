#include "kinkcoh/modes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "kinkcoh/errors.hpp"

namespace kinkcoh {
namespace {

constexpr double kDegenerateTol = 1e-10;
constexpr double kReflectionTol = 1e-13;

Eigen::MatrixXd reflect_rows(const Eigen::MatrixXd& m) { return m.colwise().reverse(); }

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double amax = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= amax * (1.0 - 1e-9)) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

// A reflection-symmetric Hessian is solved on the even and odd subspaces
// separately. A joint solve leaves near-degenerate pairs mixed at the
// 1e-8 level, which breaks the parity selection rules of the couplings.
void reflection_eigen(const Eigen::MatrixXd& h, Eigen::VectorXd& w2, Eigen::MatrixXd& vecs) {
  const Eigen::Index n = h.rows();
  const Eigen::Index half = n / 2;
  const Eigen::Index n_even = n - half;
  const double r = std::sqrt(0.5);
  Eigen::MatrixXd even = Eigen::MatrixXd::Zero(n, n_even);
  Eigen::MatrixXd odd = Eigen::MatrixXd::Zero(n, half);
  for (Eigen::Index i = 0; i < half; ++i) {
    even(i, i) = even(n - 1 - i, i) = r;
    odd(i, i) = r;
    odd(n - 1 - i, i) = -r;
  }
  if (n % 2 == 1) even(half, half) = 1.0;

  auto solve = [](const Eigen::MatrixXd& basis, const Eigen::MatrixXd& m) {
    Eigen::MatrixXd block = basis.transpose() * m * basis;
    block = 0.5 * (block + block.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
    if (es.info() != Eigen::Success) throw NumericalError("normal_modes: eigendecomposition failed");
    return std::pair{Eigen::VectorXd(es.eigenvalues()), Eigen::MatrixXd(basis * es.eigenvectors())};
  };
  const auto [we, ve] = solve(even, h);
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> o{Eigen::VectorXd(0), Eigen::MatrixXd(n, 0)};
  if (half > 0) o = solve(odd, h);
  const auto& [wo, vo] = o;

  // Merge descending; exact ties put the even mode first.
  struct Item {
    double w2;
    bool odd;
    Eigen::Index col;
  };
  std::vector<Item> items;
  for (Eigen::Index j = 0; j < we.size(); ++j) items.push_back({we[j], false, j});
  for (Eigen::Index j = 0; j < wo.size(); ++j) items.push_back({wo[j], true, j});
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.w2 != b.w2 ? a.w2 > b.w2 : (!a.odd && b.odd);
  });
  w2.resize(n);
  vecs.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Item& it = items[static_cast<std::size_t>(j)];
    w2[j] = it.w2;
    vecs.col(j) = it.odd ? vo.col(it.col) : ve.col(it.col);
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lo);
  }
  return m;
}

std::string wlabel(int idx) { return "w" + std::to_string(idx + 1); }

}  // namespace

bool ModeBasis::is_localized(int j) const {
  return std::find(localized.begin(), localized.end(), j) != localized.end();
}

int ModeBasis::lowest_localized() const {
  int best = -1;
  for (int j : localized) {
    if (best < 0 || freqs[j] < freqs[best]) best = j;
  }
  return best;
}

int ModeBasis::second_lowest_localized() const {
  const int low = lowest_localized();
  int best = -1;
  for (int j : localized) {
    if (j == low) continue;
    if (best < 0 || freqs[j] < freqs[best]) best = j;
  }
  return best;
}

double participation_ratio(const Eigen::VectorXd& v) {
  const double s4 = v.array().pow(4).sum();
  const double s2 = v.squaredNorm();
  return (s2 * s2) / (static_cast<double>(v.size()) * s4);
}

ModeBasis normal_modes(const Eigen::MatrixXd& hessian) {
  const Eigen::Index n = hessian.rows();
  if (n == 0 || hessian.cols() != n) throw ConfigError("normal_modes: Hessian must be square and non-empty");

  // Descending order.
  Eigen::VectorXd w2;
  Eigen::MatrixXd vecs;
  const double hmax = hessian.cwiseAbs().maxCoeff();
  const double asym = (hessian - hessian.reverse()).cwiseAbs().maxCoeff();
  if (n > 1 && asym <= kReflectionTol * hmax) {
    reflection_eigen(hessian, w2, vecs);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian);
    if (es.info() != Eigen::Success) throw NumericalError("normal_modes: eigendecomposition failed");
    w2 = es.eigenvalues().reverse();
    vecs = es.eigenvectors().rowwise().reverse();
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(w2[j] > 0.0)) {
      throw NumericalError("normal_modes: eigenvalue " + std::to_string(w2[j]) + " at mode " +
                           std::to_string(j + 1) + " (descending order) is not positive");
    }
  }

  // Rotate exactly degenerate clusters onto reflection eigenvectors.
  const double scale = std::max(std::abs(w2[0]), 1.0);
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && std::abs(w2[end - 1] - w2[end]) <= kDegenerateTol * scale) ++end;
    const Eigen::Index m = end - start;
    if (m > 1) {
      Eigen::MatrixXd block = vecs.middleCols(start, m);
      Eigen::MatrixXd r = block.transpose() * reflect_rows(block);
      r = 0.5 * (r + r.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rs(r);
      vecs.middleCols(start, m) = block * rs.eigenvectors().rowwise().reverse();
      std::sort(w2.data() + start, w2.data() + end, std::greater<>());
    }
    start = end;
  }
  for (Eigen::Index j = 0; j < n; ++j) fix_sign(vecs.col(j));

  ModeBasis basis;
  basis.freqs = w2.cwiseSqrt();
  basis.vectors = vecs;
  basis.participation.resize(n);
  basis.parity.resize(n);
  basis.is_end.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < n; ++j) {
    basis.participation[j] = participation_ratio(vecs.col(j));
    basis.parity[j] = vecs.col(j).dot(vecs.col(j).reverse());
  }

  const double ortho = (vecs.transpose() * vecs - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  const double recon = (vecs * w2.asDiagonal() * vecs.transpose() - hessian).cwiseAbs().maxCoeff();
  const double hnorm = hessian.cwiseAbs().maxCoeff();
  if (ortho > 1e-10 || recon > 1e-9 * hnorm) {
    throw NumericalError("normal_modes: decomposition check failed (orthonormality " + std::to_string(ortho) +
                         ", reconstruction " + std::to_string(recon) + ")");
  }
  return basis;
}

BandInfo band_info(const ModeBasis& basis, double gap_factor) {
  BandInfo info;
  std::vector<double> f;
  for (int j = 0; j < basis.size(); ++j) {
    if (basis.is_end.empty() || !basis.is_end[static_cast<std::size_t>(j)]) f.push_back(basis.freqs[j]);
  }
  std::sort(f.begin(), f.end());
  if (f.size() < 3) {
    if (!f.empty()) {
      info.bottom = f.front();
      info.top = f.back();
      info.band_size = static_cast<int>(f.size());
    }
    return info;
  }
  // Spacings inside degenerate couples are dropped before taking the median.
  const double mean_spacing = (f.back() - f.front()) / static_cast<double>(f.size() - 1);
  auto spacing_median = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> s;
    for (std::size_t i = lo; i + 1 <= hi; ++i) {
      const double d = f[i + 1] - f[i];
      if (d > 0.1 * mean_spacing) s.push_back(d);
    }
    return median(s);
  };

  // Peel isolated modes off both edges; the band interior may have spacings
  // well above the median (the middle of a dispersive band), so only the
  // edges are tested. Repeat until the median of the remaining band agrees.
  std::size_t lo = 0;
  std::size_t hi = f.size() - 1;
  for (int pass = 0; pass < 8; ++pass) {
    const double threshold = gap_factor * spacing_median(lo, hi);
    std::size_t new_lo = 0;
    std::size_t new_hi = f.size() - 1;
    while (new_lo + 1 < new_hi && f[new_lo + 1] - f[new_lo] > threshold) ++new_lo;
    while (new_hi > new_lo + 1 && f[new_hi] - f[new_hi - 1] > threshold) --new_hi;
    if (new_lo == lo && new_hi == hi) break;
    lo = new_lo;
    hi = new_hi;
  }
  info.bottom = f[lo];
  info.top = f[hi];
  info.band_size = static_cast<int>(hi - lo + 1);
  info.median_spacing = spacing_median(lo, hi);
  return info;
}

void classify(ModeBasis& basis, double gap_factor, BandInfo* band) {
  if (!(gap_factor > 1.0)) throw ConfigError("modes.gap_factor: must exceed 1");
  const int n = basis.size();
  const Eigen::Index rows = basis.vectors.rows();
  basis.is_end.assign(static_cast<std::size_t>(n), false);
  basis.participation.resize(n);
  for (int j = 0; j < n; ++j) {
    const auto col = basis.vectors.col(j);
    basis.participation[j] = participation_ratio(col);
    const double end_weight = col[0] * col[0] + col[rows - 1] * col[rows - 1];
    basis.is_end[static_cast<std::size_t>(j)] = end_weight > 0.5;
  }
  const BandInfo info = band_info(basis, gap_factor);
  basis.localized.clear();
  const double margin = gap_factor * info.median_spacing;
  for (int j = 0; j < n; ++j) {
    if (basis.is_end[static_cast<std::size_t>(j)]) continue;
    const double w = basis.freqs[j];
    if (w < info.bottom - margin || w > info.top + margin) basis.localized.push_back(j);
  }
  if (band) *band = info;
}

ResonanceReport resonances(const ModeBasis& basis, int i, int j) {
  const int n = basis.size();
  if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
    throw ConfigError("resonances: need two distinct valid mode indices");
  }
  const Eigen::VectorXd& w = basis.freqs;
  std::vector<int> band;
  for (int k = 0; k < n; ++k) {
    if (k != i && k != j && !basis.is_localized(k)) band.push_back(k);
  }

  ResonanceReport out;
  const std::string wi = wlabel(i), wj = wlabel(j);
  for (int k : band) {
    out.push_back({wi + "-" + wj + "-wk", k, w[i] - w[j] - w[k]});
    out.push_back({wi + "+" + wj + "-wk", k, w[i] + w[j] - w[k]});
  }

  ResonanceReport four;
  for (std::size_t a = 0; a < band.size(); ++a) {
    for (std::size_t b = 0; b < band.size(); ++b) {
      const int k = band[a], l = band[b];
      if (k == l) continue;
      for (int sj : {1, -1}) {
        for (int sk : {1, -1}) {
          // w_i + w_j + w_k - w_l and w_i - w_j + ... ; skip the mirror duplicates of k <-> l.
          if (sk < 0 && k > l) continue;
          const double det = w[i] + sj * w[j] + sk * w[k] - w[l];
          std::string sig = wi + (sj > 0 ? "+" : "-") + wj + (sk > 0 ? "+" : "-") + "wk-" + wlabel(l);
          four.push_back({std::move(sig), k, det});
        }
      }
    }
  }
  auto by_abs = [](const Resonance& x, const Resonance& y) {
    const double ax = std::abs(x.detuning), ay = std::abs(y.detuning);
    if (ax != ay) return ax < ay;
    if (x.mode_index != y.mode_index) return x.mode_index < y.mode_index;
    return x.signature < y.signature;
  };
  const std::size_t keep = std::min<std::size_t>(20, four.size());
  std::partial_sort(four.begin(), four.begin() + static_cast<std::ptrdiff_t>(keep), four.end(), by_abs);
  out.insert(out.end(), four.begin(), four.begin() + static_cast<std::ptrdiff_t>(keep));
  std::stable_sort(out.begin(), out.end(), by_abs);
  return out;
}

}  // namespace kinkcoh
