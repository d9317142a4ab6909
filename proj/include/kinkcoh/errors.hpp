#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kinkcoh {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: bad configuration keys, dimension mismatches, out-of-range
/// parameters. Maps to exit status 2 in the CLI.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (non-convergence, blow-up, loss of
/// positivity beyond tolerance). Maps to exit status 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File system and artifact problems (missing or corrupt files).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Newton relaxation ran out of iterations.
class RelaxError : public NumericalError {
 public:
  RelaxError(const std::string& what, std::vector<double> last_iterate, double grad_norm)
      : NumericalError(what), last_iterate_(std::move(last_iterate)), grad_norm_(grad_norm) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
  double grad_norm() const noexcept { return grad_norm_; }

 private:
  std::vector<double> last_iterate_;
  double grad_norm_;
};

/// Relaxation converged to a stationary point that is not a strict minimum,
/// or left the topological sector of its seed.
class SaddleError : public NumericalError {
 public:
  SaddleError(const std::string& what, double min_eigenvalue)
      : NumericalError(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class SectorError : public NumericalError {
 public:
  SectorError(const std::string& what, int seed_sector, int result_sector)
      : NumericalError(what), seed_sector_(seed_sector), result_sector_(result_sector) {}
  int seed_sector() const noexcept { return seed_sector_; }
  int result_sector() const noexcept { return result_sector_; }

 private:
  int seed_sector_;
  int result_sector_;
};

}  // namespace kinkcoh
