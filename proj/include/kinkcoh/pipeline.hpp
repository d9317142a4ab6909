#pragma once
// Staged, file-based pipeline: seed -> relax -> modes -> couplings ->
// classical / quantum. Every stage reads its inputs from the output
// directory, writes its artifacts there and records itself in
// manifest.json, so an unchanged stage is skipped on the next run.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kinkcoh/classical.hpp"
#include "kinkcoh/couplings.hpp"
#include "kinkcoh/equilibrium.hpp"
#include "kinkcoh/io.hpp"
#include "kinkcoh/lattice.hpp"
#include "kinkcoh/modes.hpp"
#include "kinkcoh/quantum.hpp"

namespace kinkcoh {

/// Stage names in execution order.
const std::vector<std::string>& stage_names();

struct ClassicalStageConfig {
  /// dt <= 0 means (2 pi / omega_max) / 50.
  double dt = 0.0;
  /// Run length in periods of the high mode; used when steps == 0.
  double periods = 100.0;
  long steps = 0;
  long record_every = 1;
  double hbar = 1.9e-5;
  double temperature = 0.0;
  std::uint64_t rng_seed = 0;
  /// Phonon counts keyed by mode index or by role ("high", "low").
  std::vector<std::pair<std::string, double>> mode_overrides;
  bool sample_occupations = false;
  /// Running-mean window of the mode energies, in high-mode periods.
  double window_periods = 10.0;
};

struct QuantumStageConfig {
  double hbar = 1.9e-5;
  double temperature = 0.5;
  /// Fock truncation of the high and the low mode.
  std::vector<int> dims{7, 7};
  /// dt <= 0 means pi / (10 omega_max).
  double dt = 0.0;
  /// Run length in Rabi periods of the renormalized high mode.
  double periods = 25.0;
  double tau_c = 15.0;
  std::vector<Variant> variants{Variant::FullTwoMode, Variant::TruncatedKernel, Variant::LowModeInBath};
  int low_fock = 2;
  long record_every = 1;
};

struct RunConfig {
  ModelSpec model;
  /// 1-based kink centre of the continuum seed; negative means (N+1)/2.
  double seed_center = -1.0;
  RelaxOptions relax;
  double gap_factor = 3.0;
  CouplingOptions couplings;
  ClassicalStageConfig classical;
  QuantumStageConfig quantum;
  std::filesystem::path output_dir = "out";
  std::vector<std::string> stages;
  /// Normalized document with every default filled in; stage keys hash
  /// the sections of this document.
  io::Json resolved;
};

/// Strict parser: unknown keys and ill-typed values throw ConfigError with
/// the dotted key path. Relative output_dir entries are resolved against
/// base_dir.
RunConfig parse_config(const io::Json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// The high (internal) and low (translational) system modes: the two
/// lowest-frequency modes that are not end modes.
struct ModeRoles {
  int high = -1;
  int low = -1;
};
ModeRoles mode_roles(const ModeBasis& basis);

struct RunOptions {
  bool force = false;
  /// Restrict execution to these stages (still in pipeline order).
  std::vector<std::string> only;
  std::optional<std::filesystem::path> output_dir;
  /// Replaces classical.rng_seed.
  std::optional<std::uint64_t> seed_override;
};

struct StageOutcome {
  std::string name;
  /// "ran" or "skipped".
  std::string status;
  double seconds = 0.0;
};

/// Runs the configured stages. A stage failure is recorded in the manifest
/// with status "failed" and rethrown; artifacts written so far are kept.
std::vector<StageOutcome> run_pipeline(RunConfig config, const RunOptions& options, std::ostream* log = nullptr);

/// One master-equation run on the system selected by `roles`: variants A
/// and B treat both modes as the system, C only the high mode. dt and the
/// step count are resolved from the config and the spectrum.
struct QuantumResult {
  Variant variant = Variant::FullTwoMode;
  SystemDef def;
  RenormConstants renorm;
  double dt = 0.0;
  long steps = 0;
  /// Rabi frequency of the reference, the renormalized high-mode frequency.
  double omega_ref = 0.0;
  double ground_energy = 0.0;
  MasterRun run;
  std::vector<FidelityPoint> fidelity;
  /// Schroedinger-picture state at the last record.
  CMatrix final_rho;
};
QuantumResult run_quantum_variant(const CouplingTensors& tensors, const ModeRoles& roles,
                                  const QuantumStageConfig& config, Variant variant);

/// ModelSpec <-> the "model" section (kind, n, g, a0, k, g0, s, boundary).
io::Json model_to_json(const ModelSpec& spec);
ModelSpec model_from_json(const io::Json& doc);

/// Human-readable summary of an artifact directory. Hash mismatches
/// against the manifest are reported as warnings in the text; a missing
/// or unreadable manifest throws IoError.
std::string report(const std::filesystem::path& artifact_dir);

/// First t/T at which the series drops below the threshold, if ever.
std::optional<double> fidelity_milestone(const std::vector<FidelityPoint>& series, double threshold);

}  // namespace kinkcoh
