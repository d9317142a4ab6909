#include "kinkcoh/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "kinkcoh/errors.hpp"

namespace kinkcoh {
namespace fs = std::filesystem;
using io::Json;

namespace {

constexpr const char* kManifest = "manifest.json";

std::string seconds_text(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f s", s);
  return buf;
}

std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Strict view of one JSON object: every key must be consumed before
// finish(), otherwise the first unknown one is reported.
class Section {
 public:
  Section(const Json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_ && j_->contains(key); }
  std::string path(const std::string& key) const { return join_key(path_, key); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    return j_->at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path(key) + ": must be finite");
    return d;
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    return v.get<std::string>();
  }

  Section child(const std::string& key) {
    if (!has(key)) return Section(nullptr, path(key));
    return Section(&raw(key), path(key));
  }

  void finish() const {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown key");
    }
  }

 private:
  const Json* j_;
  std::string path_;
  std::set<std::string> used_;
};

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw ConfigError(what + ": must be positive");
}

ModelSpec parse_model(Section sec) {
  ModelSpec spec;
  const std::string kind = sec.string("kind", "");
  if (kind == "phi4") {
    spec.kind = ModelKind::Phi4;
  } else if (kind == "sine_gordon") {
    spec.kind = ModelKind::SineGordon;
  } else {
    throw ConfigError(sec.path("kind") + ": expected \"phi4\" or \"sine_gordon\"");
  }
  const long long n = sec.integer("n", 0);
  if (n < 3) throw ConfigError(sec.path("n") + ": need at least 3 particles");
  spec.n_particles = static_cast<std::size_t>(n);

  const bool sg = spec.kind == ModelKind::SineGordon;
  spec.boundary = sg ? Boundary::PeriodicWinding : Boundary::FixedEnds;
  spec.lattice_const = sg ? 2.0 * std::numbers::pi : 0.0;

  if (sec.has("g") == sec.has("g_profile")) {
    throw ConfigError(sec.path("g") + ": give exactly one of g and g_profile");
  }
  if (sec.has("g")) {
    const Json& g = sec.raw("g");
    if (g.is_number()) {
      spec.couplings = constant_profile(spec.n_particles, g.get<double>());
    } else if (g.is_array()) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i].is_number()) throw ConfigError(sec.path("g") + "[" + std::to_string(i) + "]: expected a number");
        spec.couplings.push_back(g[i].get<double>());
      }
    } else {
      throw ConfigError(sec.path("g") + ": expected a number or an array of N-1 numbers");
    }
  } else {
    Section prof = sec.child("g_profile");
    const std::string type = prof.string("type", "");
    const double base = prof.number("base", -1.0);
    if (base < 0.0) throw ConfigError(prof.path("base") + ": required, non-negative");
    if (type == "constant") {
      spec.couplings = constant_profile(spec.n_particles, base);
    } else if (type == "gaussian_well") {
      const double depth = prof.number("depth", 0.0);
      const double width = prof.number("width", 0.0);
      const double center = prof.number("center", -1.0);
      spec.couplings = gaussian_well_profile(spec.n_particles, base, depth, width, center);
    } else {
      throw ConfigError(prof.path("type") + ": expected \"constant\" or \"gaussian_well\"");
    }
    prof.finish();
  }

  spec.lattice_const = sec.number("a0", spec.lattice_const);
  spec.substrate_k = sec.number("k", spec.substrate_k);
  spec.end_stiffness = sec.number("g0", 0.0);
  spec.topo_charge = static_cast<int>(sec.integer("s", 1));
  if (sec.has("boundary")) {
    const std::string b = sec.string("boundary", "");
    if (b == "fixed_ends") {
      spec.boundary = Boundary::FixedEnds;
    } else if (b == "periodic_winding") {
      spec.boundary = Boundary::PeriodicWinding;
    } else {
      throw ConfigError(sec.path("boundary") + ": expected \"fixed_ends\" or \"periodic_winding\"");
    }
  }
  sec.finish();
  validate(spec);
  return spec;
}

Variant parse_variant(const Json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a variant name");
  const std::string s = v.get<std::string>();
  for (Variant x : {Variant::FullTwoMode, Variant::TruncatedKernel, Variant::LowModeInBath}) {
    if (s == variant_label(x) || s == to_string(x)) return x;
  }
  throw ConfigError(where + ": unknown variant \"" + s + "\" (A, B or C)");
}

ClassicalStageConfig parse_classical(Section sec) {
  ClassicalStageConfig c;
  c.dt = sec.number("dt", c.dt);
  c.periods = sec.number("periods", c.periods);
  c.steps = sec.integer("steps", c.steps);
  c.record_every = sec.integer("record_every", c.record_every);
  c.hbar = sec.number("hbar", c.hbar);
  c.temperature = sec.number("temperature", c.temperature);
  c.rng_seed = sec.unsigned_integer("rng_seed", c.rng_seed);
  c.sample_occupations = sec.boolean("sample_occupations", c.sample_occupations);
  c.window_periods = sec.number("window_periods", c.window_periods);
  if (sec.has("mode_overrides")) {
    const Json& o = sec.raw("mode_overrides");
    if (!o.is_object()) throw ConfigError(sec.path("mode_overrides") + ": expected an object");
    for (auto it = o.begin(); it != o.end(); ++it) {
      const std::string where = sec.path("mode_overrides") + "." + it.key();
      if (!it.value().is_number() || it.value().get<double>() < 0.0) {
        throw ConfigError(where + ": expected a non-negative phonon count");
      }
      const std::string& k = it.key();
      const bool role = k == "high" || k == "low";
      if (!role && (k.empty() || k.find_first_not_of("0123456789") != std::string::npos || k == "0")) {
        throw ConfigError(where + ": key must be \"high\", \"low\" or a 1-based mode index");
      }
      c.mode_overrides.emplace_back(k, it.value().get<double>());
    }
  }
  sec.finish();
  if (c.steps < 0) throw ConfigError(sec.path("steps") + ": must be non-negative");
  if (c.steps == 0) require_positive(c.periods, sec.path("periods"));
  if (c.record_every < 1) throw ConfigError(sec.path("record_every") + ": must be at least 1");
  require_positive(c.hbar, sec.path("hbar"));
  require_positive(c.window_periods, sec.path("window_periods"));
  if (c.temperature < 0.0) throw ConfigError(sec.path("temperature") + ": must be non-negative");
  return c;
}

QuantumStageConfig parse_quantum(Section sec) {
  QuantumStageConfig q;
  q.hbar = sec.number("hbar", q.hbar);
  q.temperature = sec.number("temperature", q.temperature);
  if (sec.has("dims")) {
    const Json& d = sec.raw("dims");
    if (d.is_number_integer()) {
      q.dims = {d.get<int>(), d.get<int>()};
    } else if (d.is_array() && d.size() == 2 && d[0].is_number_integer() && d[1].is_number_integer()) {
      q.dims = {d[0].get<int>(), d[1].get<int>()};
    } else {
      throw ConfigError(sec.path("dims") + ": expected an integer or two integers");
    }
  }
  q.dt = sec.number("dt", q.dt);
  q.periods = sec.number("periods", q.periods);
  q.tau_c = sec.number("tau_c", q.tau_c);
  q.low_fock = static_cast<int>(sec.integer("low_fock", q.low_fock));
  q.record_every = sec.integer("record_every", q.record_every);
  if (sec.has("variants")) {
    const Json& v = sec.raw("variants");
    if (!v.is_array() || v.empty()) throw ConfigError(sec.path("variants") + ": expected a non-empty array");
    q.variants.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Variant x = parse_variant(v[i], sec.path("variants") + "[" + std::to_string(i) + "]");
      if (std::find(q.variants.begin(), q.variants.end(), x) != q.variants.end()) {
        throw ConfigError(sec.path("variants") + ": duplicate variant " + variant_label(x));
      }
      q.variants.push_back(x);
    }
  }
  sec.finish();
  require_positive(q.hbar, sec.path("hbar"));
  require_positive(q.periods, sec.path("periods"));
  require_positive(q.tau_c, sec.path("tau_c"));
  if (q.temperature < 0.0) throw ConfigError(sec.path("temperature") + ": must be non-negative");
  for (int d : q.dims) {
    if (d < 2) throw ConfigError(sec.path("dims") + ": every truncation must be at least 2");
  }
  if (q.low_fock < 0 || q.low_fock >= q.dims[1]) {
    throw ConfigError(sec.path("low_fock") + ": must lie below the low-mode truncation");
  }
  if (q.record_every < 1) throw ConfigError(sec.path("record_every") + ": must be at least 1");
  return q;
}

Json classical_to_json(const ClassicalStageConfig& c) {
  Json overrides = Json::object();
  for (const auto& [k, n] : c.mode_overrides) overrides[k] = n;
  return Json{{"dt", c.dt},
              {"periods", c.periods},
              {"steps", c.steps},
              {"record_every", c.record_every},
              {"hbar", c.hbar},
              {"temperature", c.temperature},
              {"rng_seed", c.rng_seed},
              {"mode_overrides", overrides},
              {"sample_occupations", c.sample_occupations},
              {"window_periods", c.window_periods}};
}

Json quantum_to_json(const QuantumStageConfig& q) {
  Json variants = Json::array();
  for (Variant v : q.variants) variants.push_back(variant_label(v));
  return Json{{"hbar", q.hbar},     {"temperature", q.temperature}, {"dims", q.dims},
              {"dt", q.dt},         {"periods", q.periods},         {"tau_c", q.tau_c},
              {"variants", variants}, {"low_fock", q.low_fock},     {"record_every", q.record_every}};
}

void refresh_resolved(RunConfig& c) {
  c.resolved = Json{{"model", model_to_json(c.model)},
                    {"seed", {{"center", c.seed_center}}},
                    {"relax", {{"tol", c.relax.tol}, {"max_iters", c.relax.max_iters}}},
                    {"modes", {{"gap_factor", c.gap_factor}}},
                    {"couplings", {{"threshold3", c.couplings.threshold3}, {"threshold4", c.couplings.threshold4}}},
                    {"classical", classical_to_json(c.classical)},
                    {"quantum", quantum_to_json(c.quantum)},
                    {"output_dir", c.output_dir.string()},
                    {"stages", c.stages}};
}

// ---------------------------------------------------------------- artifacts

struct StageSpec {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> sections;
};

const std::vector<StageSpec>& stage_table() {
  static const std::vector<StageSpec> table = {
      {"seed", {}, {"model", "seed"}},
      {"relax", {"seed.json"}, {"model", "relax"}},
      {"modes", {"equilibrium.json"}, {"model", "modes"}},
      {"couplings", {"equilibrium.json", "modes.json"}, {"model", "couplings"}},
      {"classical", {"equilibrium.json", "modes.json"}, {"model", "classical"}},
      {"quantum", {"modes.json", "couplings.bin"}, {"quantum"}},
  };
  return table;
}

// Stage producing each input file.
std::string producer_of(const std::string& file) {
  if (file == "seed.json") return "seed";
  if (file == "equilibrium.json") return "relax";
  if (file == "modes.json") return "modes";
  return "couplings";
}

struct StageContext {
  const RunConfig& cfg;
  fs::path dir;
  std::ostream* log;
  std::vector<std::string> outputs;

  fs::path path(const std::string& name) const { return dir / name; }
  void json(const std::string& name, const Json& doc) {
    io::write_json(path(name), doc);
    outputs.push_back(name);
  }
  void csv(const std::string& name, const io::Csv& table) {
    table.save(path(name));
    outputs.push_back(name);
  }
  void note(const std::string& msg) const {
    if (log) *log << "  " << msg << "\n";
  }
};

Json read_artifact(const fs::path& dir, const std::string& name) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) throw IoError("missing artifact " + p.string());
  return io::read_json(p);
}

Eigen::VectorXd load_equilibrium(const fs::path& dir) {
  const Json j = read_artifact(dir, "equilibrium.json");
  if (!j.contains("positions")) throw IoError("equilibrium.json: no positions");
  return io::vector_from_json(j["positions"], "equilibrium.json positions");
}

ModeBasis load_modes(const fs::path& dir, ModeRoles* roles = nullptr) {
  const Json j = read_artifact(dir, "modes.json");
  ModeBasis b;
  try {
    b.freqs = io::vector_from_json(j.at("freqs"), "modes.json freqs");
    b.vectors = io::matrix_from_json(j.at("vectors"), "modes.json vectors");
    b.participation = io::vector_from_json(j.at("participation"), "modes.json participation");
    b.parity = io::vector_from_json(j.at("parity"), "modes.json parity");
    for (const auto& e : j.at("is_end")) b.is_end.push_back(e.get<bool>());
    for (const auto& e : j.at("localized")) b.localized.push_back(e.get<int>() - 1);
    if (roles) {
      roles->high = j.at("roles").at("high").get<int>() - 1;
      roles->low = j.at("roles").at("low").get<int>() - 1;
    }
  } catch (const Json::exception& e) {
    throw IoError(std::string("modes.json: malformed (") + e.what() + ")");
  }
  if (b.vectors.rows() != b.freqs.size() || b.vectors.cols() != b.freqs.size()) {
    throw IoError("modes.json: vector matrix does not match the spectrum");
  }
  return b;
}

Json modes_json(const ModeBasis& b, const BandInfo& band, const ModeRoles& roles) {
  Json localized = Json::array();
  for (int j : b.localized) localized.push_back(j + 1);
  Json is_end = Json::array();
  for (bool e : b.is_end) is_end.push_back(e);
  return Json{{"n_modes", b.size()},
              {"freqs", io::to_json(b.freqs)},
              {"participation", io::to_json(b.participation)},
              {"parity", io::to_json(b.parity)},
              {"is_end", is_end},
              {"localized", localized},
              {"band",
               {{"bottom", band.bottom},
                {"top", band.top},
                {"median_spacing", band.median_spacing},
                {"band_size", band.band_size}}},
              {"roles", {{"high", roles.high + 1}, {"low", roles.low + 1}}},
              {"vectors", io::to_json(b.vectors)}};
}

double max_frequency(const CouplingTensors& t) {
  return std::sqrt(t.omega2.maxCoeff());
}

// ---------------------------------------------------------------- stages

void stage_seed(StageContext& ctx) {
  const ModelSpec& spec = ctx.cfg.model;
  const double center = ctx.cfg.seed_center < 0.0 ? 0.5 * (static_cast<double>(spec.size()) + 1.0)
                                                  : ctx.cfg.seed_center;
  const Eigen::VectorXd x = continuum_seed(spec, center);
  ctx.json("seed.json", Json{{"center", center},
                             {"sector", topological_sector(spec, x)},
                             {"energy", potential_energy(spec, x)},
                             {"positions", io::to_json(x)}});
}

void stage_relax(StageContext& ctx) {
  const Json seed = read_artifact(ctx.dir, "seed.json");
  const Eigen::VectorXd x0 = io::vector_from_json(seed.at("positions"), "seed.json positions");
  std::vector<double> trace;
  const Equilibrium eq = relax(ctx.cfg.model, x0, ctx.cfg.relax, &trace);
  ctx.note("relaxed in " + std::to_string(eq.iterations) + " iterations, |grad| = " + io::format_double(eq.grad_norm));
  ctx.json("equilibrium.json", Json{{"energy", eq.energy},
                                    {"grad_norm", eq.grad_norm},
                                    {"min_hessian_eig", eq.min_hessian_eig},
                                    {"iterations", eq.iterations},
                                    {"tolerance", eq.tolerance},
                                    {"sector", eq.sector},
                                    {"positions", io::to_json(eq.positions)}});
  io::Csv csv({"iteration", "energy"});
  for (std::size_t i = 0; i < trace.size(); ++i) csv.cell(static_cast<long long>(i)).cell(trace[i]).end_row();
  ctx.csv("relax_trace.csv", csv);
}

void stage_modes(StageContext& ctx) {
  const Eigen::VectorXd x = load_equilibrium(ctx.dir);
  const DerivativeBundle d = derivatives(ctx.cfg.model, x);
  ModeBasis basis = normal_modes(d.hessian);
  BandInfo band;
  classify(basis, ctx.cfg.gap_factor, &band);
  const ModeRoles roles = mode_roles(basis);
  ctx.json("modes.json", modes_json(basis, band, roles));

  io::Csv spectrum({"mode_index", "freq", "participation", "is_localized", "is_end"});
  for (int j = 0; j < basis.size(); ++j) {
    spectrum.cell(j + 1)
        .cell(basis.freqs[j])
        .cell(basis.participation[j])
        .cell(basis.is_localized(j) ? 1 : 0)
        .cell(basis.is_end[static_cast<std::size_t>(j)] ? 1 : 0)
        .end_row();
  }
  ctx.csv("spectrum.csv", spectrum);

  std::vector<std::string> header{"site", "x_eq"};
  for (int j = 0; j < basis.size(); ++j) header.push_back("mode_" + std::to_string(j + 1));
  io::Csv profiles(header);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    profiles.cell(static_cast<long long>(i + 1)).cell(x[i]);
    for (int j = 0; j < basis.size(); ++j) profiles.cell(basis.vectors(i, j));
    profiles.end_row();
  }
  ctx.csv("profiles.csv", profiles);

  io::Csv res({"signature", "mode_index", "detuning"});
  if (roles.high >= 0 && roles.low >= 0) {
    for (const Resonance& r : resonances(basis, roles.high, roles.low)) {
      res.cell(r.signature).cell(r.mode_index + 1).cell(r.detuning).end_row();
    }
  }
  ctx.csv("resonances.csv", res);
  ctx.note("high mode " + std::to_string(roles.high + 1) + " (omega " + io::format_double(basis.freqs[roles.high]) +
           "), low mode " + std::to_string(roles.low + 1) + " (omega " + io::format_double(basis.freqs[roles.low]) +
           ")");
}

Json strongest(const std::vector<CouplingTensors::Entry>& entries, int order, std::size_t count) {
  std::vector<CouplingTensors::Entry> sorted = entries;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
  Json out = Json::array();
  for (std::size_t i = 0; i < std::min(count, sorted.size()); ++i) {
    Json idx = Json::array();
    if (order == 3) {
      for (int m : unpack_key3(sorted[i].first)) idx.push_back(m + 1);
    } else {
      for (int m : unpack_key4(sorted[i].first)) idx.push_back(m + 1);
    }
    out.push_back(Json{{"modes", idx}, {"value", sorted[i].second}});
  }
  return out;
}

void save_slice(StageContext& ctx, const CouplingTensors& t, int mode, int order, const std::string& name) {
  const Eigen::MatrixXd s = coupling_slice(t, mode, order);
  io::Csv csv({"j", "k", "value"});
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    for (Eigen::Index k = 0; k < s.cols(); ++k) {
      csv.cell(static_cast<long long>(j + 1)).cell(static_cast<long long>(k + 1)).cell(s(j, k)).end_row();
    }
  }
  ctx.csv(name, csv);
}

void stage_couplings(StageContext& ctx) {
  const Eigen::VectorXd x = load_equilibrium(ctx.dir);
  ModeRoles roles;
  const ModeBasis basis = load_modes(ctx.dir, &roles);
  const CouplingTensors t = transform(derivatives(ctx.cfg.model, x), basis, ctx.cfg.couplings);
  write_couplings_binary(t, ctx.path("couplings.bin"));
  ctx.outputs.push_back("couplings.bin");
  ctx.json("couplings.json", Json{{"n_modes", t.n_modes},
                                  {"threshold3", t.threshold3},
                                  {"threshold4", t.threshold4},
                                  {"n_cubic", t.third.size()},
                                  {"n_quartic", t.fourth.size()},
                                  {"strongest_cubic", strongest(t.third, 3, 10)},
                                  {"strongest_quartic", strongest(t.fourth, 4, 10)}});
  for (const auto& [mode, label] : {std::pair{roles.high, "high"}, std::pair{roles.low, "low"}}) {
    if (mode < 0) continue;
    save_slice(ctx, t, mode, 3, std::string("slice_cubic_") + label + ".csv");
    save_slice(ctx, t, mode, 4, std::string("slice_quartic_") + label + ".csv");
  }
  ctx.note(std::to_string(t.third.size()) + " cubic and " + std::to_string(t.fourth.size()) + " quartic entries");
}

// Least-squares slope of y against its sample index.
double secular_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  if (y.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double xi = static_cast<double>(i);
    sx += xi;
    sy += y[i];
    sxx += xi * xi;
    sxy += xi * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Json peak_json(const Spectrum& s, std::size_t count) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 1; k + 1 < s.magnitude.size(); ++k) {
    if (s.magnitude[k] > s.magnitude[k - 1] && s.magnitude[k] >= s.magnitude[k + 1]) idx.push_back(k);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.magnitude[a] > s.magnitude[b]; });
  Json out = Json::array();
  for (std::size_t i = 0; i < std::min(count, idx.size()); ++i) {
    out.push_back(Json{{"omega", s.omega[idx[i]]}, {"magnitude", s.magnitude[idx[i]]}});
  }
  return out;
}

void stage_classical(StageContext& ctx) {
  const ClassicalStageConfig& c = ctx.cfg.classical;
  const Eigen::VectorXd x = load_equilibrium(ctx.dir);
  ModeRoles roles;
  const ModeBasis basis = load_modes(ctx.dir, &roles);
  if (roles.high < 0 || roles.low < 0) throw ConfigError("classical: need a high and a low mode");

  SimConfig sim;
  const double w_high = basis.freqs[roles.high];
  const double t_min = 2.0 * std::numbers::pi / basis.freqs[0];
  sim.dt = c.dt > 0.0 ? c.dt : t_min / 50.0;
  sim.steps = c.steps > 0 ? c.steps : std::lround(c.periods * 2.0 * std::numbers::pi / w_high / sim.dt);
  sim.record_every = c.record_every;
  sim.hbar = c.hbar;
  sim.temperature = c.temperature;
  sim.rng_seed = c.rng_seed;
  sim.sample_occupations = c.sample_occupations;
  for (const auto& [key, n] : c.mode_overrides) {
    const int mode = key == "high" ? roles.high : key == "low" ? roles.low : std::stoi(key) - 1;
    if (mode < 0 || mode >= basis.size()) throw ConfigError("classical.mode_overrides." + key + ": no such mode");
    sim.mode_overrides[mode] = n;
  }

  const ChainState initial = thermal_state(basis, x, sim);
  const Eigen::VectorXd lh = basis.vectors.col(roles.high);
  const Eigen::VectorXd ll = basis.vectors.col(roles.low);
  const double w_low = basis.freqs[roles.low];
  std::vector<double> t, etot, th, thd, tl, tld, eh, el;
  integrate_streaming(ctx.cfg.model, initial, sim, [&](long step, const ChainState& s) {
    const Eigen::VectorXd dx = s.positions - x;
    t.push_back(static_cast<double>(step) * sim.dt);
    etot.push_back(total_energy(ctx.cfg.model, s));
    th.push_back(lh.dot(dx));
    thd.push_back(lh.dot(s.velocities));
    tl.push_back(ll.dot(dx));
    tld.push_back(ll.dot(s.velocities));
    eh.push_back(0.5 * (thd.back() * thd.back() + w_high * w_high * th.back() * th.back()));
    el.push_back(0.5 * (tld.back() * tld.back() + w_low * w_low * tl.back() * tl.back()));
  });

  const double sample_dt = sim.dt * static_cast<double>(sim.record_every);
  const auto window = static_cast<std::size_t>(
      std::max(1.0, std::round(c.window_periods * 2.0 * std::numbers::pi / w_high / sample_dt)));
  const std::vector<double> eh_mean = running_mean(eh, window);
  const std::vector<double> el_mean = running_mean(el, window);

  io::Csv energy({"t", "total_energy", "E_high", "E_low", "E_high_mean", "E_low_mean"});
  io::Csv phase({"t", "theta_high", "theta_dot_high", "theta_low", "theta_dot_low"});
  for (std::size_t i = 0; i < t.size(); ++i) {
    energy.cell(t[i]).cell(etot[i]).cell(eh[i]).cell(el[i]).cell(eh_mean[i]).cell(el_mean[i]).end_row();
    phase.cell(t[i]).cell(th[i]).cell(thd[i]).cell(tl[i]).cell(tld[i]).end_row();
  }
  ctx.csv("classical_energy.csv", energy);
  ctx.csv("classical_phase.csv", phase);

  // The DFT needs an even number of samples; the last one is dropped if not.
  Json peaks = Json::object();
  for (const auto& [series, label] : {std::pair{&th, "high"}, std::pair{&tl, "low"}}) {
    std::vector<double> v = *series;
    if (v.size() % 2) v.pop_back();
    if (v.size() < 4) continue;
    const Spectrum s = dft(v, sample_dt * static_cast<double>(v.size()));
    io::Csv csv({"omega", "magnitude"});
    for (std::size_t k = 0; k < s.omega.size(); ++k) csv.cell(s.omega[k]).cell(s.magnitude[k]).end_row();
    ctx.csv(std::string("dft_") + label + ".csv", csv);
    peaks[label] = peak_json(s, 5);
  }

  const double e0 = etot.front();
  double fluct = 0.0;
  for (double e : etot) fluct = std::max(fluct, std::abs(e - e0));
  const double duration = t.back() - t.front();
  const double drift = secular_slope(etot) * static_cast<double>(etot.size() - 1) / std::abs(e0);
  ctx.json("classical.json", Json{{"dt", sim.dt},
                                  {"steps", sim.steps},
                                  {"record_every", sim.record_every},
                                  {"duration", duration},
                                  {"rng_seed", sim.rng_seed},
                                  {"high_mode", roles.high + 1},
                                  {"low_mode", roles.low + 1},
                                  {"initial_energy", e0},
                                  {"relative_drift", drift},
                                  {"max_relative_fluctuation", fluct / std::abs(e0)},
                                  {"peaks", peaks}});
  ctx.note("energy drift " + io::format_double(drift) + " over " + std::to_string(sim.steps) + " steps");
}

Json renorm_json(const RenormConstants& r) {
  return Json{{"nu", io::to_json(r.nu)},
              {"xi", io::to_json(r.xi)},
              {"nu12", r.nu12},
              {"bare_freqs", io::to_json(r.bare_freqs)},
              {"shifted_freqs", io::to_json(r.shifted_freqs)},
              {"displacement", io::to_json(r.displacement)},
              {"energy_offset", r.energy_offset}};
}

Json milestones_json(const std::vector<FidelityPoint>& f) {
  Json out = Json::object();
  for (const auto& [thr, key] : {std::pair{0.99, "below_0.99"}, std::pair{0.9, "below_0.9"}}) {
    const auto m = fidelity_milestone(f, thr);
    out[key] = m ? Json(*m) : Json(nullptr);
  }
  double lo = 1.0;
  for (const auto& p : f) lo = std::min(lo, p.fidelity);
  out["min_fidelity"] = lo;
  out["final_t_over_period"] = f.empty() ? 0.0 : f.back().t_over_period;
  return out;
}

void stage_quantum(StageContext& ctx) {
  const QuantumStageConfig& q = ctx.cfg.quantum;
  ModeRoles roles;
  load_modes(ctx.dir, &roles);
  if (roles.high < 0 || roles.low < 0) throw ConfigError("quantum: need a high and a low mode");
  const CouplingTensors t = read_couplings_binary(ctx.dir / "couplings.bin");

  Json summary = Json::object();
  Json renorm = Json::object();
  bool correlations_written = false;
  for (Variant v : q.variants) {
    const std::string label = variant_label(v);
    ctx.note("variant " + label + " (" + to_string(v) + ")");
    const QuantumResult r = run_quantum_variant(t, roles, q, v);

    io::Csv fcsv({"t_over_rabi_period", "fidelity", "variant"});
    for (const auto& p : r.fidelity) fcsv.cell(p.t_over_period).cell(p.fidelity).cell(label).end_row();
    ctx.csv("fidelity_" + label + ".csv", fcsv);

    const CMatrix& rho = r.final_rho;
    Json re = Json::array(), im = Json::array();
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
      for (Eigen::Index j = 0; j < rho.cols(); ++j) {
        re.push_back(rho(i, j).real());
        im.push_back(rho(i, j).imag());
      }
    }
    ctx.json("rho_" + label + ".json", Json{{"dims", r.def.dims}, {"t", r.run.times.back()}, {"re", re}, {"im", im}});

    const std::string rkey = r.def.sys_modes.size() == 2 ? "two_mode" : "one_mode";
    if (!renorm.contains(rkey)) renorm[rkey] = renorm_json(r.renorm);

    if (!correlations_written && r.def.sys_modes.size() == 2) {
      const BathModel bath = build_bath(t, r.def);
      const FockOperators ops = build_fock_operators(r.def);
      const std::vector<CMatrix> table = correlation_table(bath, r.dt, static_cast<std::size_t>(r.steps + 1));
      io::Csv ccsv({"tau", "pair", "re", "im"});
      for (std::size_t s = 0; s < table.size(); s += static_cast<std::size_t>(q.record_every)) {
        for (int a = 0; a < bath.n_ops(); ++a) {
          for (int b = a; b < bath.n_ops(); ++b) {
            ccsv.cell(static_cast<double>(s) * r.dt)
                .cell(ops.labels[static_cast<std::size_t>(a)] + "|" + ops.labels[static_cast<std::size_t>(b)])
                .cell(table[s](a, b).real())
                .cell(table[s](a, b).imag())
                .end_row();
          }
        }
      }
      ctx.csv("correlation.csv", ccsv);
      correlations_written = true;
    }

    Json warnings = Json::array();
    for (const auto& w : r.run.warnings) warnings.push_back(w);
    summary[label] = Json{{"variant", to_string(v)},
                          {"sys_modes", Json::array()},
                          {"dims", r.def.dims},
                          {"dt", r.dt},
                          {"steps", r.steps},
                          {"omega_ref", r.omega_ref},
                          {"ground_energy", r.ground_energy},
                          {"max_trace_error", r.run.max_trace_error},
                          {"max_hermiticity_error", r.run.max_hermiticity_error},
                          {"min_eigenvalue", r.run.min_eigenvalue},
                          {"warnings", warnings},
                          {"milestones", milestones_json(r.fidelity)}};
    for (int m : r.def.sys_modes) summary[label]["sys_modes"].push_back(m + 1);
    for (const auto& w : r.run.warnings) ctx.note("warning: " + w);
  }
  ctx.json("renorm.json", renorm);
  ctx.json("quantum.json", summary);
}

using StageFn = void (*)(StageContext&);
StageFn stage_function(const std::string& name) {
  static const std::map<std::string, StageFn> fns = {
      {"seed", stage_seed},           {"relax", stage_relax},         {"modes", stage_modes},
      {"couplings", stage_couplings}, {"classical", stage_classical}, {"quantum", stage_quantum},
  };
  return fns.at(name);
}

std::string stage_key(const RunConfig& cfg, const StageSpec& st, const fs::path& dir) {
  std::string material = std::string("kinkcoh ") + KINKCOH_VERSION + "\nstage " + st.name + "\n";
  for (const auto& sec : st.sections) material += sec + " " + io::dump_json(cfg.resolved.at(sec), 0);
  for (const auto& in : st.inputs) material += in + " " + io::sha256_file(dir / in) + "\n";
  return io::sha256_hex(material);
}

bool stage_current(const Json& manifest, const StageSpec& st, const std::string& key, const fs::path& dir) {
  if (!manifest.contains("stages") || !manifest["stages"].contains(st.name)) return false;
  const Json& e = manifest["stages"][st.name];
  if (e.value("status", "") != "ok" || e.value("key", "") != key || !e.contains("outputs")) return false;
  for (auto it = e["outputs"].begin(); it != e["outputs"].end(); ++it) {
    const fs::path p = dir / it.key();
    if (!fs::exists(p) || io::sha256_file(p) != it.value().get<std::string>()) return false;
  }
  return true;
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& s : stage_table()) out.push_back(s.name);
    return out;
  }();
  return names;
}

io::Json model_to_json(const ModelSpec& spec) {
  return Json{{"kind", to_string(spec.kind)},
              {"n", spec.n_particles},
              {"g", spec.couplings},
              {"a0", spec.lattice_const},
              {"k", spec.substrate_k},
              {"g0", spec.resolved_end_stiffness()},
              {"s", spec.topo_charge},
              {"boundary", to_string(spec.boundary)}};
}

ModelSpec model_from_json(const io::Json& doc) { return parse_model(Section(&doc, "model")); }

RunConfig parse_config(const io::Json& doc, const fs::path& base_dir) {
  Section root(&doc, "");
  RunConfig c;
  if (!root.has("model")) throw ConfigError("model: required section");
  c.model = parse_model(root.child("model"));

  Section seed = root.child("seed");
  c.seed_center = seed.number("center", c.seed_center);
  seed.finish();

  Section rel = root.child("relax");
  c.relax.tol = rel.number("tol", c.relax.tol);
  c.relax.max_iters = static_cast<int>(rel.integer("max_iters", c.relax.max_iters));
  rel.finish();
  require_positive(c.relax.tol, "relax.tol");
  if (c.relax.max_iters < 1) throw ConfigError("relax.max_iters: must be at least 1");

  Section modes = root.child("modes");
  c.gap_factor = modes.number("gap_factor", c.gap_factor);
  modes.finish();
  if (!(c.gap_factor > 1.0)) throw ConfigError("modes.gap_factor: must exceed 1");

  Section coup = root.child("couplings");
  c.couplings.threshold3 = coup.number("threshold3", c.couplings.threshold3);
  c.couplings.threshold4 = coup.number("threshold4", c.couplings.threshold4);
  coup.finish();

  c.classical = parse_classical(root.child("classical"));
  c.quantum = parse_quantum(root.child("quantum"));

  const fs::path out = root.string("output_dir", "out");
  c.output_dir = out.is_absolute() || base_dir.empty() ? out : base_dir / out;

  if (root.has("stages")) {
    const Json& s = root.raw("stages");
    if (!s.is_array()) throw ConfigError("stages: expected an array of stage names");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::string where = "stages[" + std::to_string(i) + "]";
      if (!s[i].is_string()) throw ConfigError(where + ": expected a stage name");
      const std::string name = s[i].get<std::string>();
      const auto& all = stage_names();
      if (std::find(all.begin(), all.end(), name) == all.end()) {
        throw ConfigError(where + ": unknown stage \"" + name + "\"");
      }
      if (std::find(c.stages.begin(), c.stages.end(), name) != c.stages.end()) {
        throw ConfigError(where + ": duplicate stage \"" + name + "\"");
      }
      c.stages.push_back(name);
    }
  } else {
    c.stages = stage_names();
  }
  root.finish();
  refresh_resolved(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  Json doc;
  try {
    doc = io::read_json(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(doc, path.parent_path());
}

ModeRoles mode_roles(const ModeBasis& basis) {
  ModeRoles r;
  // freqs are descending, so scan from the bottom of the spectrum.
  for (int j = basis.size() - 1; j >= 0; --j) {
    if (!basis.is_end.empty() && basis.is_end[static_cast<std::size_t>(j)]) continue;
    if (r.low < 0) {
      r.low = j;
    } else {
      r.high = j;
      break;
    }
  }
  return r;
}

QuantumResult run_quantum_variant(const CouplingTensors& tensors, const ModeRoles& roles,
                                  const QuantumStageConfig& config, Variant variant) {
  QuantumResult r;
  r.variant = variant;
  r.def.hbar = config.hbar;
  r.def.temperature = config.temperature;
  r.def.variant = variant;
  r.def.tau_c = config.tau_c;
  if (variant == Variant::LowModeInBath) {
    r.def.sys_modes = {roles.high};
    r.def.dims = {config.dims[0]};
  } else {
    r.def.sys_modes = {roles.high, roles.low};
    r.def.dims = config.dims;
  }
  validate(r.def, tensors.n_modes);

  const BathModel bath = build_bath(tensors, r.def);
  r.renorm = renormalize(bath, tensors, r.def);
  const FockOperators ops = build_fock_operators(r.def);
  const Eigen::MatrixXd h = build_system_hamiltonian(tensors, r.def, r.renorm, ops);
  const Propagator prop(h, r.def.hbar);
  r.ground_energy = prop.energies()[0];
  r.omega_ref = r.renorm.shifted_freqs[0];

  r.dt = config.dt > 0.0 ? config.dt : std::numbers::pi / (10.0 * max_frequency(tensors));
  const double period = 2.0 * std::numbers::pi / r.omega_ref;
  r.steps = static_cast<long>(std::ceil(config.periods * period / r.dt));

  EvolveOptions opt;
  opt.dt = r.dt;
  opt.steps = r.steps;
  opt.record_every = config.record_every;
  r.run = evolve(r.def, prop, ops, bath, initial_state(r.def, config.low_fock), opt);
  r.fidelity = fidelity_series(r.run, r.def, prop, r.omega_ref);
  r.final_rho = prop.to_schrodinger(r.run.rho.back(), r.run.times.back());
  return r;
}

std::optional<double> fidelity_milestone(const std::vector<FidelityPoint>& series, double threshold) {
  for (const auto& p : series) {
    if (p.fidelity < threshold) return p.t_over_period;
  }
  return std::nullopt;
}

std::vector<StageOutcome> run_pipeline(RunConfig config, const RunOptions& options, std::ostream* log) {
  if (options.output_dir) config.output_dir = *options.output_dir;
  if (options.seed_override) config.classical.rng_seed = *options.seed_override;
  refresh_resolved(config);

  std::vector<std::string> selected;
  for (const auto& name : config.stages) {
    if (options.only.empty() || std::find(options.only.begin(), options.only.end(), name) != options.only.end()) {
      selected.push_back(name);
    }
  }
  for (const auto& name : options.only) {
    const auto& all = stage_names();
    if (std::find(all.begin(), all.end(), name) == all.end()) throw ConfigError("--stage: unknown stage \"" + name + "\"");
    if (std::find(config.stages.begin(), config.stages.end(), name) == config.stages.end()) {
      selected.push_back(name);
    }
  }
  std::vector<std::string> ordered;
  for (const auto& name : stage_names()) {
    if (std::find(selected.begin(), selected.end(), name) != selected.end()) ordered.push_back(name);
  }

  const fs::path dir = config.output_dir;
  // Every input must exist already or be produced by an earlier stage.
  std::set<std::string> produced;
  for (const auto& name : ordered) {
    const auto& st = *std::find_if(stage_table().begin(), stage_table().end(),
                                   [&](const StageSpec& s) { return s.name == name; });
    for (const auto& in : st.inputs) {
      const std::string from = producer_of(in);
      if (!produced.count(from) && !fs::exists(dir / in)) {
        throw ConfigError("stages: " + name + " needs " + in + ", produced by stage \"" + from +
                          "\" which is neither scheduled nor present in " + dir.string());
      }
    }
    produced.insert(name);
  }

  fs::create_directories(dir);
  Json manifest = Json::object();
  if (fs::exists(dir / kManifest)) {
    try {
      manifest = io::read_json(dir / kManifest);
    } catch (const IoError&) {
      manifest = Json::object();
    }
  }
  manifest["version"] = KINKCOH_VERSION;
  manifest["config"] = config.resolved;
  if (!manifest.contains("stages") || !manifest["stages"].is_object()) manifest["stages"] = Json::object();

  std::vector<StageOutcome> outcomes;
  for (const auto& name : ordered) {
    const auto& st = *std::find_if(stage_table().begin(), stage_table().end(),
                                   [&](const StageSpec& s) { return s.name == name; });
    const std::string key = stage_key(config, st, dir);
    if (!options.force && stage_current(manifest, st, key, dir)) {
      if (log) *log << "[" << name << "] up to date, skipped\n";
      outcomes.push_back({name, "skipped", 0.0});
      continue;
    }
    if (log) *log << "[" << name << "] running\n";
    StageContext ctx{config, dir, log, {}};
    Json inputs = Json::object();
    for (const auto& in : st.inputs) inputs[in] = io::sha256_file(dir / in);
    Json entry{{"key", key}, {"status", "running"}, {"inputs", inputs}, {"version", KINKCOH_VERSION}};
    if (name == "classical") entry["rng_seed"] = config.classical.rng_seed;

    const auto t0 = std::chrono::steady_clock::now();
    auto finish = [&](const std::string& status) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      Json outputs = Json::object();
      for (const auto& out : ctx.outputs) {
        if (fs::exists(dir / out)) outputs[out] = io::sha256_file(dir / out);
      }
      entry["outputs"] = outputs;
      entry["status"] = status;
      entry["wall_seconds"] = secs;
      manifest["stages"][name] = entry;
      io::write_json(dir / kManifest, manifest);
      return secs;
    };
    try {
      stage_function(name)(ctx);
    } catch (const std::exception& e) {
      entry["error"] = e.what();
      finish("failed");
      throw;
    }
    const double secs = finish("ok");
    if (log) *log << "[" << name << "] done in " << seconds_text(secs) << "\n";
    outcomes.push_back({name, "ran", secs});
  }
  return outcomes;
}

std::string report(const fs::path& artifact_dir) {
  const fs::path mpath = artifact_dir / kManifest;
  if (!fs::is_directory(artifact_dir)) throw IoError("report: " + artifact_dir.string() + " is not a directory");
  if (!fs::exists(mpath)) throw IoError("report: no manifest.json in " + artifact_dir.string());
  Json manifest;
  try {
    manifest = io::read_json(mpath);
  } catch (const IoError& e) {
    throw IoError(std::string("report: corrupt manifest (") + e.what() + ")");
  }
  if (!manifest.is_object() || !manifest.contains("stages") || !manifest["stages"].is_object()) {
    throw IoError("report: corrupt manifest (no stage table)");
  }

  std::ostringstream os;
  std::vector<std::string> warnings;
  os << "artifacts: " << artifact_dir.string() << "\n";
  os << "version: " << manifest.value("version", "?") << "\n";
  if (manifest.contains("config") && manifest["config"].contains("model")) {
    const Json& m = manifest["config"]["model"];
    os << "model: " << m.value("kind", "?") << ", N = " << m.value("n", 0) << ", " << m.value("boundary", "?")
       << "\n";
  }
  os << "stages:\n";
  for (const auto& name : stage_names()) {
    if (!manifest["stages"].contains(name)) continue;
    const Json& e = manifest["stages"][name];
    os << "  " << name << ": " << e.value("status", "?");
    if (e.contains("wall_seconds")) os << " (" << seconds_text(e["wall_seconds"].get<double>()) << ")";
    os << "\n";
    if (e.contains("outputs") && e["outputs"].is_object()) {
      for (auto it = e["outputs"].begin(); it != e["outputs"].end(); ++it) {
        const fs::path p = artifact_dir / it.key();
        if (!fs::exists(p)) {
          warnings.push_back(it.key() + " is listed in the manifest but missing");
        } else if (!it.value().is_string() || io::sha256_file(p) != it.value().get<std::string>()) {
          warnings.push_back(it.key() + " does not match its manifest hash");
        }
      }
    }
  }

  if (fs::exists(artifact_dir / "modes.json")) {
    ModeRoles roles;
    const ModeBasis b = load_modes(artifact_dir, &roles);
    const Json mj = io::read_json(artifact_dir / "modes.json");
    const Json& band = mj["band"];
    os << "spectrum: " << b.size() << " modes, band [" << io::format_double(band["bottom"].get<double>()) << ", "
       << io::format_double(band["top"].get<double>())
       << "], median spacing " << io::format_double(band["median_spacing"].get<double>()) << "\n";
    os << "  localized:";
    if (b.localized.empty()) os << " none";
    for (int j : b.localized) os << " " << (j + 1) << " (" << io::format_double(b.freqs[j]) << ")";
    os << "\n";
    if (roles.high >= 0 && roles.low >= 0) {
      os << "  omega1 (high, mode " << roles.high + 1 << ") = " << io::format_double(b.freqs[roles.high])
         << ", parity " << io::format_double(std::round(b.parity[roles.high] * 1e6) / 1e6) << "\n";
      os << "  omega2 (low, mode " << roles.low + 1 << ") = " << io::format_double(b.freqs[roles.low])
         << ", parity " << io::format_double(std::round(b.parity[roles.low] * 1e6) / 1e6) << "\n";
      const double bottom = band["bottom"].get<double>();
      os << "  gaps: band bottom - omega1 = " << io::format_double(bottom - b.freqs[roles.high])
         << ", omega1 - omega2 = " << io::format_double(b.freqs[roles.high] - b.freqs[roles.low]) << "\n";
    }
  }

  if (fs::exists(artifact_dir / "couplings.json")) {
    const Json cj = io::read_json(artifact_dir / "couplings.json");
    os << "couplings: " << cj.value("n_cubic", 0) << " cubic, " << cj.value("n_quartic", 0) << " quartic\n";
    for (const auto& [key, sym] : {std::pair{"strongest_cubic", "L"}, std::pair{"strongest_quartic", "M"}}) {
      if (!cj.contains(key)) continue;
      std::size_t shown = 0;
      for (const auto& e : cj[key]) {
        if (shown++ == 5) break;
        os << "  " << sym << "(";
        for (std::size_t i = 0; i < e["modes"].size(); ++i) os << (i ? "," : "") << e["modes"][i].get<int>();
        os << ") = " << io::format_double(e["value"].get<double>()) << "\n";
      }
    }
  }

  if (fs::exists(artifact_dir / "resonances.csv")) {
    std::istringstream in(io::read_text(artifact_dir / "resonances.csv"));
    std::string line;
    std::getline(in, line);
    os << "closest resonances (signature, k, detuning):\n";
    for (int i = 0; i < 5 && std::getline(in, line); ++i) os << "  " << line << "\n";
  }

  if (fs::exists(artifact_dir / "classical.json")) {
    const Json c = io::read_json(artifact_dir / "classical.json");
    os << "classical: " << c.value("steps", 0) << " steps, relative energy drift "
       << io::format_double(c.value("relative_drift", 0.0)) << "\n";
  }

  if (fs::exists(artifact_dir / "quantum.json")) {
    const Json q = io::read_json(artifact_dir / "quantum.json");
    os << "fidelity:\n";
    for (auto it = q.begin(); it != q.end(); ++it) {
      const Json& v = it.value();
      const Json& m = v["milestones"];
      auto fmt = [&](const char* k) {
        return m[k].is_null() ? std::string("not reached by t/T = ") +
                                    io::format_double(m["final_t_over_period"].get<double>())
                              : "t/T = " + io::format_double(m[k].get<double>());
      };
      os << "  " << it.key() << " (" << v.value("variant", "?") << ", omega' = "
         << io::format_double(v["omega_ref"].get<double>()) << "): F < 0.99 at " << fmt("below_0.99")
         << "; F < 0.9 at " << fmt("below_0.9") << "; min F = " << io::format_double(m["min_fidelity"].get<double>())
         << "\n";
    }
  }

  for (const auto& w : warnings) os << "warning: integrity: " << w << "\n";
  return os.str();
}

}  // namespace kinkcoh
