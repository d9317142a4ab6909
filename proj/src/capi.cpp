#include "kinkcoh/kinkcoh.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <ostream>
#include <sstream>
#include <streambuf>
#include <string>

#include "kinkcoh/couplings.hpp"
#include "kinkcoh/equilibrium.hpp"
#include "kinkcoh/errors.hpp"
#include "kinkcoh/lattice.hpp"
#include "kinkcoh/modes.hpp"
#include "kinkcoh/pipeline.hpp"
#include "kinkcoh/quantum.hpp"

struct kc_model {
  kinkcoh::ModelSpec spec;
};
struct kc_equilibrium {
  kinkcoh::Equilibrium eq;
};
struct kc_modes {
  kinkcoh::ModeBasis basis;
};
struct kc_couplings {
  kinkcoh::CouplingTensors tensors;
};

namespace {

thread_local std::string g_last_error;

kc_status fail(kc_status code, const char* what) {
  g_last_error = what;
  return code;
}

// Runs body and maps library exceptions onto status codes.
template <typename F>
kc_status guarded(F&& body) {
  try {
    body();
    return KC_OK;
  } catch (const kinkcoh::ConfigError& e) {
    return fail(KC_ERR_VALIDATION, e.what());
  } catch (const kinkcoh::NumericalError& e) {
    return fail(KC_ERR_NUMERICAL, e.what());
  } catch (const kinkcoh::IoError& e) {
    return fail(KC_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(KC_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(KC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(KC_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (!p) throw kinkcoh::ConfigError(std::string(name) + ": null pointer");
}

void need_size(size_t got, Eigen::Index want, const char* name) {
  if (got != static_cast<size_t>(want)) {
    throw kinkcoh::ConfigError(std::string(name) + ": buffer holds " + std::to_string(got) + " values, need " +
                               std::to_string(want));
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

Eigen::VectorXd copy_in(const double* x, size_t n) {
  return Eigen::Map<const Eigen::VectorXd>(x, static_cast<Eigen::Index>(n));
}

// Forwards complete lines to the caller's log callback.
class LineBuf : public std::streambuf {
 public:
  LineBuf(kc_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineBuf() override { flush(); }

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return 0;
    if (ch == '\n') {
      flush();
    } else {
      line_ += static_cast<char>(ch);
    }
    return ch;
  }

 private:
  void flush() {
    if (!line_.empty() && fn_) fn_(line_.c_str(), user_);
    line_.clear();
  }
  kc_log_fn fn_;
  void* user_;
  std::string line_;
};

std::vector<std::string> split_stages(const char* s) {
  std::vector<std::string> out;
  if (!s) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

extern "C" {

const char* kc_version(void) { return KINKCOH_VERSION; }

const char* kc_last_error(void) { return g_last_error.c_str(); }

void kc_string_free(char* s) { std::free(s); }

kc_status kc_model_from_json(const char* json, kc_model** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    kinkcoh::io::Json doc;
    try {
      doc = kinkcoh::io::Json::parse(json);
    } catch (const kinkcoh::io::Json::parse_error& e) {
      throw kinkcoh::ConfigError(std::string("model: invalid JSON (") + e.what() + ")");
    }
    *out = new kc_model{kinkcoh::model_from_json(doc)};
  });
}

kc_status kc_model_phi4(size_t n, double g, double k, int sector, kc_model** out) {
  return guarded([&] {
    need(out, "out");
    kinkcoh::ModelSpec spec = kinkcoh::make_phi4(n, g, k, sector);
    kinkcoh::validate(spec);
    *out = new kc_model{std::move(spec)};
  });
}

kc_status kc_model_sine_gordon(size_t n, double g, int winding, kc_model** out) {
  return guarded([&] {
    need(out, "out");
    kinkcoh::ModelSpec spec = kinkcoh::make_sine_gordon(n, g, winding);
    kinkcoh::validate(spec);
    *out = new kc_model{std::move(spec)};
  });
}

void kc_model_free(kc_model* model) { delete model; }

size_t kc_model_size(const kc_model* model) { return model ? model->spec.size() : 0; }

kc_status kc_potential_energy(const kc_model* model, const double* x, size_t n, double* energy) {
  return guarded([&] {
    need(model, "model");
    need(x, "x");
    need(energy, "energy");
    *energy = kinkcoh::potential_energy(model->spec, std::span<const double>(x, n));
  });
}

kc_status kc_gradient(const kc_model* model, const double* x, size_t n, double* grad) {
  return guarded([&] {
    need(model, "model");
    need(x, "x");
    need(grad, "grad");
    const Eigen::VectorXd g = kinkcoh::gradient(model->spec, std::span<const double>(x, n));
    std::copy(g.data(), g.data() + g.size(), grad);
  });
}

kc_status kc_continuum_seed(const kc_model* model, double center, double* x, size_t n) {
  return guarded([&] {
    need(model, "model");
    need(x, "x");
    need_size(n, static_cast<Eigen::Index>(model->spec.size()), "x");
    const double c = center > 0.0 ? center : 0.5 * (static_cast<double>(model->spec.size()) + 1.0);
    const Eigen::VectorXd s = kinkcoh::continuum_seed(model->spec, c);
    std::copy(s.data(), s.data() + s.size(), x);
  });
}

kc_status kc_relax(const kc_model* model, const double* seed, size_t n, double tol, kc_equilibrium** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const auto& spec = model->spec;
    Eigen::VectorXd x0;
    if (seed) {
      need_size(n, static_cast<Eigen::Index>(spec.size()), "seed");
      x0 = copy_in(seed, n);
    } else {
      x0 = kinkcoh::continuum_seed(spec, 0.5 * (static_cast<double>(spec.size()) + 1.0));
    }
    kinkcoh::RelaxOptions opt;
    if (tol > 0.0) opt.tol = tol;
    *out = new kc_equilibrium{kinkcoh::relax(spec, x0, opt)};
  });
}

void kc_equilibrium_free(kc_equilibrium* eq) { delete eq; }

kc_status kc_equilibrium_positions(const kc_equilibrium* eq, double* x, size_t n) {
  return guarded([&] {
    need(eq, "eq");
    need(x, "x");
    need_size(n, eq->eq.positions.size(), "x");
    std::copy(eq->eq.positions.data(), eq->eq.positions.data() + n, x);
  });
}

kc_status kc_equilibrium_info(const kc_equilibrium* eq, double* energy, double* grad_norm,
                              double* min_hessian_eig, int* iterations) {
  return guarded([&] {
    need(eq, "eq");
    if (energy) *energy = eq->eq.energy;
    if (grad_norm) *grad_norm = eq->eq.grad_norm;
    if (min_hessian_eig) *min_hessian_eig = eq->eq.min_hessian_eig;
    if (iterations) *iterations = eq->eq.iterations;
  });
}

kc_status kc_modes_compute(const kc_model* model, const kc_equilibrium* eq, double gap_factor, kc_modes** out) {
  return guarded([&] {
    need(model, "model");
    need(eq, "eq");
    need(out, "out");
    kinkcoh::ModeBasis b = kinkcoh::normal_modes(kinkcoh::derivatives(model->spec, eq->eq.positions).hessian);
    kinkcoh::classify(b, gap_factor > 1.0 ? gap_factor : 3.0);
    *out = new kc_modes{std::move(b)};
  });
}

void kc_modes_free(kc_modes* modes) { delete modes; }

size_t kc_modes_count(const kc_modes* modes) { return modes ? static_cast<size_t>(modes->basis.size()) : 0; }

kc_status kc_modes_frequencies(const kc_modes* modes, double* freqs, size_t n) {
  return guarded([&] {
    need(modes, "modes");
    need(freqs, "freqs");
    need_size(n, modes->basis.freqs.size(), "freqs");
    std::copy(modes->basis.freqs.data(), modes->basis.freqs.data() + n, freqs);
  });
}

kc_status kc_modes_vector(const kc_modes* modes, int mode, double* v, size_t n) {
  return guarded([&] {
    need(modes, "modes");
    need(v, "v");
    const auto& b = modes->basis;
    if (mode < 0 || mode >= b.size()) throw kinkcoh::ConfigError("mode: index out of range");
    need_size(n, b.vectors.rows(), "v");
    for (Eigen::Index i = 0; i < b.vectors.rows(); ++i) v[i] = b.vectors(i, mode);
  });
}

kc_status kc_modes_localized(const kc_modes* modes, int* flags, size_t n) {
  return guarded([&] {
    need(modes, "modes");
    need(flags, "flags");
    need_size(n, modes->basis.freqs.size(), "flags");
    for (size_t j = 0; j < n; ++j) flags[j] = modes->basis.is_localized(static_cast<int>(j)) ? 1 : 0;
  });
}

kc_status kc_modes_roles(const kc_modes* modes, int* high, int* low) {
  return guarded([&] {
    need(modes, "modes");
    const kinkcoh::ModeRoles r = kinkcoh::mode_roles(modes->basis);
    if (high) *high = r.high;
    if (low) *low = r.low;
  });
}

kc_status kc_couplings_compute(const kc_model* model, const kc_equilibrium* eq, const kc_modes* modes,
                               double threshold, kc_couplings** out) {
  return guarded([&] {
    need(model, "model");
    need(eq, "eq");
    need(modes, "modes");
    need(out, "out");
    kinkcoh::CouplingOptions opt;
    opt.threshold3 = opt.threshold4 = threshold;
    *out = new kc_couplings{
        kinkcoh::transform(kinkcoh::derivatives(model->spec, eq->eq.positions), modes->basis, opt)};
  });
}

kc_status kc_couplings_load(const char* path, kc_couplings** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new kc_couplings{kinkcoh::read_couplings_binary(path)};
  });
}

kc_status kc_couplings_save(const kc_couplings* c, const char* path) {
  return guarded([&] {
    need(c, "couplings");
    need(path, "path");
    kinkcoh::write_couplings_binary(c->tensors, path);
  });
}

void kc_couplings_free(kc_couplings* c) { delete c; }

kc_status kc_couplings_counts(const kc_couplings* c, size_t* n_cubic, size_t* n_quartic) {
  return guarded([&] {
    need(c, "couplings");
    if (n_cubic) *n_cubic = c->tensors.third.size();
    if (n_quartic) *n_quartic = c->tensors.fourth.size();
  });
}

kc_status kc_couplings_cubic(const kc_couplings* c, int i, int j, int k, double* value) {
  return guarded([&] {
    need(c, "couplings");
    need(value, "value");
    const int n = c->tensors.n_modes;
    for (int m : {i, j, k}) {
      if (m < 0 || m >= n) throw kinkcoh::ConfigError("mode: index out of range");
    }
    *value = c->tensors.L(i, j, k);
  });
}

kc_status kc_couplings_quartic(const kc_couplings* c, int i, int j, int k, int l, double* value) {
  return guarded([&] {
    need(c, "couplings");
    need(value, "value");
    const int n = c->tensors.n_modes;
    for (int m : {i, j, k, l}) {
      if (m < 0 || m >= n) throw kinkcoh::ConfigError("mode: index out of range");
    }
    *value = c->tensors.M(i, j, k, l);
  });
}

kc_status kc_fidelity(const double* rho_re, const double* rho_im, const double* chi_re, const double* chi_im,
                      size_t dim, double* out) {
  return guarded([&] {
    need(rho_re, "rho_re");
    need(chi_re, "chi_re");
    need(out, "out");
    if (dim == 0) throw kinkcoh::ConfigError("dim: must be positive");
    const auto d = static_cast<Eigen::Index>(dim);
    kinkcoh::CMatrix rho(d, d), chi(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) {
        const size_t at = static_cast<size_t>(r * d + c);
        rho(r, c) = {rho_re[at], rho_im ? rho_im[at] : 0.0};
        chi(r, c) = {chi_re[at], chi_im ? chi_im[at] : 0.0};
      }
    }
    *out = kinkcoh::fidelity(rho, chi);
  });
}

void kc_run_options_init(kc_run_options* opts) {
  if (opts) *opts = kc_run_options{0, nullptr, nullptr, 0, 0, nullptr, nullptr};
}

kc_status kc_check_config(const char* config_path) {
  return guarded([&] {
    need(config_path, "config_path");
    kinkcoh::load_config(config_path);
  });
}

kc_status kc_run_config(const char* config_path, const kc_run_options* opts) {
  return guarded([&] {
    need(config_path, "config_path");
    kc_run_options defaults;
    kc_run_options_init(&defaults);
    const kc_run_options& o = opts ? *opts : defaults;
    kinkcoh::RunOptions ro;
    ro.force = o.force != 0;
    ro.only = split_stages(o.stages);
    if (o.output_dir && *o.output_dir) ro.output_dir = std::filesystem::path(o.output_dir);
    if (o.has_seed_override) ro.seed_override = o.seed_override;
    LineBuf buf(o.log, o.log_user);
    std::ostream log(&buf);
    kinkcoh::run_pipeline(kinkcoh::load_config(config_path), ro, o.log ? &log : nullptr);
  });
}

kc_status kc_report(const char* artifact_dir, char** text) {
  return guarded([&] {
    need(artifact_dir, "artifact_dir");
    need(text, "text");
    *text = dup_string(kinkcoh::report(artifact_dir));
  });
}

}  // extern "C"
