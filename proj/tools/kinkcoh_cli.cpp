// kinkcoh command line: staged pipeline runs and artifact reports.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kinkcoh/kinkcoh.h"

namespace {

int exit_code(kc_status s) {
  switch (s) {
    case KC_OK:
      return 0;
    case KC_ERR_VALIDATION:
    case KC_ERR_IO:
      return 2;
    case KC_ERR_NUMERICAL:
      return 3;
    default:
      return 1;
  }
}

int report_failure(kc_status s) {
  std::fprintf(stderr, "kinkcoh: error: %s\n", kc_last_error());
  return exit_code(s);
}

void print_line(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

struct RunArgs {
  std::string config;
  bool force = false;
  std::vector<std::string> stages;
  std::string output;
  std::uint64_t seed_override = 0;
  bool quiet = false;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete kink simulator: equilibria, normal modes, couplings, classical and quantum dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kc_version()));

  RunArgs args;
  bool has_seed_override = false;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config,-c", args.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--force,-f", args.force, "Re-run stages even when their artifacts are current");
    cmd->add_option("--output,-o", args.output, "Artifact directory, overriding output_dir");
    cmd->add_option("--seed-override", args.seed_override, "Replace the classical RNG seed")
        ->each([&](const std::string&) { has_seed_override = true; });
    cmd->add_flag("--quiet,-q", args.quiet, "Suppress progress output");
  };

  CLI::App* run = app.add_subcommand("run", "Run the configured stages");
  add_common(run);
  run->add_option("--stage,-s", args.stages, "Only run these stages (repeatable)");

  const std::vector<std::pair<std::string, std::string>> stage_cmds = {
      {"seed", "Sample the continuum kink seed"},
      {"relax", "Relax the seed to the kink equilibrium"},
      {"modes", "Normal modes, classification and resonances"},
      {"couplings", "Normal-coordinate cubic and quartic couplings"},
      {"classical", "Classical dynamics and spectral diagnostics"},
      {"quantum", "Master-equation runs and fidelity"},
  };
  std::vector<CLI::App*> stage_apps;
  for (const auto& [name, help] : stage_cmds) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd);
    stage_apps.push_back(cmd);
  }

  std::string report_dir;
  std::string report_output;
  CLI::App* rep = app.add_subcommand("report", "Summarize an artifact directory");
  rep->add_option("dir", report_dir, "Artifact directory");
  rep->add_option("--output,-o", report_output, "Artifact directory (alternative to the positional argument)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version exit 0; every usage error is a validation error.
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (rep->parsed()) {
    const std::string dir = !report_dir.empty() ? report_dir : report_output;
    if (dir.empty()) {
      std::fprintf(stderr, "kinkcoh: error: report needs an artifact directory\n");
      return 2;
    }
    char* text = nullptr;
    const kc_status s = kc_report(dir.c_str(), &text);
    if (s != KC_OK) return report_failure(s);
    std::fputs(text, stdout);
    kc_string_free(text);
    return 0;
  }

  std::vector<std::string> stages = args.stages;
  for (std::size_t i = 0; i < stage_apps.size(); ++i) {
    if (stage_apps[i]->parsed()) stages = {stage_cmds[i].first};
  }
  std::string joined;
  for (const auto& s : stages) joined += (joined.empty() ? "" : ",") + s;

  kc_run_options opts;
  kc_run_options_init(&opts);
  opts.force = args.force ? 1 : 0;
  opts.stages = joined.c_str();
  opts.output_dir = args.output.empty() ? nullptr : args.output.c_str();
  opts.has_seed_override = has_seed_override ? 1 : 0;
  opts.seed_override = args.seed_override;
  opts.log = args.quiet ? nullptr : print_line;
  const kc_status s = kc_run_config(args.config.c_str(), &opts);
  return s == KC_OK ? 0 : report_failure(s);
}
