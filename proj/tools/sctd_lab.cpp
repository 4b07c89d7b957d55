// sctd_lab: distillation runs and verification suites driven by a YAML config.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical abort or a
// failed identity check, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sctd/config.hpp"
#include "sctd/experiments.hpp"
#include "sctd/harness.hpp"
#include "sctd/io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

// Where the files of one command go. A path with an extension names the primary table;
// companions sit next to it with the same stem. Anything else is a directory.
class OutputLayout {
 public:
  OutputLayout(const std::string& out, const std::string& default_name) {
    fs::path p = out.empty() ? fs::path("out") : fs::path(out);
    if (p.has_extension()) {
      primary_ = p;
      dir_ = p.has_parent_path() ? p.parent_path() : fs::path(".");
      stem_ = p.stem().string() + "_";
    } else {
      dir_ = p;
      primary_ = p / default_name;
    }
    fs::create_directories(dir_);
  }

  std::string primary() const { return primary_.string(); }
  std::string companion(const std::string& name) const { return (dir_ / (stem_ + name)).string(); }
  // Commands may share a directory, so there the manifest carries the command name.
  std::string manifest(const std::string& command) const {
    return companion(stem_.empty() ? command + "_manifest.json" : "manifest.json");
  }

 private:
  fs::path dir_;
  fs::path primary_;
  std::string stem_;
};

std::vector<sctd::Override> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<sctd::Override> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      throw sctd::ConfigError("", "unexpected argument '" + arg + "'");
    }
    const std::string body = arg.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw sctd::ConfigError(body, "override needs a value");
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

sctd::LabConfig resolve(const Options& opts, const std::vector<std::string>& extras) {
  std::vector<sctd::Override> overrides = parse_overrides(extras);
  if (opts.seed) overrides.emplace_back("seed", std::to_string(*opts.seed));
  if (opts.config_path.empty()) return sctd::parse_config("", overrides);
  if (!fs::exists(opts.config_path)) {
    throw sctd::ConfigError("", "config file '" + opts.config_path + "' does not exist");
  }
  return sctd::load_config(opts.config_path, overrides);
}

void write_manifest(const OutputLayout& layout, const sctd::LabConfig& cfg,
                    const std::string& command, const std::vector<std::string>& outputs,
                    nlohmann::ordered_json extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json manifest;
  manifest["command"] = command;
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const std::string& o : outputs) files.push_back(fs::path(o).filename().string());
  manifest["outputs"] = files;
  for (auto& [key, value] : extra.items()) manifest[key] = value;
  sctd::write_text(layout.manifest(command), sctd::config_to_json(cfg, manifest.dump()));
}

sctd::ScoreModel model_of(const sctd::RunConfig& run) {
  return sctd::ScoreModel{run.schedule.build(), run.prior, run.schedule.coeff_form};
}

int cmd_distill(const sctd::LabConfig& cfg, const Options& opts) {
  const OutputLayout layout(opts.out, "rows.jsonl");
  const sctd::RunResult result = sctd::distill(cfg.run);
  const std::string rows = layout.primary();
  const std::string summary = layout.companion("summary.csv");
  const std::string points = layout.companion("final_points.csv");
  sctd::write_text(rows, sctd::rows_jsonl(result.rows));
  sctd::write_text(summary, sctd::run_summary_csv(cfg.run, result));
  sctd::write_text(points, sctd::final_points_csv(cfg.run, result));
  char digest[17];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(result.noise_digest));
  write_manifest(layout, cfg, "distill", {rows, summary, points}, {{"noise_digest", digest}});

  std::printf("distill loss=%s iterations=%zu max_point_error=%.6g assignment_cost=%.6g\n",
              std::string(sctd::to_string(cfg.run.loss.kind)).c_str(), result.rows.size(),
              result.recovery.max_point_error, result.recovery.assignment_cost);
  std::printf("wall_seconds=%.3f\n", result.wall_seconds);
  return kExitOk;
}

int cmd_compare(const sctd::LabConfig& cfg, const Options& opts) {
  const OutputLayout layout(opts.out, "comparison.csv");
  const auto rows = sctd::compare_losses(cfg.run, cfg.compare, opts.jobs);
  sctd::write_text(layout.primary(), sctd::comparison_csv(rows));
  write_manifest(layout, cfg, "compare", {layout.primary()});
  for (const auto& r : rows) {
    std::printf("%-12s max_point_error=%-12.6g assignment_cost=%-12.6g wall_seconds=%.3f\n",
                r.label.c_str(), r.max_point_error, r.assignment_cost, r.wall_seconds);
  }
  return kExitOk;
}

int cmd_theorem1(const sctd::LabConfig& cfg, const Options& opts) {
  const OutputLayout layout(opts.out, "theorem1.csv");
  const auto report =
      sctd::verify_theorem1(model_of(cfg.run), cfg.run.condition(), cfg.theorem1, opts.jobs);
  const std::string slopes = layout.companion("theorem1_slopes.csv");
  sctd::write_text(layout.primary(), sctd::theorem1_csv(report));
  sctd::write_text(slopes, sctd::theorem1_slopes_csv(cfg.theorem1, report));
  write_manifest(layout, cfg, "verify-theorem1", {layout.primary(), slopes});
  for (std::size_t k = 0; k < report.length_slopes.size(); ++k) {
    std::printf("slope vs segment_length at dt=%g: %.4f\n", cfg.theorem1.step_sizes[k],
                report.length_slopes[k].slope);
  }
  for (std::size_t i = 0; i < report.dt_slopes.size(); ++i) {
    std::printf("slope vs dt at N_s=%d: %.4f\n", cfg.theorem1.segment_counts[i],
                report.dt_slopes[i].slope);
  }
  return kExitOk;
}

int cmd_derivations(const sctd::LabConfig& cfg, const Options& opts) {
  const OutputLayout layout(opts.out, "derivations.csv");
  const sctd::Segmentation seg = cfg.run.segmentation.build(cfg.run.schedule.horizon);
  const auto checks =
      sctd::check_derivations(model_of(cfg.run), seg, cfg.run.condition(), cfg.derivations);
  sctd::write_text(layout.primary(), sctd::derivations_csv(checks));
  write_manifest(layout, cfg, "check-derivations", {layout.primary()});
  bool all = true;
  for (const auto& c : checks) {
    std::printf("%s %s draws=%d max_rel_error=%.3e tolerance=%.1e\n", c.pass ? "PASS" : "FAIL",
                c.name.c_str(), c.draws, c.max_rel_error, c.tolerance);
    all = all && c.pass;
  }
  return all ? kExitOk : kExitNumerical;
}

int cmd_solver_order(const sctd::LabConfig& cfg, const Options& opts) {
  const OutputLayout layout(opts.out, "solver_order.csv");
  const auto report = sctd::solver_order(model_of(cfg.run), cfg.run.condition(), cfg.solver_order);
  sctd::write_text(layout.primary(), sctd::solver_order_csv(report));
  write_manifest(layout, cfg, "solver-order", {layout.primary()});
  std::printf("phi order %.4f\nreference order %.4f\n", report.phi_order, report.reference_order);
  return kExitOk;
}

int cmd_gcs_flaw(const sctd::LabConfig& cfg, const Options& opts) {
  const OutputLayout layout(opts.out, "gcs_flaw.csv");
  const auto rows = sctd::gcs_flaw_grid(model_of(cfg.run), cfg.run.condition(), cfg.gcs_flaw);
  sctd::write_text(layout.primary(), sctd::gcs_flaw_csv(rows));
  write_manifest(layout, cfg, "gcs-flaw", {layout.primary()});
  for (const auto& r : rows) {
    std::printf("t=%g e=%g e'=%g gap=%.4e noise_floor=%.2e\n", r.t, r.e, r.e_prime, r.gap,
                r.noise_floor);
  }
  return kExitOk;
}

// ConfigError messages already lead with the key path.
void report_error(const char* kind, const std::string& message) {
  std::fprintf(stderr, "sctd_lab: error[%s] %s\n", kind, message.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmented consistency distillation lab"};
  app.require_subcommand(1);
  Options opts;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const sctd::LabConfig&, const Options&);
    CLI::App* app = nullptr;
  };
  std::vector<Command> commands{
      {"distill", "Optimize the point scene against the prior", cmd_distill},
      {"compare", "Run distill once per configured loss variant", cmd_compare},
      {"verify-theorem1", "Distillation error against segment length and step size", cmd_theorem1},
      {"check-derivations", "Random-draw checks of the loss identities", cmd_derivations},
      {"solver-order", "Convergence orders of the one-step and reference solvers",
       cmd_solver_order},
      {"gcs-flaw", "Endpoint dependence of the GCS target", cmd_gcs_flaw},
  };
  for (Command& c : commands) {
    c.app = app.add_subcommand(c.name, c.help);
    c.app->allow_extras();
    c.app->add_option("--config", opts.config_path, "YAML config file (defaults when omitted)");
    c.app->add_option("--out", opts.out, "Output directory, or primary output file");
    c.app->add_option("--seed", opts.seed, "Override the config seed");
    c.app->add_option("--jobs", opts.jobs, "Concurrent runs for compare and verify-theorem1")
        ->check(CLI::PositiveNumber);
    c.app->footer("Any other --section.key VALUE pair overrides that config entry.");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  for (const Command& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      const sctd::LabConfig cfg = resolve(opts, c.app->remaining());
      return c.run(cfg, opts);
    } catch (const sctd::ConfigError& e) {
      report_error("config", e.what());
      return kExitConfig;
    } catch (const sctd::NumericalError& e) {
      report_error("numerical", e.what());
      return kExitNumerical;
    } catch (const std::exception& e) {
      report_error("failure", e.what());
      return kExitFailure;
    }
  }
  return kExitFailure;
}
