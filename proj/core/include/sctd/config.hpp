#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sctd/experiments.hpp"
#include "sctd/harness.hpp"

namespace sctd {

inline constexpr int kSchemaVersion = 1;

// Invalid configuration value; key_path names the offending entry ("loss.kind").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& message)
      : std::runtime_error(key_path.empty() ? message : key_path + ": " + message),
        key_path_(std::move(key_path)) {}

  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

struct LabConfig {
  RunConfig run;
  // Loss variants for `compare`; each starts from run.loss with the listed fields replaced.
  std::vector<std::pair<std::string, LossConfig>> compare;
  Theorem1Options theorem1;
  SolverOrderOptions solver_order;
  DerivationOptions derivations;
  GcsFlawOptions gcs_flaw;

  // Propagates the top-level seed into every experiment.
  void apply_seed();
};

LabConfig default_lab_config();

using Override = std::pair<std::string, std::string>;

/// Parses a YAML (or JSON) document. Missing keys keep their defaults, unknown keys are
/// rejected. Each override "a.b.c" = "value" replaces that node (the value is read as
/// YAML, so "[1, 2]" is a list) before parsing. Sequence elements are addressed by index.
LabConfig parse_config(std::string_view text, const std::vector<Override>& overrides = {});
LabConfig load_config(const std::string& path, const std::vector<Override>& overrides = {});

/// Fully resolved configuration as JSON, with schema_version. `extra` (a JSON object
/// text, may be empty) is stored under "manifest" and ignored when parsed back.
std::string config_to_json(const LabConfig& config, const std::string& extra = "");

}  // namespace sctd
