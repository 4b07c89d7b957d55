#pragma once

#include <string>
#include <vector>

#include "sctd/experiments.hpp"
#include "sctd/harness.hpp"

namespace sctd {

// Shortest text that parses back to the same double.
std::string format_double(double value);

// Writes `content` to `path`, replacing the file. Throws std::runtime_error on failure.
void write_text(const std::string& path, const std::string& content);

// One JSON object per iteration; see docs/output_schemas.md.
std::string rows_jsonl(const std::vector<IterationRow>& rows);

std::string run_summary_csv(const RunConfig& cfg, const RunResult& result);
std::string final_points_csv(const RunConfig& cfg, const RunResult& result);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string theorem1_csv(const Theorem1Report& report);
std::string theorem1_slopes_csv(const Theorem1Options& options, const Theorem1Report& report);
std::string solver_order_csv(const SolverOrderReport& report);
std::string derivations_csv(const std::vector<IdentityCheck>& checks);
std::string gcs_flaw_csv(const std::vector<GcsFlawRow>& rows);

}  // namespace sctd
