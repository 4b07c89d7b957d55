#include "sctd/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace sctd {

std::string format_double(double value) {
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buffer, end);
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::string rows_jsonl(const std::vector<IterationRow>& rows) {
  std::string out;
  for (const IterationRow& r : rows) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["t"] = r.t;
    j["s"] = r.s;
    j["e"] = r.e;
    j["segment"] = r.segment;
    j["loss"] = r.loss;
    nlohmann::ordered_json terms = nlohmann::ordered_json::object();
    for (const auto& [name, value] : r.terms) terms[name] = value;
    j["terms"] = terms;
    j["grad_norm"] = r.grad_norm;
    j["max_point_error"] = r.max_point_error;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string run_summary_csv(const RunConfig& cfg, const RunResult& result) {
  char digest[17];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(result.noise_digest));
  std::ostringstream out;
  out << "loss,seed,iterations,final_loss,max_point_error,assignment_cost,noise_digest\n";
  out << to_string(cfg.loss.kind) << ',' << cfg.seed << ',' << result.rows.size() << ','
      << format_double(result.rows.empty() ? 0.0 : result.rows.back().loss) << ','
      << format_double(result.recovery.max_point_error) << ','
      << format_double(result.recovery.assignment_cost) << ',' << digest << '\n';
  return out.str();
}

std::string final_points_csv(const RunConfig& cfg, const RunResult& result) {
  const int d = cfg.scene.dimension;
  std::ostringstream out;
  out << "point";
  for (int i = 0; i < d; ++i) out << ",x" << i;
  out << '\n';
  for (int k = 0; k < cfg.scene.points; ++k) {
    out << k;
    for (int i = 0; i < d; ++i) out << ',' << format_double(result.final_theta[k * d + i]);
    out << '\n';
  }
  return out.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::set<std::string> names;
  for (const ComparisonRow& r : rows) {
    for (const auto& [name, value] : r.mean_terms) names.insert(name);
  }
  std::ostringstream out;
  out << "label,loss,guidance_scale,max_point_error,assignment_cost,final_loss";
  for (const std::string& name : names) out << ",mean_" << name;
  out << '\n';
  for (const ComparisonRow& r : rows) {
    out << r.label << ',' << to_string(r.loss.kind) << ',' << format_double(r.loss.guidance_scale)
        << ',' << format_double(r.max_point_error) << ',' << format_double(r.assignment_cost)
        << ',' << format_double(r.final_loss);
    for (const std::string& name : names) {
      auto it = r.mean_terms.find(name);
      out << ',';
      if (it != r.mean_terms.end()) out << format_double(it->second);
    }
    out << '\n';
  }
  return out.str();
}

std::string theorem1_csv(const Theorem1Report& report) {
  std::ostringstream out;
  out << "N_s,segment_length,dt,sup_error\n";
  for (const Theorem1Cell& c : report.cells) {
    out << c.segment_count << ',' << format_double(c.segment_length) << ','
        << format_double(c.dt) << ',' << format_double(c.sup_error) << '\n';
  }
  return out.str();
}

std::string theorem1_slopes_csv(const Theorem1Options& options, const Theorem1Report& report) {
  std::ostringstream out;
  out << "axis,fixed,slope\n";
  for (std::size_t k = 0; k < report.length_slopes.size(); ++k) {
    out << "segment_length,dt=" << format_double(options.step_sizes[k]) << ','
        << format_double(report.length_slopes[k].slope) << '\n';
  }
  for (std::size_t i = 0; i < report.dt_slopes.size(); ++i) {
    out << "dt,N_s=" << options.segment_counts[i] << ','
        << format_double(report.dt_slopes[i].slope) << '\n';
  }
  return out.str();
}

std::string solver_order_csv(const SolverOrderReport& report) {
  std::ostringstream out;
  out << "solver,steps,h,error\n";
  for (const SolverOrderRow& r : report.rows) {
    out << r.solver << ',' << r.steps << ',' << format_double(r.h) << ','
        << format_double(r.error) << '\n';
  }
  return out.str();
}

std::string derivations_csv(const std::vector<IdentityCheck>& checks) {
  std::ostringstream out;
  out << "identity,draws,max_rel_error,tolerance,pass\n";
  for (const IdentityCheck& c : checks) {
    out << c.name << ',' << c.draws << ',' << format_double(c.max_rel_error) << ','
        << format_double(c.tolerance) << ',' << (c.pass ? "true" : "false") << '\n';
  }
  return out.str();
}

std::string gcs_flaw_csv(const std::vector<GcsFlawRow>& rows) {
  std::ostringstream out;
  out << "t,e,e_prime,gap,noise_floor\n";
  for (const GcsFlawRow& r : rows) {
    out << format_double(r.t) << ',' << format_double(r.e) << ',' << format_double(r.e_prime)
        << ',' << format_double(r.gap) << ',' << format_double(r.noise_floor) << '\n';
  }
  return out.str();
}

}  // namespace sctd
