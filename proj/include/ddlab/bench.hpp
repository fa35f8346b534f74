#pragma once

#include "ddlab/methods.hpp"

#include <string>
#include <vector>

namespace ddlab {

enum class SweepAxis { None, Subdomains, ElementsPerSubdomain, HeterogeneityRatio };
enum class TableFormat { Csv, Json, Markdown };

struct RunManifest {
  ProblemSpec problem;
  std::vector<MethodConfig> methods;
  SweepAxis axis = SweepAxis::None;
  std::vector<double> values;
  std::string out_dir = "out";
  unsigned seed = 0;
  double tolerance = 0.0;  // > 0 overrides every method tolerance

  void validate() const;
};

struct ResultRow {
  std::string method;
  double axis_value = 0.0;
  int iterations = 0;
  int coarse_a = 0;
  int coarse_b = 0;
  double true_residual = 0.0;
  double seconds = 0.0;
  bool converged = true;
  bool oracle_ok = true;
};

struct TrendStats {
  std::string method;
  double growth_factor = 0.0;  // iterations, last axis value over first
  bool has_fit = false;        // logarithmic-square fit over element counts
  double fit_a = 0.0, fit_b = 0.0;
  double fit_residual = 0.0;  // relative
};

struct ResultTable {
  std::vector<double> axis_values;
  std::vector<ResultRow> rows;
  std::vector<TrendStats> trends;

  const ResultRow* find(const std::string& method, double axis) const;
};

/// Applies one sweep-axis value to the base problem description.
ProblemSpec apply_axis(const ProblemSpec& base, SweepAxis axis, double value);

struct CaseResult {
  SolverReport report;
  Vector u;
  double oracle_mismatch = 0.0;  // ||u - u_ref|| / ||u_ref||
  bool oracle_ok = true;
};

/// Runs one method against a prepared workspace and the reference solution.
CaseResult run_case(const Workspace& ws, const Vector& u_oracle, const MethodConfig& cfg);

/// Full sweep: problems are built once per axis value and shared by every
/// method. When out_dir is nonempty, per-case reports and histories land there.
ResultTable run_sweep(const RunManifest& manifest, bool write_files = true);

/// Writes <stem>.<ext> into out_dir; returns the path.
std::string emit(const ResultTable& table, TableFormat format, const std::string& out_dir,
                 const std::string& stem = "results");

/// Re-emits a stored table (results.json) in another format.
std::string reemit(const std::string& out_dir, TableFormat format);

/// Runs everything and emits; returns the number of flagged cases.
int run_manifest(const RunManifest& manifest, TableFormat format);

// --- JSON document forms (field names are part of the tool contract) ---
std::string problem_spec_to_json(const ProblemSpec& spec);
ProblemSpec problem_spec_from_json(const std::string& text);
std::string method_config_to_json(const MethodConfig& cfg);
MethodConfig method_config_from_json(const std::string& text);
std::string report_to_json(const SolverReport& rep, double oracle_mismatch, bool oracle_ok);
std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);
std::string manifest_template_json();
std::string result_table_to_json(const ResultTable& table);
ResultTable result_table_from_json(const std::string& text);

void write_history_csv(const std::string& path, const std::vector<IterationRecord>& history);

/// Writes the trace and assembly operators (and the condensed stiffness of
/// each piece) as dense CSV matrices for fixture comparison.
void dump_operators(const DecomposedProblem& problem, const std::string& out_dir);

}  // namespace ddlab
