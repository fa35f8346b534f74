#include "ddlab/bench.hpp"

#include "ddlab/local_ops.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ddlab {

using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// ---- enum spellings -------------------------------------------------------

template <typename T>
struct EnumNames {
  std::vector<std::pair<T, const char*>> names;
  std::string to(T v) const {
    for (auto& [e, n] : names)
      if (e == v) return n;
    throw std::invalid_argument("unknown enum value");
  }
  T from(const std::string& s, const char* what) const {
    for (auto& [e, n] : names)
      if (s == n) return e;
    throw std::invalid_argument(std::string("unknown ") + what + ": " + s);
  }
};

const EnumNames<Method> kMethods{{{Method::Bdd, "bdd"},
                                  {Method::Feti, "feti"},
                                  {Method::Pfeti, "pfeti"},
                                  {Method::Afeti, "afeti"},
                                  {Method::Hybrid, "hybrid"},
                                  {Method::Fetidp, "fetidp"},
                                  {Method::Bddc, "bddc"},
                                  {Method::Mixed2, "mixed2"}}};
const EnumNames<Preconditioner> kPreconditioners{{{Preconditioner::None, "none"},
                                                  {Preconditioner::Neumann, "neumann"},
                                                  {Preconditioner::Dirichlet, "dirichlet"},
                                                  {Preconditioner::Lumped, "lumped"},
                                                  {Preconditioner::Superlumped, "superlumped"}}};
const EnumNames<ScalingKind> kScalings{
    {{ScalingKind::Multiplicity, "multiplicity"}, {ScalingKind::Stiffness, "stiffness"}}};
const EnumNames<ProjectorQ> kProjectors{{{ProjectorQ::Identity, "identity"},
                                         {ProjectorQ::Superlumped, "superlumped"},
                                         {ProjectorQ::Lumped, "lumped"},
                                         {ProjectorQ::Dirichlet, "dirichlet"},
                                         {ProjectorQ::Multiplicity, "multiplicity"}}};
const EnumNames<Initialization> kInits{{{Initialization::Zero, "zero"},
                                        {Initialization::ClassicalSplit, "classical_split"},
                                        {Initialization::CondensedSplit, "condensed_split"}}};
const EnumNames<InitWeight> kInitWeights{
    {{InitWeight::DiagKbb, "diag_kbb"}, {InitWeight::DualSchur, "dual_schur"}}};
const EnumNames<CoarseMode> kCoarse{
    {{CoarseMode::AutoRbm, "auto_rbm"}, {CoarseMode::None, "none"}}};
const EnumNames<ConstraintSource> kConstraintSources{{{ConstraintSource::None, "none"},
                                                      {ConstraintSource::Corners, "corners"},
                                                      {ConstraintSource::Custom, "custom"}}};
const EnumNames<FetidpConstraints> kFetidpConstraints{
    {{FetidpConstraints::Corners, "corners"},
     {FetidpConstraints::CornersPlusEdgeAverages, "corners_plus_edge_averages"}}};
const EnumNames<SolverChoice> kSolvers{
    {{SolverChoice::Auto, "auto"}, {SolverChoice::Gmres, "gmres"}}};
const EnumNames<MixedStiffness> kMixed{{{MixedStiffness::NeighborSchur, "neighbor_schur"},
                                        {MixedStiffness::NeighborStrip, "neighbor_strip"},
                                        {MixedStiffness::NeighborKbb, "neighbor_kbb"},
                                        {MixedStiffness::Zero, "zero"}}};
const EnumNames<SweepAxis> kAxes{{{SweepAxis::None, "none"},
                                  {SweepAxis::Subdomains, "subdomains"},
                                  {SweepAxis::ElementsPerSubdomain, "h_over_h"},
                                  {SweepAxis::HeterogeneityRatio, "het_ratio"}}};

json problem_to_json_obj(const ProblemSpec& spec) {
  json j;
  j["kind"] = spec.kind == ProblemKind::Square2d ? "square2d" : "bar1d";
  j["px"] = spec.px;
  j["py"] = spec.py;
  j["mx"] = spec.mx;
  j["my"] = spec.my;
  if (spec.checkerboard) {
    j["young_pair"] = {spec.checkerboard->young_a, spec.checkerboard->young_b};
    j["cell"] = spec.checkerboard->cell;
  } else {
    j["young"] = spec.young;
  }
  j["poisson"] = spec.poisson;
  j["load_magnitude"] = spec.load_magnitude;
  return j;
}

ProblemSpec problem_from_json_obj(const json& j) {
  ProblemSpec spec;
  const std::string kind = j.value("kind", "square2d");
  if (kind == "square2d")
    spec.kind = ProblemKind::Square2d;
  else if (kind == "bar1d")
    spec.kind = ProblemKind::Bar1d;
  else
    throw std::invalid_argument("unknown problem kind: " + kind);
  spec.px = j.value("px", 1);
  spec.py = j.value("py", 1);
  spec.mx = j.value("mx", 1);
  spec.my = j.value("my", 1);
  if (j.contains("young_pair")) {
    Checkerboard cb;
    cb.young_a = j["young_pair"].at(0).get<double>();
    cb.young_b = j["young_pair"].at(1).get<double>();
    cb.cell = j.value("cell", 1);
    spec.checkerboard = cb;
  } else if (j.contains("young")) {
    spec.young = j["young"].get<double>();
  }
  spec.poisson = j.value("poisson", 0.3);
  spec.load_magnitude = j.value("load_magnitude", 1.0);
  spec.validate();
  return spec;
}

json method_to_json_obj(const MethodConfig& cfg) {
  json j;
  j["method"] = kMethods.to(cfg.method);
  j["preconditioner"] = kPreconditioners.to(cfg.preconditioner);
  j["scaling"] = kScalings.to(cfg.scaling);
  j["projector_Q"] = kProjectors.to(cfg.projector_q);
  j["initialization"] = kInits.to(cfg.initialization);
  j["coarse"] = kCoarse.to(cfg.coarse);
  if (cfg.init_weight != InitWeight::DiagKbb) j["init_weight"] = kInitWeights.to(cfg.init_weight);
  if (cfg.constraint_source != ConstraintSource::None)
    j["constraint_source"] = kConstraintSources.to(cfg.constraint_source);
  if (cfg.method == Method::Hybrid) j["hybrid_split"] = cfg.hybrid_split;
  if (cfg.method == Method::Fetidp)
    j["fetidp_constraints"] = kFetidpConstraints.to(cfg.fetidp_constraints);
  if (cfg.method == Method::Mixed2) {
    j["mixed_stiffness"] = kMixed.to(cfg.mixed_stiffness);
    j["strip_layers"] = cfg.strip_layers;
  }
  if (cfg.solver != SolverChoice::Auto) j["solver"] = kSolvers.to(cfg.solver);
  j["tolerance"] = cfg.tolerance;
  j["max_iterations"] = cfg.max_iterations;
  if (!cfg.label.empty()) j["label"] = cfg.label;
  return j;
}

MethodConfig method_from_json_obj(const json& j) {
  const Method m = kMethods.from(j.at("method").get<std::string>(), "method");
  MethodConfig cfg = MethodConfig::for_method(m);
  if (j.contains("preconditioner"))
    cfg.preconditioner =
        kPreconditioners.from(j["preconditioner"].get<std::string>(), "preconditioner");
  if (j.contains("scaling"))
    cfg.scaling = kScalings.from(j["scaling"].get<std::string>(), "scaling");
  if (j.contains("projector_Q"))
    cfg.projector_q = kProjectors.from(j["projector_Q"].get<std::string>(), "projector_Q");
  if (j.contains("initialization"))
    cfg.initialization = kInits.from(j["initialization"].get<std::string>(), "initialization");
  if (j.contains("init_weight"))
    cfg.init_weight = kInitWeights.from(j["init_weight"].get<std::string>(), "init_weight");
  if (j.contains("coarse")) cfg.coarse = kCoarse.from(j["coarse"].get<std::string>(), "coarse");
  if (j.contains("constraint_source"))
    cfg.constraint_source =
        kConstraintSources.from(j["constraint_source"].get<std::string>(), "constraint_source");
  if (j.contains("hybrid_split")) cfg.hybrid_split = j["hybrid_split"].get<std::string>();
  if (j.contains("fetidp_constraints"))
    cfg.fetidp_constraints = kFetidpConstraints.from(
        j["fetidp_constraints"].get<std::string>(), "fetidp_constraints");
  if (j.contains("mixed_stiffness"))
    cfg.mixed_stiffness = kMixed.from(j["mixed_stiffness"].get<std::string>(), "mixed_stiffness");
  if (j.contains("strip_layers")) cfg.strip_layers = j["strip_layers"].get<int>();
  if (j.contains("solver")) cfg.solver = kSolvers.from(j["solver"].get<std::string>(), "solver");
  if (j.contains("tolerance")) cfg.tolerance = j["tolerance"].get<double>();
  if (j.contains("max_iterations")) cfg.max_iterations = j["max_iterations"].get<int>();
  if (j.contains("label")) cfg.label = j["label"].get<std::string>();
  cfg.validate();
  return cfg;
}

std::string row_label(const MethodConfig& cfg, size_t index) {
  if (!cfg.label.empty()) return cfg.label;
  std::ostringstream os;
  os << kMethods.to(cfg.method) << "_" << index;
  return os.str();
}

json table_to_json_obj(const ResultTable& table) {
  json j;
  j["axis_values"] = table.axis_values;
  j["rows"] = json::array();
  for (const ResultRow& r : table.rows) {
    json row;
    row["method"] = r.method;
    row["axis"] = r.axis_value;
    row["iterations"] = r.iterations;
    row["coarse_a"] = r.coarse_a;
    row["coarse_b"] = r.coarse_b;
    row["true_residual"] = r.true_residual;
    row["seconds"] = r.seconds;
    row["converged"] = r.converged;
    row["oracle_ok"] = r.oracle_ok;
    j["rows"].push_back(row);
  }
  j["trends"] = json::array();
  for (const TrendStats& t : table.trends) {
    json trend;
    trend["method"] = t.method;
    trend["growth_factor"] = t.growth_factor;
    if (t.has_fit) {
      trend["fit_a"] = t.fit_a;
      trend["fit_b"] = t.fit_b;
      trend["fit_residual"] = t.fit_residual;
    }
    j["trends"].push_back(trend);
  }
  return j;
}

ResultTable table_from_json_obj(const json& j) {
  ResultTable table;
  for (const auto& v : j.value("axis_values", json::array()))
    table.axis_values.push_back(v.get<double>());
  for (const auto& row : j.at("rows")) {
    ResultRow r;
    r.method = row.at("method").get<std::string>();
    r.axis_value = row.at("axis").get<double>();
    r.iterations = row.at("iterations").get<int>();
    r.coarse_a = row.at("coarse_a").get<int>();
    r.coarse_b = row.at("coarse_b").get<int>();
    r.true_residual = row.at("true_residual").get<double>();
    r.seconds = row.at("seconds").get<double>();
    r.converged = row.value("converged", true);
    r.oracle_ok = row.value("oracle_ok", true);
    table.rows.push_back(r);
  }
  for (const auto& trend : j.value("trends", json::array())) {
    TrendStats t;
    t.method = trend.at("method").get<std::string>();
    t.growth_factor = trend.value("growth_factor", 0.0);
    if (trend.contains("fit_a")) {
      t.has_fit = true;
      t.fit_a = trend["fit_a"].get<double>();
      t.fit_b = trend["fit_b"].get<double>();
      t.fit_residual = trend["fit_residual"].get<double>();
    }
    table.trends.push_back(t);
  }
  return table;
}

}  // namespace

void RunManifest::validate() const {
  problem.validate();
  if (methods.empty()) throw std::invalid_argument("manifest: empty method list");
  if (axis != SweepAxis::None && values.empty())
    throw std::invalid_argument("manifest: sweep axis without values");
  if (axis == SweepAxis::HeterogeneityRatio && problem.kind != ProblemKind::Square2d)
    throw std::invalid_argument("manifest: heterogeneity sweep needs the 2D problem");
  for (const MethodConfig& m : methods) m.validate();
  if (axis == SweepAxis::Subdomains)
    for (double v : values) {
      const int n = static_cast<int>(std::lround(v));
      const int r = static_cast<int>(std::lround(std::sqrt(double(n))));
      if (problem.kind == ProblemKind::Square2d && r * r != n)
        throw std::invalid_argument("manifest: subdomain counts must be perfect squares");
    }
}

const ResultRow* ResultTable::find(const std::string& method, double axis) const {
  for (const ResultRow& r : rows)
    if (r.method == method && r.axis_value == axis) return &r;
  return nullptr;
}

ProblemSpec apply_axis(const ProblemSpec& base, SweepAxis axis, double value) {
  ProblemSpec spec = base;
  switch (axis) {
    case SweepAxis::None: break;
    case SweepAxis::Subdomains: {
      const int n = static_cast<int>(std::lround(value));
      if (spec.kind == ProblemKind::Square2d) {
        const int r = static_cast<int>(std::lround(std::sqrt(double(n))));
        spec.px = spec.py = r;
      } else {
        spec.px = n;
      }
      break;
    }
    case SweepAxis::ElementsPerSubdomain: {
      const int m = static_cast<int>(std::lround(value));
      spec.mx = m;
      if (spec.kind == ProblemKind::Square2d) spec.my = m;
      if (spec.checkerboard) spec.checkerboard->cell = m;
      break;
    }
    case SweepAxis::HeterogeneityRatio: {
      Checkerboard cb = spec.checkerboard.value_or(Checkerboard{});
      cb.young_a = spec.checkerboard ? spec.checkerboard->young_a : spec.young;
      cb.young_b = cb.young_a / value;
      if (!spec.checkerboard) cb.cell = spec.mx;
      spec.checkerboard = cb;
      break;
    }
  }
  return spec;
}

CaseResult run_case(const Workspace& ws, const Vector& u_oracle, const MethodConfig& cfg) {
  CaseResult out;
  auto [u, report] = solve(ws, cfg);
  out.u = std::move(u);
  out.report = std::move(report);
  const double ref = std::max(u_oracle.norm(), 1e-300);
  out.oracle_mismatch = (out.u - u_oracle).norm() / ref;
  out.oracle_ok = out.report.converged && out.oracle_mismatch <= 10.0 * cfg.tolerance;
  return out;
}

ResultTable run_sweep(const RunManifest& manifest, bool write_files) {
  manifest.validate();
  ResultTable table;
  std::vector<double> axis_values =
      manifest.axis == SweepAxis::None ? std::vector<double>{0.0} : manifest.values;
  table.axis_values = axis_values;

  const bool emit_files = write_files && !manifest.out_dir.empty();
  if (emit_files) fs::create_directories(manifest.out_dir);

  for (double value : axis_values) {
    ProblemSpec spec = apply_axis(manifest.problem, manifest.axis, value);
    DecomposedProblem problem = build_problem(spec);
    Workspace ws(problem);  // shared across every method of this case
    Vector u_ref = oracle_solve(problem);

    for (size_t mi = 0; mi < manifest.methods.size(); ++mi) {
      MethodConfig cfg = manifest.methods[mi];
      if (manifest.tolerance > 0.0) cfg.tolerance = manifest.tolerance;
      CaseResult cr = run_case(ws, u_ref, cfg);

      ResultRow row;
      row.method = row_label(cfg, mi);
      row.axis_value = value;
      row.iterations = cr.report.iterations;
      row.coarse_a = cr.report.coarse_admissibility;
      row.coarse_b = cr.report.coarse_augmentation;
      row.true_residual = cr.report.true_residual;
      row.seconds = cr.report.seconds;
      row.converged = cr.report.converged;
      row.oracle_ok = cr.oracle_ok;
      table.rows.push_back(row);

      if (emit_files) {
        std::ostringstream stem;
        stem << "case_" << fmt(value) << "_" << row.method;
        std::ofstream(fs::path(manifest.out_dir) / (stem.str() + ".json"))
            << report_to_json(cr.report, cr.oracle_mismatch, cr.oracle_ok) << "\n";
        write_history_csv(fs::path(manifest.out_dir) / (stem.str() + "_history.csv"),
                          cr.report.history);
      }
    }
  }

  // per-method trend statistics over the axis
  if (axis_values.size() >= 2) {
    for (size_t mi = 0; mi < manifest.methods.size(); ++mi) {
      const std::string label = row_label(manifest.methods[mi], mi);
      std::vector<double> its;
      for (double v : axis_values) {
        const ResultRow* r = table.find(label, v);
        if (r) its.push_back(r->iterations);
      }
      if (its.size() != axis_values.size()) continue;
      TrendStats t;
      t.method = label;
      t.growth_factor = its.front() > 0 ? its.back() / its.front() : 0.0;
      if (manifest.axis == SweepAxis::ElementsPerSubdomain) {
        // least squares for iterations ~ a + b (1 + log(H/h))^2
        const int n = static_cast<int>(its.size());
        Matrix a(n, 2);
        Vector y(n);
        for (int i = 0; i < n; ++i) {
          const double g = 1.0 + std::log(axis_values[i]);
          a(i, 0) = 1.0;
          a(i, 1) = g * g;
          y[i] = its[i];
        }
        Vector coef = (a.transpose() * a).ldlt().solve(a.transpose() * y);
        t.has_fit = true;
        t.fit_a = coef[0];
        t.fit_b = coef[1];
        t.fit_residual = (a * coef - y).norm() / std::max(y.norm(), 1e-300);
      }
      table.trends.push_back(t);
    }
  }
  return table;
}

std::string emit(const ResultTable& table, TableFormat format, const std::string& out_dir,
                 const std::string& stem) {
  fs::create_directories(out_dir);
  fs::path path = fs::path(out_dir) / stem;
  if (format == TableFormat::Json) {
    path += ".json";
    std::ofstream(path) << table_to_json_obj(table).dump(2) << "\n";
  } else if (format == TableFormat::Csv) {
    path += ".csv";
    std::ofstream os(path);
    os << "method,axis,iterations,coarse_a,coarse_b,true_residual,seconds\n";
    for (const ResultRow& r : table.rows) {
      os << r.method << "," << fmt(r.axis_value) << "," << r.iterations << "," << r.coarse_a
         << "," << r.coarse_b << "," << fmt(r.true_residual) << "," << fmt(r.seconds);
      if (!r.converged || !r.oracle_ok) os << ",FLAGGED";
      os << "\n";
    }
  } else {
    path += ".md";
    std::ofstream os(path);
    // one row per method, one column per axis value, iteration counts inside
    os << "| method |";
    for (double v : table.axis_values) os << " " << fmt(v) << " |";
    os << "\n|---|";
    for (size_t i = 0; i < table.axis_values.size(); ++i) os << "---|";
    os << "\n";
    std::vector<std::string> seen;
    for (const ResultRow& r : table.rows)
      if (std::find(seen.begin(), seen.end(), r.method) == seen.end()) seen.push_back(r.method);
    for (const std::string& m : seen) {
      const ResultRow* first = nullptr;
      for (const ResultRow& r : table.rows)
        if (r.method == m && !first) first = &r;
      os << "| " << m << " SC:" << first->coarse_a << "+" << first->coarse_b << " |";
      for (double v : table.axis_values) {
        const ResultRow* r = table.find(m, v);
        if (!r)
          os << " - |";
        else if (!r->converged || !r->oracle_ok)
          os << " " << r->iterations << " (flagged) |";
        else
          os << " " << r->iterations << " |";
      }
      os << "\n";
    }
  }
  return path.string();
}

std::string reemit(const std::string& out_dir, TableFormat format) {
  std::ifstream in(fs::path(out_dir) / "results.json");
  if (!in) throw std::runtime_error("no stored results.json under " + out_dir);
  std::stringstream ss;
  ss << in.rdbuf();
  ResultTable table = result_table_from_json(ss.str());
  return emit(table, format, out_dir);
}

int run_manifest(const RunManifest& manifest, TableFormat format) {
  ResultTable table = run_sweep(manifest, true);
  emit(table, TableFormat::Json, manifest.out_dir);  // always keep the JSON store
  if (format != TableFormat::Json) emit(table, format, manifest.out_dir);
  int flagged = 0;
  for (const ResultRow& r : table.rows)
    if (!r.converged || !r.oracle_ok) ++flagged;
  return flagged;
}

// ---- JSON text forms ------------------------------------------------------

std::string problem_spec_to_json(const ProblemSpec& spec) {
  return problem_to_json_obj(spec).dump(2);
}
ProblemSpec problem_spec_from_json(const std::string& text) {
  return problem_from_json_obj(json::parse(text));
}
std::string method_config_to_json(const MethodConfig& cfg) {
  return method_to_json_obj(cfg).dump(2);
}
MethodConfig method_config_from_json(const std::string& text) {
  return method_from_json_obj(json::parse(text));
}

std::string report_to_json(const SolverReport& rep, double oracle_mismatch, bool oracle_ok) {
  json j;
  j["method"] = rep.method;
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["true_residual"] = rep.true_residual;
  j["coarse_a"] = rep.coarse_admissibility;
  j["coarse_b"] = rep.coarse_augmentation;
  j["seconds"] = rep.seconds;
  if (!rep.notes.empty()) j["notes"] = rep.notes;
  j["oracle_mismatch"] = oracle_mismatch;
  j["oracle_ok"] = oracle_ok;
  return j.dump(2);
}

std::string manifest_to_json(const RunManifest& manifest) {
  json j;
  j["problem"] = problem_to_json_obj(manifest.problem);
  j["methods"] = json::array();
  for (const MethodConfig& m : manifest.methods) j["methods"].push_back(method_to_json_obj(m));
  j["sweep"] = {{"axis", kAxes.to(manifest.axis)}, {"values", manifest.values}};
  j["out_dir"] = manifest.out_dir;
  j["seed"] = manifest.seed;
  if (manifest.tolerance > 0.0) j["tolerance"] = manifest.tolerance;
  return j.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  RunManifest manifest;
  manifest.problem = problem_from_json_obj(j.at("problem"));
  for (const auto& m : j.at("methods")) manifest.methods.push_back(method_from_json_obj(m));
  if (j.contains("sweep")) {
    manifest.axis = kAxes.from(j["sweep"].value("axis", "none"), "sweep axis");
    for (const auto& v : j["sweep"].value("values", json::array()))
      manifest.values.push_back(v.get<double>());
  }
  manifest.out_dir = j.value("out_dir", "out");
  manifest.seed = j.value("seed", 0u);
  manifest.tolerance = j.value("tolerance", 0.0);
  manifest.validate();
  return manifest;
}

std::string manifest_template_json() {
  RunManifest manifest;
  manifest.problem.kind = ProblemKind::Square2d;
  manifest.problem.px = manifest.problem.py = 4;
  manifest.problem.mx = manifest.problem.my = 16;

  MethodConfig bdd = MethodConfig::for_method(Method::Bdd);
  bdd.label = "primal_coarse";
  MethodConfig feti = MethodConfig::for_method(Method::Feti);
  feti.label = "dual_dirichlet";
  manifest.methods = {bdd, feti};
  manifest.axis = SweepAxis::ElementsPerSubdomain;
  manifest.values = {8, 16};
  manifest.out_dir = "out";
  return manifest_to_json(manifest);
}

std::string result_table_to_json(const ResultTable& table) {
  return table_to_json_obj(table).dump(2);
}
ResultTable result_table_from_json(const std::string& text) {
  return table_from_json_obj(json::parse(text));
}

namespace {

void write_dense_csv(const fs::path& path, const Matrix& m) {
  std::ofstream os(path);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) os << (j ? "," : "") << fmt(m(i, j));
    os << "\n";
  }
}

}  // namespace

void dump_operators(const DecomposedProblem& problem, const std::string& out_dir) {
  fs::create_directories(out_dir);
  InterfaceTopology topo = build_topology(problem);
  LocalOperators ops = LocalOperators::build(problem, topo);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    const std::string tag = "_s" + std::to_string(s) + ".csv";
    write_dense_csv(fs::path(out_dir) / ("trace" + tag), dense_trace(topo, s));
    write_dense_csv(fs::path(out_dir) / ("assembly_primal" + tag),
                    dense_primal_assembly(topo, s));
    write_dense_csv(fs::path(out_dir) / ("assembly_dual_redundant" + tag),
                    dense_dual_assembly(topo, DualFlavor::Redundant, s));
    write_dense_csv(fs::path(out_dir) / ("assembly_dual_nonredundant" + tag),
                    dense_dual_assembly(topo, DualFlavor::NonRedundant, s));
    write_dense_csv(fs::path(out_dir) / ("assembly_dual_orthonormal" + tag),
                    dense_dual_assembly(topo, DualFlavor::Orthonormal, s));
    write_dense_csv(fs::path(out_dir) / ("condensed_stiffness" + tag),
                    ops.sub[s].schur_primal_dense());
    write_dense_csv(fs::path(out_dir) / ("boundary_modes" + tag),
                    ops.sub[s].boundary_kernel());
  }
}

void write_history_csv(const std::string& path, const std::vector<IterationRecord>& history) {
  std::ofstream os(path);
  os << "iter,res,relres,trueres\n";
  for (const IterationRecord& r : history)
    os << r.iter << "," << fmt(r.res) << "," << fmt(r.relres) << "," << fmt(r.metric) << "\n";
}

}  // namespace ddlab
