#include <doctest.h>

#include "ddlab/bench.hpp"
#include "fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ddlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// CSV with the seconds column blanked (wall time is not reproducible).
std::string mask_seconds(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) {
    int commas = 0;
    size_t start = 0, end = line.size();
    for (size_t i = 0; i < line.size(); ++i)
      if (line[i] == ',') {
        ++commas;
        if (commas == 6) start = i + 1;
        if (commas == 7) end = i;
      }
    if (commas >= 6) line = line.substr(0, start) + "<t>" + (commas >= 7 ? line.substr(end) : "");
    out << line << "\n";
  }
  return out.str();
}

RunManifest tiny_manifest(const std::string& out_dir) {
  RunManifest manifest;
  manifest.problem = fixtures::square(2, 2);
  MethodConfig bdd = MethodConfig::for_method(Method::Bdd);
  bdd.label = "primal";
  MethodConfig feti = MethodConfig::for_method(Method::Feti);
  feti.label = "dual";
  manifest.methods = {bdd, feti};
  manifest.axis = SweepAxis::ElementsPerSubdomain;
  manifest.values = {2, 4};
  manifest.out_dir = out_dir;
  return manifest;
}

}  // namespace

TEST_CASE("configuration documents round-trip") {
  ProblemSpec spec = fixtures::het(4, 8, 1e5);
  std::string text = problem_spec_to_json(spec);
  ProblemSpec back = problem_spec_from_json(text);
  CHECK(back.px == spec.px);
  CHECK(back.checkerboard.has_value());
  CHECK(back.checkerboard->young_b == doctest::Approx(spec.checkerboard->young_b));

  MethodConfig cfg = MethodConfig::for_method(Method::Feti);
  cfg.scaling = ScalingKind::Stiffness;
  cfg.projector_q = ProjectorQ::Superlumped;
  cfg.initialization = Initialization::CondensedSplit;
  cfg.label = "dual_split";
  MethodConfig cback = method_config_from_json(method_config_to_json(cfg));
  CHECK(cback.method == Method::Feti);
  CHECK(cback.scaling == ScalingKind::Stiffness);
  CHECK(cback.projector_q == ProjectorQ::Superlumped);
  CHECK(cback.initialization == Initialization::CondensedSplit);
  CHECK(cback.label == "dual_split");

  // exact enum spellings
  CHECK(method_config_to_json(cfg).find("\"condensed_split\"") != std::string::npos);
  CHECK(method_config_to_json(cfg).find("\"superlumped\"") != std::string::npos);
  CHECK_THROWS_AS(method_config_from_json("{\"method\":\"nope\"}"), std::invalid_argument);

  RunManifest manifest = tiny_manifest("unused");
  RunManifest mback = manifest_from_json(manifest_to_json(manifest));
  CHECK(mback.methods.size() == 2);
  CHECK(mback.axis == SweepAxis::ElementsPerSubdomain);
  CHECK(mback.values == std::vector<double>{2, 4});

  RunManifest tmpl = manifest_from_json(manifest_template_json());
  CHECK(!tmpl.methods.empty());
}

TEST_CASE("sweep axes rewrite the problem description") {
  ProblemSpec base = fixtures::square(2, 4);
  ProblemSpec p1 = apply_axis(base, SweepAxis::Subdomains, 16);
  CHECK(p1.px == 4);
  CHECK(p1.py == 4);
  ProblemSpec p2 = apply_axis(base, SweepAxis::ElementsPerSubdomain, 8);
  CHECK(p2.mx == 8);
  CHECK(p2.my == 8);
  ProblemSpec p3 = apply_axis(base, SweepAxis::HeterogeneityRatio, 100.0);
  REQUIRE(p3.checkerboard.has_value());
  CHECK(p3.checkerboard->young_a / p3.checkerboard->young_b == doctest::Approx(100.0));
}

TEST_CASE("manifest validation") {
  RunManifest manifest = tiny_manifest("unused");
  manifest.methods.clear();
  CHECK_THROWS_AS(manifest.validate(), std::invalid_argument);

  manifest = tiny_manifest("unused");
  manifest.axis = SweepAxis::Subdomains;
  manifest.values = {5};  // not a perfect square
  CHECK_THROWS_AS(manifest.validate(), std::invalid_argument);

  manifest = tiny_manifest("unused");
  manifest.axis = SweepAxis::ElementsPerSubdomain;
  manifest.values.clear();
  CHECK_THROWS_AS(manifest.validate(), std::invalid_argument);
}

TEST_CASE("sweep runs every method against the reference solution") {
  const fs::path dir = fs::temp_directory_path() / "ddlab_bench_test";
  fs::remove_all(dir);
  RunManifest manifest = tiny_manifest(dir.string());
  ResultTable table = run_sweep(manifest);

  REQUIRE(table.rows.size() == 4);
  for (const ResultRow& row : table.rows) {
    CHECK(row.converged);
    CHECK(row.oracle_ok);
    CHECK(row.true_residual <= 1e-5);
  }
  CHECK(table.find("primal", 2) != nullptr);
  CHECK(table.find("dual", 4) != nullptr);
  REQUIRE(table.trends.size() == 2);
  CHECK(table.trends[0].has_fit);

  // per-case artifacts: report JSON + history CSV
  CHECK(fs::exists(dir / "case_2_primal.json"));
  CHECK(fs::exists(dir / "case_4_dual_history.csv"));
  const std::string history = slurp(dir / "case_4_dual_history.csv");
  CHECK(history.rfind("iter,res,relres,trueres\n", 0) == 0);

  // emit in all three formats
  const std::string csv = slurp(emit(table, TableFormat::Csv, dir.string()));
  CHECK(csv.rfind("method,axis,iterations,coarse_a,coarse_b,true_residual,seconds\n", 0) == 0);
  const std::string md = slurp(emit(table, TableFormat::Markdown, dir.string()));
  CHECK(md.find("SC:") != std::string::npos);
  const std::string js = slurp(emit(table, TableFormat::Json, dir.string()));
  ResultTable parsed = result_table_from_json(js);
  CHECK(parsed.rows.size() == table.rows.size());
  CHECK(parsed.rows[0].iterations == table.rows[0].iterations);

  // re-emission from the stored table
  emit(table, TableFormat::Json, dir.string());
  const std::string repath = reemit(dir.string(), TableFormat::Csv);
  CHECK(slurp(repath) == csv);

  fs::remove_all(dir);
}

TEST_CASE("identical manifests give identical tables") {
  const fs::path dir1 = fs::temp_directory_path() / "ddlab_det1";
  const fs::path dir2 = fs::temp_directory_path() / "ddlab_det2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  RunManifest m1 = tiny_manifest(dir1.string());
  RunManifest m2 = tiny_manifest(dir2.string());
  ResultTable t1 = run_sweep(m1);
  ResultTable t2 = run_sweep(m2);

  const std::string c1 = slurp(emit(t1, TableFormat::Csv, dir1.string()));
  const std::string c2 = slurp(emit(t2, TableFormat::Csv, dir2.string()));
  CHECK(mask_seconds(c1) == mask_seconds(c2));

  // histories carry no timing and must be byte-identical
  CHECK(slurp(dir1 / "case_2_primal_history.csv") == slurp(dir2 / "case_2_primal_history.csv"));
  CHECK(slurp(dir1 / "case_4_dual_history.csv") == slurp(dir2 / "case_4_dual_history.csv"));

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("non-convergence flags the row and the run") {
  const fs::path dir = fs::temp_directory_path() / "ddlab_flagged";
  fs::remove_all(dir);
  RunManifest manifest;
  manifest.problem = fixtures::square(2, 4);
  MethodConfig starved = MethodConfig::for_method(Method::Bdd);
  starved.max_iterations = 1;
  starved.label = "starved";
  manifest.methods = {starved};
  manifest.out_dir = dir.string();

  const int flagged = run_manifest(manifest, TableFormat::Csv);
  CHECK(flagged == 1);
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.find("FLAGGED") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("tolerance override reaches every method") {
  RunManifest manifest = tiny_manifest("");
  manifest.out_dir.clear();
  manifest.tolerance = 1e-3;
  ResultTable loose = run_sweep(manifest, false);
  manifest.tolerance = 1e-9;
  ResultTable tight = run_sweep(manifest, false);
  for (size_t i = 0; i < loose.rows.size(); ++i)
    CHECK(loose.rows[i].iterations <= tight.rows[i].iterations);
}
