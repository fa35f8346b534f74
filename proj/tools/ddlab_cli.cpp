// Batch driver over the shared-library C API: generate a manifest template,
// run a campaign, or re-emit stored results.

#include <CLI11.hpp>

#include "ddlab.h"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

int fail(const std::string& what) {
  std::cerr << "ddlab: " << what << ": " << ddlab_last_error() << "\n";
  return 2;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--manifest", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddlab — decomposed-interface solver laboratory"};
  app.require_subcommand(1);

  std::string manifest_path, out_dir, format = "csv";
  int threads = 1;
  double tol = 0.0;

  CLI::App* gen = app.add_subcommand("gen", "write a template manifest");
  std::string gen_path;
  gen->add_option("--manifest", gen_path, "output path (stdout when omitted)");

  CLI::App* run = app.add_subcommand("run", "execute a manifest");
  run->add_option("--manifest", manifest_path, "manifest JSON")->required();
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--format", format, "table format: csv|json|markdown")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));
  run->add_option("--threads", threads, "worker threads for subdomain work");
  run->add_option("--tol", tol, "override the convergence tolerance");

  CLI::App* report = app.add_subcommand("report", "re-emit a stored results table");
  report->add_option("--out", out_dir, "directory holding results.json")->required();
  report->add_option("--format", format, "table format: csv|json|markdown")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));

  std::string dump_spec;
  CLI::App* dump = app.add_subcommand("dump", "write interface operators as CSV matrices");
  dump->add_option("--problem", dump_spec, "problem spec JSON file")->required();
  dump->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    const char* tmpl = ddlab_manifest_template();
    if (gen_path.empty()) {
      std::cout << tmpl << "\n";
    } else {
      std::ofstream out(gen_path);
      if (!out) {
        std::cerr << "ddlab: cannot write " << gen_path << "\n";
        return 2;
      }
      out << tmpl << "\n";
      std::cout << "wrote " << gen_path << "\n";
    }
    return 0;
  }

  if (run->parsed()) {
    ddlab_set_threads(threads);
    std::string manifest;
    try {
      manifest = slurp(manifest_path);
    } catch (const CLI::Error& e) {
      std::cerr << "ddlab: " << e.what() << "\n";
      return 2;
    }
    int flagged = 0;
    const ddlab_status st =
        ddlab_run_manifest(manifest.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(),
                           format.c_str(), tol, &flagged);
    if (st != DDLAB_OK) return fail("run failed");
    if (flagged > 0) {
      std::cerr << "ddlab: " << flagged << " case(s) flagged (non-converged or off-reference)\n";
      return 1;
    }
    std::cout << "all cases converged and match the direct solve\n";
    return 0;
  }

  if (report->parsed()) {
    if (ddlab_reemit(out_dir.c_str(), format.c_str()) != DDLAB_OK)
      return fail("report failed");
    std::cout << "re-emitted " << out_dir << " as " << format << "\n";
    return 0;
  }

  if (dump->parsed()) {
    std::string spec;
    try {
      spec = slurp(dump_spec);
    } catch (const CLI::Error& e) {
      std::cerr << "ddlab: " << e.what() << "\n";
      return 2;
    }
    if (ddlab_dump_operators(spec.c_str(), out_dir.c_str()) != DDLAB_OK)
      return fail("dump failed");
    std::cout << "wrote operator matrices to " << out_dir << "\n";
    return 0;
  }
  return 0;
}
