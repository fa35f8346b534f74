#include "ddlab.h"

#include "ddlab/bench.hpp"
#include "ddlab/parallel.hpp"

#include <memory>
#include <stdexcept>
#include <string>

struct ddlab_problem {
  ddlab::DecomposedProblem problem;
  std::unique_ptr<ddlab::Workspace> workspace;  // lazily built, reused across solves

  ddlab::Workspace& ws() {
    if (!workspace) workspace = std::make_unique<ddlab::Workspace>(problem);
    return *workspace;
  }
};

struct ddlab_report {
  ddlab::SolverReport report;
  ddlab::Vector u;
  std::string json;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
ddlab_status guarded(Fn&& fn) {
  try {
    fn();
    return DDLAB_OK;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return DDLAB_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    set_error(e.what());
    return DDLAB_ERR_RUNTIME;
  }
}

ddlab::TableFormat parse_format(const char* format) {
  const std::string f = format ? format : "csv";
  if (f == "csv") return ddlab::TableFormat::Csv;
  if (f == "json") return ddlab::TableFormat::Json;
  if (f == "markdown") return ddlab::TableFormat::Markdown;
  throw std::invalid_argument("unknown table format: " + f);
}

}  // namespace

extern "C" {

const char* ddlab_version(void) { return "0.1.0"; }

const char* ddlab_last_error(void) { return g_last_error.c_str(); }

void ddlab_set_threads(int n) { ddlab::set_worker_threads(n); }

ddlab_status ddlab_problem_create(const char* spec_json, ddlab_problem** out) {
  if (!spec_json || !out) {
    set_error("null argument");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<ddlab_problem>();
    handle->problem = ddlab::build_problem(ddlab::problem_spec_from_json(spec_json));
    *out = handle.release();
  });
}

void ddlab_problem_free(ddlab_problem* problem) { delete problem; }

int ddlab_problem_num_dofs(const ddlab_problem* problem) {
  return problem ? problem->problem.num_global_dofs : -1;
}

int ddlab_problem_num_subdomains(const ddlab_problem* problem) {
  return problem ? problem->problem.num_subdomains() : -1;
}

ddlab_status ddlab_problem_oracle_solve(ddlab_problem* problem, double* u, size_t len) {
  if (!problem) {
    set_error("null problem handle");
    return DDLAB_ERR_BAD_HANDLE;
  }
  if (!u || len < static_cast<size_t>(problem->problem.num_global_dofs)) {
    set_error("output buffer too small");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    ddlab::Vector sol = ddlab::oracle_solve(problem->problem);
    for (int i = 0; i < sol.size(); ++i) u[i] = sol[i];
  });
}

ddlab_status ddlab_solve(ddlab_problem* problem, const char* method_json,
                         ddlab_report** out) {
  if (!problem) {
    set_error("null problem handle");
    return DDLAB_ERR_BAD_HANDLE;
  }
  if (!method_json || !out) {
    set_error("null argument");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    ddlab::MethodConfig cfg = ddlab::method_config_from_json(method_json);
    auto [u, report] = ddlab::solve(problem->ws(), cfg);
    auto handle = std::make_unique<ddlab_report>();
    handle->u = std::move(u);
    handle->report = std::move(report);
    handle->json = ddlab::report_to_json(handle->report, 0.0, handle->report.converged);
    *out = handle.release();
  });
}

void ddlab_report_free(ddlab_report* report) { delete report; }

const char* ddlab_report_json(const ddlab_report* report) {
  return report ? report->json.c_str() : nullptr;
}

int ddlab_report_iterations(const ddlab_report* report) {
  return report ? report->report.iterations : -1;
}

int ddlab_report_converged(const ddlab_report* report) {
  return report ? (report->report.converged ? 1 : 0) : -1;
}

double ddlab_report_true_residual(const ddlab_report* report) {
  return report ? report->report.true_residual : -1.0;
}

size_t ddlab_report_history_length(const ddlab_report* report) {
  return report ? report->report.history.size() : 0;
}

ddlab_status ddlab_report_history_row(const ddlab_report* report, size_t index, int* iter,
                                      double* res, double* relres, double* trueres) {
  if (!report) {
    set_error("null report handle");
    return DDLAB_ERR_BAD_HANDLE;
  }
  if (index >= report->report.history.size()) {
    set_error("history index out of range");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  const ddlab::IterationRecord& r = report->report.history[index];
  if (iter) *iter = r.iter;
  if (res) *res = r.res;
  if (relres) *relres = r.relres;
  if (trueres) *trueres = r.metric;
  return DDLAB_OK;
}

ddlab_status ddlab_report_solution(const ddlab_report* report, double* u, size_t len) {
  if (!report) {
    set_error("null report handle");
    return DDLAB_ERR_BAD_HANDLE;
  }
  if (!u || len < static_cast<size_t>(report->u.size())) {
    set_error("output buffer too small");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  for (int i = 0; i < report->u.size(); ++i) u[i] = report->u[i];
  return DDLAB_OK;
}

const char* ddlab_manifest_template(void) {
  thread_local std::string tmpl;
  tmpl = ddlab::manifest_template_json();
  return tmpl.c_str();
}

ddlab_status ddlab_run_manifest(const char* manifest_json, const char* out_dir_override,
                                const char* format, double tolerance_override,
                                int* flagged_cases) {
  if (!manifest_json) {
    set_error("null manifest");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    ddlab::RunManifest manifest = ddlab::manifest_from_json(manifest_json);
    if (out_dir_override && *out_dir_override) manifest.out_dir = out_dir_override;
    if (tolerance_override > 0.0) manifest.tolerance = tolerance_override;
    const int flagged = ddlab::run_manifest(manifest, parse_format(format));
    if (flagged_cases) *flagged_cases = flagged;
  });
}

ddlab_status ddlab_reemit(const char* dir, const char* format) {
  if (!dir) {
    set_error("null directory");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { ddlab::reemit(dir, parse_format(format)); });
}

ddlab_status ddlab_dump_operators(const char* spec_json, const char* dir) {
  if (!spec_json || !dir) {
    set_error("null argument");
    return DDLAB_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    ddlab::DecomposedProblem problem =
        ddlab::build_problem(ddlab::problem_spec_from_json(spec_json));
    ddlab::dump_operators(problem, dir);
  });
}

}  // extern "C"
