/* ddlab — decomposed-interface solver laboratory, C API.
 *
 * All entry points return ddlab_status (or a handle/ value directly where
 * noted). On failure the thread-local message from ddlab_last_error()
 * describes what went wrong. Handles are opaque and freed with the matching
 * *_free call; every accessor tolerates NULL and reports DDLAB_ERR_BAD_HANDLE.
 */
#ifndef DDLAB_H
#define DDLAB_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ddlab_status {
  DDLAB_OK = 0,
  DDLAB_ERR_INVALID_ARGUMENT = 1,
  DDLAB_ERR_RUNTIME = 2,
  DDLAB_ERR_BAD_HANDLE = 3
} ddlab_status;

typedef struct ddlab_problem ddlab_problem;
typedef struct ddlab_report ddlab_report;

const char* ddlab_version(void);
/* Thread-local message for the most recent failure. */
const char* ddlab_last_error(void);

/* Worker threads for per-subdomain operator work (1 = serial). */
void ddlab_set_threads(int n);

/* ---- problems ---------------------------------------------------------- */

/* spec_json: {kind, px, py, mx, my, young | young_pair+cell, poisson,
 * load_magnitude}. The operators needed by the solvers are built lazily on
 * first use and cached inside the handle. */
ddlab_status ddlab_problem_create(const char* spec_json, ddlab_problem** out);
void ddlab_problem_free(ddlab_problem* problem);

int ddlab_problem_num_dofs(const ddlab_problem* problem);
int ddlab_problem_num_subdomains(const ddlab_problem* problem);

/* Direct sparse reference solution; u must hold num_dofs entries. */
ddlab_status ddlab_problem_oracle_solve(ddlab_problem* problem, double* u, size_t len);

/* ---- solving ----------------------------------------------------------- */

/* method_json uses the documented configuration fields (method,
 * preconditioner, scaling, projector_Q, initialization, coarse, hybrid_split,
 * fetidp_constraints, ...). */
ddlab_status ddlab_solve(ddlab_problem* problem, const char* method_json,
                         ddlab_report** out);
void ddlab_report_free(ddlab_report* report);

const char* ddlab_report_json(const ddlab_report* report);
int ddlab_report_iterations(const ddlab_report* report);
int ddlab_report_converged(const ddlab_report* report);
double ddlab_report_true_residual(const ddlab_report* report);
size_t ddlab_report_history_length(const ddlab_report* report);
ddlab_status ddlab_report_history_row(const ddlab_report* report, size_t index, int* iter,
                                      double* res, double* relres, double* trueres);
/* Reconstructed displacement field; u must hold num_dofs entries. */
ddlab_status ddlab_report_solution(const ddlab_report* report, double* u, size_t len);

/* ---- batch campaigns ---------------------------------------------------- */

/* Template manifest covering the common fields. */
const char* ddlab_manifest_template(void);

/* Runs a full manifest: builds each case once, runs every method against the
 * direct solve, writes per-case reports, history CSVs and the aggregated
 * table under out_dir. format is "csv", "json" or "markdown".
 * *flagged_cases (optional) receives the number of non-converged or
 * oracle-failing runs. */
ddlab_status ddlab_run_manifest(const char* manifest_json, const char* out_dir_override,
                                const char* format, double tolerance_override,
                                int* flagged_cases);

/* Re-emits the stored table (results.json) under dir in another format. */
ddlab_status ddlab_reemit(const char* dir, const char* format);

/* Debug aid: writes the interface operators of a problem (trace, assembly in
 * all three connectivity flavors, condensed stiffness, boundary modes) as
 * dense CSV matrices under dir. */
ddlab_status ddlab_dump_operators(const char* spec_json, const char* dir);

#ifdef __cplusplus
}
#endif

#endif /* DDLAB_H */
