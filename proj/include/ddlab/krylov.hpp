#pragma once

#include "ddlab/problem.hpp"

#include <functional>
#include <vector>

namespace ddlab {

/// Matrix-free operator handle.
struct LinearMap {
  int dim = 0;
  std::function<Vector(const Vector&)> apply;

  Vector operator()(const Vector& x) const { return apply(x); }
  static LinearMap identity(int n);
  static LinearMap from_dense(Matrix m);
};

enum class Reorthogonalization { None, Full };

struct KrylovConfig {
  double tolerance = 1e-6;
  int max_iterations = 500;
  Reorthogonalization reorth = Reorthogonalization::Full;
  bool record_history = true;
  /// Custom convergence measure evaluated on (iterate, residual); defaults to
  /// ||r|| / ||rhs||. Conjugate-gradient drivers only.
  std::function<double(const Vector& x, const Vector& r)> stop_metric;
  /// Per-iteration probe. CG passes (iter, iterate, residual); GMRes forms the
  /// iterate on demand, which costs a triangular solve per call.
  std::function<void(int, const Vector& x, const Vector& r)> observer;
};

struct IterationRecord {
  int iter = 0;
  double res = 0.0;      // solver residual norm
  double relres = 0.0;   // relative to the initial residual
  double metric = 0.0;   // convergence measure actually monitored
};

struct KrylovResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
  double final_metric = 0.0;
  std::vector<IterationRecord> history;
};

/// Initialization + search-space projector handling a constrained or
/// augmented resolution. Trivial instance: x0 = 0, P = identity.
struct ProjectorPair {
  int dim = 0;
  Vector x0;
  std::function<Vector(const Vector&)> project;    // P
  std::function<Vector(const Vector&)> project_t;  // P^T (unset for the
                                                   // nonsymmetric augmented case)
  int admissibility_size = 0;
  int augmentation_size = 0;
  /// Constraint multipliers recovered from an (unprojected) residual.
  std::function<Vector(const Vector&)> multipliers;

  bool trivial() const { return !project; }
  Vector apply(const Vector& v) const { return project ? project(v) : v; }
  Vector apply_t(const Vector& v) const { return project_t ? project_t(v) : v; }
};

ProjectorPair identity_projector(int n);

/// Initialization/projection for a hard constraint G^T x = e, with Q shaping
/// the projector. Pass `allow_rank_deficient` to fall back to a rank-revealing
/// solve instead of failing on a singular coarse matrix.
ProjectorPair make_admissibility_projector(const Matrix& G, const Vector& e,
                                           const LinearMap& Q,
                                           bool allow_rank_deficient = false);
/// Variant with distinct constraint row/column blocks (the constraint reads
/// Grow^T x = e while the multiplier column is Gcol).
ProjectorPair make_admissibility_projector(const Matrix& Gcol, const Matrix& Grow,
                                           const Vector& e, const LinearMap& Q,
                                           bool allow_rank_deficient = false);

/// Augmented resolution: the part of the solution in range(C) is captured at
/// initialization and C^T r = 0 is maintained. `symmetric` enables the cheap
/// transpose using the cached image S C.
ProjectorPair make_augmentation_projector(const Matrix& C, const LinearMap& S,
                                          const Vector& b, bool symmetric = true,
                                          const LinearMap* S_transpose = nullptr);

/// Two-level strategy: admissibility first, then augmentation made consistent
/// with it (effective constraint directions P C).
ProjectorPair nest_projectors(const ProjectorPair& admissibility, const Matrix& C,
                              const LinearMap& S, const Vector& b, bool symmetric = true,
                              const LinearMap* S_transpose = nullptr);

/// Preconditioned conjugate gradient (optionally fully reorthogonalized)
/// on the projected system induced by `pair`.
KrylovResult projected_cg(const LinearMap& op, const Vector& rhs,
                          const LinearMap* precond, const ProjectorPair& pair,
                          const KrylovConfig& config);

/// Plain (P)CG.
KrylovResult cg(const LinearMap& op, const Vector& rhs, const LinearMap* precond,
                const KrylovConfig& config);

/// Left-preconditioned GMRes with modified Gram-Schmidt Arnoldi and
/// incremental residual norms; no restart.
KrylovResult gmres(const LinearMap& op, const Vector& rhs, const LinearMap* precond,
                   const KrylovConfig& config);

}  // namespace ddlab
