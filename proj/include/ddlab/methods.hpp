#pragma once

#include "ddlab/krylov.hpp"
#include "ddlab/local_ops.hpp"

#include <memory>
#include <string>

namespace ddlab {

enum class Method { Bdd, Feti, Pfeti, Afeti, Hybrid, Fetidp, Bddc, Mixed2 };
enum class Preconditioner { None, Neumann, Dirichlet, Lumped, Superlumped };
/// Shaping operator of the admissibility projector. `Multiplicity` is the
/// diagonal of inverse interface multiplicities, the choice under which the
/// orthonormal-connectivity method reproduces the classical dual iterates.
enum class ProjectorQ { Identity, Multiplicity, Superlumped, Lumped, Dirichlet };
enum class Initialization { Zero, ClassicalSplit, CondensedSplit };
/// Weight used by the split initializations. DualSchur builds the exact dense
/// dual operator and is meant for tiny fixtures only.
enum class InitWeight { DiagKbb, DualSchur };
enum class CoarseMode { AutoRbm, None };
enum class ConstraintSource { None, Corners, Custom };
enum class FetidpConstraints { Corners, CornersPlusEdgeAverages };
enum class SolverChoice { Auto, Gmres };
enum class MixedStiffness { NeighborSchur, NeighborStrip, NeighborKbb, Zero };

struct MethodConfig {
  Method method = Method::Bdd;
  Preconditioner preconditioner = Preconditioner::Neumann;
  ScalingKind scaling = ScalingKind::Multiplicity;
  ProjectorQ projector_q = ProjectorQ::Identity;
  Initialization initialization = Initialization::Zero;
  InitWeight init_weight = InitWeight::DiagKbb;
  CoarseMode coarse = CoarseMode::AutoRbm;
  ConstraintSource constraint_source = ConstraintSource::None;
  Matrix custom_constraints;  // dual-side augmentation columns, when Custom
  std::string hybrid_split = "D-P";  // per-component letters, or all-d / all-p / alternate
  FetidpConstraints fetidp_constraints = FetidpConstraints::Corners;
  bool edge_average_stiffness_scaled = false;
  SolverChoice solver = SolverChoice::Auto;
  MixedStiffness mixed_stiffness = MixedStiffness::NeighborSchur;
  int strip_layers = 2;
  double tolerance = 1e-6;
  int max_iterations = 500;
  std::string label;

  /// Test-only probe: (iteration, iterate, projected residual).
  std::function<void(int, const Vector&, const Vector&)> observer;
  /// Test-only override of the recondensation corner set (primal dof ids).
  std::vector<int> custom_corners;

  static MethodConfig for_method(Method m);
  void validate() const;  // rejects incompatible combinations
};

struct SolverReport {
  std::string method;
  int iterations = 0;
  bool converged = false;
  double true_residual = 0.0;  // ||K u - f|| / ||f|| of the reconstructed field
  int coarse_admissibility = 0;
  int coarse_augmentation = 0;
  double seconds = 0.0;
  std::string notes;
  std::vector<IterationRecord> history;
};

/// Shared immutable state: topology, per-subdomain operators, assembled system.
struct Workspace {
  const DecomposedProblem* problem = nullptr;
  InterfaceTopology topology;
  LocalOperators ops;
  SparseMatrix K;
  Vector f;
  double f_norm = 0.0;

  explicit Workspace(const DecomposedProblem& p);
};

/// ||K u - f|| / ||f||.
double global_residual(const Workspace& ws, const Vector& u);

/// Cheap dual-side estimate of the global residual from the projected
/// residual (displacement jump): the boundary reaction of the weighted-average
/// reconstruction.
double dual_residual_estimate(const Workspace& ws, const ScalingSet& sc,
                              DualFlavor flavor, const Vector& jump);

/// Unique interface displacement + per-subdomain interior completion.
Vector reconstruct_from_interface(const Workspace& ws, const Vector& u_primal);

/// Corner dofs: every dof of a node with multiplicity >= 3 plus the endpoint
/// nodes of each subdomain-pair edge.
std::vector<int> corner_primal_dofs(const Workspace& ws);

enum class ConstraintSide { Primal, Dual };

/// Optional-constraint matrix on the chosen interface for the corner set.
Matrix corner_constraint_matrix(const Workspace& ws, ConstraintSide side,
                                const ScalingSet& sc);

/// Dual-method initial effort before admissibility correction (the effort
/// split, zero for Initialization::Zero).
Vector feti_initial_split(const Workspace& ws, const ScalingSet& sc,
                          Initialization kind, InitWeight weight);

/// Per-subdomain change of basis turning each edge's average into a single
/// leading dof; identical on both sides of every edge, orthogonal.
std::vector<SparseMatrix> build_change_of_basis(const Workspace& ws,
                                                bool stiffness_scaled);

/// The corner-recondensed primal preconditioner as a standalone operator
/// (coarse corner solve plus clamped local solves behind the interface
/// weights); symmetric by construction.
LinearMap bddc_preconditioner(const Workspace& ws, ScalingKind scaling,
                              int* coarse_size = nullptr);

std::pair<Vector, SolverReport> solve_bdd(const Workspace& ws, const MethodConfig& cfg);
std::pair<Vector, SolverReport> solve_feti(const Workspace& ws, const MethodConfig& cfg);
std::pair<Vector, SolverReport> solve_pfeti(const Workspace& ws, const MethodConfig& cfg);
std::pair<Vector, SolverReport> solve_afeti(const Workspace& ws, const MethodConfig& cfg);
std::pair<Vector, SolverReport> solve_hybrid(const Workspace& ws, const MethodConfig& cfg);
std::pair<Vector, SolverReport> solve_fetidp(const Workspace& ws, const MethodConfig& cfg);
std::pair<Vector, SolverReport> solve_bddc(const Workspace& ws, const MethodConfig& cfg);
std::pair<Vector, SolverReport> solve_mixed2(const Workspace& ws, const MethodConfig& cfg);

/// Dispatch on cfg.method, with wall-time measurement.
std::pair<Vector, SolverReport> solve(const Workspace& ws, const MethodConfig& cfg);

}  // namespace ddlab
