#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <string>
#include <vector>

namespace ddlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class ProblemKind { Square2d, Bar1d };

/// Edges of the global domain carrying homogeneous Dirichlet conditions.
struct ClampSet {
  bool left = true;
  bool right = false;
  bool bottom = false;
  bool top = false;
};

/// Two-modulus checkerboard, cell size counted in elements.
struct Checkerboard {
  double young_a = 200000.0;
  double young_b = 2.0;
  int cell = 1;
};

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Square2d;
  int px = 1, py = 1;  // subdomain grid
  int mx = 1, my = 1;  // elements per subdomain, per direction
  double young = 200000.0;
  std::optional<Checkerboard> checkerboard;  // overrides `young` when set
  double poisson = 0.3;
  ClampSet clamp;
  double load_magnitude = 1.0;

  int dofs_per_node() const { return kind == ProblemKind::Square2d ? 2 : 1; }
  int spatial_dim() const { return dofs_per_node(); }
  /// Throws std::invalid_argument on violated invariants.
  void validate() const;
};

/// One substructure: stiffness and load on its free dofs, plus the geometric
/// data needed for rigid-mode detection.
struct Subdomain {
  SparseMatrix K;               // symmetric, positive semidefinite
  Vector f;
  std::vector<int> global_dof;  // local free dof -> global free dof

  // per local dof: owning node position and displacement component
  std::vector<double> dof_x, dof_y;
  std::vector<int> dof_comp;

  // eliminated Dirichlet supports of this subdomain (position + component)
  std::vector<double> fixed_x, fixed_y;
  std::vector<int> fixed_comp;

  int dim = 2;

  int num_dofs() const { return static_cast<int>(global_dof.size()); }
};

struct DecomposedProblem {
  ProblemSpec spec;
  std::vector<Subdomain> subdomains;
  int num_global_dofs = 0;

  int num_subdomains() const { return static_cast<int>(subdomains.size()); }
};

/// Assembles the decomposed problem from a structured mesh. Dirichlet dofs are
/// eliminated before any interface data exists, so subdomain matrices act on
/// free dofs only.
DecomposedProblem build_problem(const ProblemSpec& spec);

/// Scatter-adds all subdomain contributions into the global system.
std::pair<SparseMatrix, Vector> assemble_global(const DecomposedProblem& problem);

/// Direct sparse factorization of the assembled system; reference solution for
/// every iterative strategy. Throws if the assembly is not SPD.
Vector oracle_solve(const DecomposedProblem& problem);

}  // namespace ddlab
