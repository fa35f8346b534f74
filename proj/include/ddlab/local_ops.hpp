#pragma once

#include "ddlab/interface.hpp"

#include <Eigen/SparseCholesky>

#include <deque>
#include <memory>
#include <vector>

namespace ddlab {

enum class RbmMode { Algebraic, Geometric };

/// Zero-energy-mode basis of one subdomain stiffness, orthonormal columns.
Matrix detect_rbm(const Subdomain& sub, const std::vector<int>& boundary_dofs,
                  RbmMode mode);

/// Condensed view of one subdomain: interior factorization, boundary Schur
/// operator, condensed load, kernel and generalized inverse.
class SubdomainOperators {
 public:
  SubdomainOperators(const Subdomain& sub, std::vector<int> boundary_dofs);

  int num_dofs() const { return n_; }
  int boundary_count() const { return static_cast<int>(boundary_.size()); }
  int interior_count() const { return static_cast<int>(interior_.size()); }
  int kernel_dim() const { return static_cast<int>(kernel_.cols()); }
  const Matrix& kernel() const { return kernel_; }            // R
  const Matrix& boundary_kernel() const { return kernel_b_; } // R restricted to the boundary
  const Subdomain& subdomain() const { return *sub_; }
  const std::vector<int>& boundary_dofs() const { return boundary_; }

  /// Boundary reaction to an imposed boundary displacement (condensed
  /// stiffness apply).
  Vector schur_primal_apply(const Vector& u_b) const;
  /// Explicit condensed stiffness; built on first use and cached.
  const Matrix& schur_primal_dense() const;
  /// Condensed load b = f_b - K_bi K_ii^-1 f_i.
  const Vector& condensed_load() const { return condensed_load_; }

  /// Boundary displacement under an imposed boundary effort, using the
  /// fixed-dof generalized inverse (zero on the fixed dofs). When requested,
  /// rejects efforts that excite zero-energy modes.
  Vector schur_dual_apply(const Vector& lambda_b, bool check_admissibility = true) const;

  /// Generalized-inverse solve on the full subdomain.
  Vector pseudo_solve(const Vector& rhs) const;

  /// Interior completion for a known boundary trace: u_i = K_ii^-1 (f_i - K_ib u_b).
  Vector complete_interior(const Vector& u_b, bool with_load) const;

  Vector lumped_apply(const Vector& u_b) const;       // K_bb u_b
  Vector superlumped_apply(const Vector& u_b) const;  // diag(K_bb) u_b
  const Vector& kbb_diagonal() const { return kbb_diag_; }

  /// Indices (into the subdomain's dofs) held fixed by the generalized inverse.
  const std::vector<int>& fixed_dofs() const { return fixed_; }

 private:
  const Subdomain* sub_;
  int n_ = 0;
  std::vector<int> boundary_, interior_;
  std::vector<int> interior_pos_;  // local dof -> position in interior_, else -1

  Eigen::SimplicialLDLT<SparseMatrix> interior_solver_;
  SparseMatrix k_ib_;  // interior x boundary coupling
  SparseMatrix k_bb_;
  Vector kbb_diag_;
  Vector condensed_load_;

  Matrix kernel_, kernel_b_;
  std::vector<int> fixed_;          // fixed dofs of the generalized inverse
  std::vector<int> reduced_index_;  // local dof -> row in the reduced matrix
  Eigen::SimplicialLDLT<SparseMatrix> pseudo_solver_;

  mutable Matrix schur_dense_;  // lazy cache
  mutable bool schur_dense_ready_ = false;
};

/// Partition of one subdomain's boundary into a constrained part (treated
/// with unique displacement) and a free part (treated with unique effort).
/// Factors the stiffness with the constrained part clamped.
class SplitOperators {
 public:
  SplitOperators(const Subdomain& sub, const std::vector<int>& boundary_dofs,
                 const std::vector<bool>& constrained_slot);

  int num_p() const { return static_cast<int>(p_slots_.size()); }
  int num_d() const { return static_cast<int>(d_slots_.size()); }
  const std::vector<int>& p_slots() const { return p_slots_; }
  const std::vector<int>& d_slots() const { return d_slots_; }
  int kernel_dim() const { return static_cast<int>(kernel_.cols()); }
  /// Kernel of the clamped stiffness, expressed on the solve-side dofs.
  const Matrix& kernel() const { return kernel_; }
  Matrix kernel_d_rows() const;  // kernel values at the free boundary slots
  Matrix reaction_modes() const; // K_ps R: reaction of the clamped part to the kernel
  Vector solve_side_load() const;
  double kernel_load(int col) const;  // R^T f on the solve side, one column

  /// Mixed condensation: imposed displacement on the constrained slots and
  /// imposed effort on the free slots give reaction and displacement.
  void apply(const Vector& u_p, const Vector& lambda_d, Vector& lambda_p,
             Vector& u_d) const;

  /// Condensed stiffness seen by the constrained slots (dense, small).
  Matrix condensed_pp() const;
  /// Condensed load on the constrained slots.
  Vector condensed_p_load() const;
  /// Condensed load on the free slots (displacement response to the load).
  Vector condensed_d_load() const;

  Vector pseudo_solve_side(const Vector& rhs) const;

  // low-level pieces used by the recondensed strategies
  Vector scatter_d(const Vector& lambda_d) const;    // effort into the solve side
  Vector gather_d(const Vector& y) const;            // solve-side values at free slots
  Vector clamp_reaction(const Vector& y) const;      // reaction on the clamped part
  Vector couple_from_p(const Vector& u_p) const;     // stiffness coupling into the side
  const Vector& side_load() const { return f_s_; }
  const Vector& p_load() const { return f_p_; }

 private:
  const Subdomain* sub_;
  std::vector<int> p_slots_, d_slots_;   // boundary slot indices
  std::vector<int> p_dofs_, solve_dofs_; // local dof indices
  std::vector<int> d_pos_;               // free boundary slot -> solve-side row
  SparseMatrix k_ss_, k_ps_;
  Matrix k_pp_;
  Vector f_s_, f_p_;

  Matrix kernel_;
  std::vector<int> fixed_;
  std::vector<int> reduced_index_;
  Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

struct LocalOperators {
  std::deque<SubdomainOperators> sub;

  static LocalOperators build(const DecomposedProblem& problem,
                              const InterfaceTopology& topo);
  int total_kernel_dim() const;
};

/// Condensed stiffness of the `layers`-element band of a subdomain next to its
/// boundary, eliminating the rest of the band.
Matrix strip_schur(const Subdomain& sub, const std::vector<int>& boundary_dofs,
                   int layers);

}  // namespace ddlab
