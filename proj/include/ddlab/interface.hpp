#pragma once

#include "ddlab/problem.hpp"

#include <array>
#include <vector>

namespace ddlab {

/// Connectivity-interface storage variants. The redundant one carries every
/// pairwise relation, the non-redundant one a spanning tree per interface dof,
/// the orthonormal one an orthonormalized version of the tree.
enum class DualFlavor { Redundant = 0, NonRedundant = 1, Orthonormal = 2 };

struct DualEntry {
  int subdomain = -1;
  int slot = -1;        // position in that subdomain's boundary dof list
  double weight = 0.0;  // ±1 for boolean flavors
};

struct DualRelation {
  int primal = -1;  // geometric interface dof the relation constrains
  std::vector<DualEntry> entries;
  // pair view, valid for the two boolean flavors
  int plus_subdomain = -1, plus_slot = -1;
  int minus_subdomain = -1, minus_slot = -1;
};

struct InterfaceTopology {
  int num_subdomains = 0;
  std::vector<int> subdomain_dofs;              // total free dofs per subdomain
  std::vector<std::vector<int>> boundary_dofs;  // local dof ids, ascending
  std::vector<std::vector<int>> primal_index;   // boundary slot -> primal dof

  int num_primal = 0;
  std::vector<int> multiplicity;                 // per primal dof
  std::vector<std::vector<int>> owners;          // per primal dof, ascending
  std::vector<std::vector<int>> owner_slots;     // aligned with owners

  std::array<std::vector<DualRelation>, 3> dual;  // indexed by DualFlavor

  const std::vector<DualRelation>& relations(DualFlavor f) const {
    return dual[static_cast<int>(f)];
  }
  int num_dual(DualFlavor f) const { return static_cast<int>(relations(f).size()); }
  int boundary_count(int s) const { return static_cast<int>(boundary_dofs[s].size()); }
};

/// Identifies all shared dofs and builds the trace/assembly data in the three
/// connectivity flavors. Relations are ordered deterministically: interface
/// dofs ascending, and within a crosspoint by first appearance of the
/// subdomain pair.
InterfaceTopology build_topology(const DecomposedProblem& problem);

/// Restriction of a subdomain vector to its boundary; transposed scatters the
/// boundary values back with zero on internal dofs.
Vector trace_apply(const InterfaceTopology& topo, int s, const Vector& v,
                   bool transposed = false);

// Boolean assembly. Non-transposed sums subdomain contributions into the
// unique interface vector; transposed broadcasts back.
Vector assemble_primal(const InterfaceTopology& topo, const std::vector<Vector>& xb);
std::vector<Vector> distribute_primal(const InterfaceTopology& topo, const Vector& y);
Vector assemble_dual(const InterfaceTopology& topo, DualFlavor flavor,
                     const std::vector<Vector>& xb);
std::vector<Vector> distribute_dual(const InterfaceTopology& topo, DualFlavor flavor,
                                    const Vector& y);

enum class ScalingKind { Multiplicity, Stiffness };

/// Interface weights: a partition of unity on the geometric interface and the
/// matching neighbor-share weights on the connectivity interface.
struct ScalingSet {
  ScalingKind kind = ScalingKind::Multiplicity;
  std::vector<Vector> weight;    // raw weight per subdomain boundary slot
  std::vector<Vector> share;     // weight / (sum over owners); rows of M^(s)
  Vector weight_sum;             // per primal dof

  double neighbor_share(const InterfaceTopology& topo, const DualRelation& rel,
                        int entry) const;
};

ScalingSet build_scaling(const InterfaceTopology& topo, const DecomposedProblem& problem,
                         ScalingKind kind);

// Scaled assembly (partition-of-unity weighted).
Vector assemble_primal_scaled(const InterfaceTopology& topo, const ScalingSet& sc,
                              const std::vector<Vector>& xb);
std::vector<Vector> distribute_primal_scaled(const InterfaceTopology& topo,
                                             const ScalingSet& sc, const Vector& y);
Vector assemble_dual_scaled(const InterfaceTopology& topo, const ScalingSet& sc,
                            DualFlavor flavor, const std::vector<Vector>& xb);
std::vector<Vector> distribute_dual_scaled(const InterfaceTopology& topo,
                                           const ScalingSet& sc, DualFlavor flavor,
                                           const Vector& y);

// Dense views for fixture comparison and debug dumps.
Matrix dense_trace(const InterfaceTopology& topo, int s);
Matrix dense_primal_assembly(const InterfaceTopology& topo, int s);
Matrix dense_dual_assembly(const InterfaceTopology& topo, DualFlavor flavor, int s);

}  // namespace ddlab
