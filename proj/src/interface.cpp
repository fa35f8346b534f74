#include "ddlab/interface.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

namespace ddlab {

namespace {

int find_slot(const std::vector<int>& sorted, int value) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  return static_cast<int>(it - sorted.begin());
}

}  // namespace

InterfaceTopology build_topology(const DecomposedProblem& problem) {
  InterfaceTopology topo;
  topo.num_subdomains = problem.num_subdomains();
  topo.subdomain_dofs.resize(topo.num_subdomains);

  // global dof -> owning (subdomain, local dof), subdomains ascending
  std::map<int, std::vector<std::pair<int, int>>> owners_of;
  for (int s = 0; s < topo.num_subdomains; ++s) {
    const Subdomain& sub = problem.subdomains[s];
    topo.subdomain_dofs[s] = sub.num_dofs();
    for (int i = 0; i < sub.num_dofs(); ++i)
      owners_of[sub.global_dof[i]].emplace_back(s, i);
  }

  topo.boundary_dofs.resize(topo.num_subdomains);
  for (auto& [gdof, list] : owners_of) {
    if (list.size() < 2) continue;
    for (auto [s, local] : list) topo.boundary_dofs[s].push_back(local);
  }
  for (auto& b : topo.boundary_dofs) std::sort(b.begin(), b.end());

  topo.primal_index.resize(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s)
    topo.primal_index[s].assign(topo.boundary_dofs[s].size(), -1);

  // primal numbering follows ascending global dof index
  for (auto& [gdof, list] : owners_of) {
    if (list.size() < 2) continue;
    const int p = topo.num_primal++;
    topo.multiplicity.push_back(static_cast<int>(list.size()));
    std::vector<int> own, slots;
    for (auto [s, local] : list) {
      const int slot = find_slot(topo.boundary_dofs[s], local);
      topo.primal_index[s][slot] = p;
      own.push_back(s);
      slots.push_back(slot);
    }
    topo.owners.push_back(std::move(own));
    topo.owner_slots.push_back(std::move(slots));
  }
  for (int m : topo.multiplicity)
    if (m < 2) throw std::runtime_error("interface dof with a single owner");

  // Redundant relations: one per subdomain pair per shared dof. Pairs get an
  // interface id at first appearance; crosspoint relations follow that order,
  // fresh pairs appended in lexicographic order. Sign +1 on the lower id.
  std::map<std::pair<int, int>, int> interface_id;
  auto& red = topo.dual[static_cast<int>(DualFlavor::Redundant)];
  for (int p = 0; p < topo.num_primal; ++p) {
    const auto& own = topo.owners[p];
    const auto& slots = topo.owner_slots[p];
    const int m = static_cast<int>(own.size());
    std::vector<std::tuple<long, int, int>> order;  // (rank, a, b) indices into own
    long fresh = static_cast<long>(interface_id.size());
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b) {
        auto key = std::make_pair(own[a], own[b]);
        auto it = interface_id.find(key);
        long rank;
        if (it != interface_id.end()) {
          rank = it->second;
        } else {
          rank = fresh++;
          interface_id[key] = static_cast<int>(rank);
        }
        order.emplace_back(rank, a, b);
      }
    std::sort(order.begin(), order.end());
    for (auto [rank, a, b] : order) {
      DualRelation rel;
      rel.primal = p;
      rel.plus_subdomain = own[a];
      rel.plus_slot = slots[a];
      rel.minus_subdomain = own[b];
      rel.minus_slot = slots[b];
      rel.entries = {{own[a], slots[a], 1.0}, {own[b], slots[b], -1.0}};
      red.push_back(std::move(rel));
    }
  }

  // Non-redundant: greedy spanning tree over each dof's relations in stored
  // order (keeps the first m-1 relations linking a new owner).
  auto& nonred = topo.dual[static_cast<int>(DualFlavor::NonRedundant)];
  {
    std::map<int, std::vector<const DualRelation*>> by_primal;
    for (const DualRelation& rel : red) by_primal[rel.primal].push_back(&rel);
    for (auto& [p, rels] : by_primal) {
      std::map<int, int> comp;  // owner -> component representative
      for (int o : topo.owners[p]) comp[o] = o;
      std::function<int(int)> root = [&](int x) {
        while (comp[x] != x) x = comp[x] = comp[comp[x]];
        return x;
      };
      for (const DualRelation* rel : rels) {
        const int ra = root(rel->plus_subdomain);
        const int rb = root(rel->minus_subdomain);
        if (ra == rb) continue;
        comp[ra] = rb;
        nonred.push_back(*rel);
      }
    }
  }

  // Orthonormal: modified Gram-Schmidt of each dof's tree relations, seen as
  // vectors over the dof's owners.
  auto& ortho = topo.dual[static_cast<int>(DualFlavor::Orthonormal)];
  {
    std::map<int, std::vector<const DualRelation*>> by_primal;
    for (const DualRelation& rel : nonred) by_primal[rel.primal].push_back(&rel);
    for (auto& [p, rels] : by_primal) {
      const auto& own = topo.owners[p];
      const auto& slots = topo.owner_slots[p];
      const int m = static_cast<int>(own.size());
      auto owner_pos = [&](int s) {
        return static_cast<int>(std::find(own.begin(), own.end(), s) - own.begin());
      };
      std::vector<Vector> basis;
      for (const DualRelation* rel : rels) {
        Vector v = Vector::Zero(m);
        v[owner_pos(rel->plus_subdomain)] = 1.0;
        v[owner_pos(rel->minus_subdomain)] = -1.0;
        for (const Vector& q : basis) v -= q.dot(v) * q;
        v /= v.norm();
        basis.push_back(v);

        DualRelation orel;
        orel.primal = p;
        for (int a = 0; a < m; ++a)
          if (std::abs(v[a]) > 1e-14) orel.entries.push_back({own[a], slots[a], v[a]});
        ortho.push_back(std::move(orel));
      }
    }
  }

  return topo;
}

Vector trace_apply(const InterfaceTopology& topo, int s, const Vector& v, bool transposed) {
  const auto& bd = topo.boundary_dofs[s];
  const int nb = static_cast<int>(bd.size());
  if (!transposed) {
    if (v.size() != topo.subdomain_dofs[s])
      throw std::invalid_argument("trace: subdomain vector size mismatch");
    Vector out(nb);
    for (int i = 0; i < nb; ++i) out[i] = v[bd[i]];
    return out;
  }
  if (v.size() != nb) throw std::invalid_argument("trace: boundary vector size mismatch");
  Vector out = Vector::Zero(topo.subdomain_dofs[s]);
  for (int i = 0; i < nb; ++i) out[bd[i]] = v[i];
  return out;
}

Vector assemble_primal(const InterfaceTopology& topo, const std::vector<Vector>& xb) {
  Vector y = Vector::Zero(topo.num_primal);
  for (int s = 0; s < topo.num_subdomains; ++s)
    for (int i = 0; i < topo.boundary_count(s); ++i)
      y[topo.primal_index[s][i]] += xb[s][i];
  return y;
}

std::vector<Vector> distribute_primal(const InterfaceTopology& topo, const Vector& y) {
  std::vector<Vector> xb(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    xb[s] = Vector(topo.boundary_count(s));
    for (int i = 0; i < topo.boundary_count(s); ++i) xb[s][i] = y[topo.primal_index[s][i]];
  }
  return xb;
}

Vector assemble_dual(const InterfaceTopology& topo, DualFlavor flavor,
                     const std::vector<Vector>& xb) {
  const auto& rels = topo.relations(flavor);
  Vector y = Vector::Zero(static_cast<int>(rels.size()));
  for (size_t r = 0; r < rels.size(); ++r)
    for (const DualEntry& e : rels[r].entries) y[r] += e.weight * xb[e.subdomain][e.slot];
  return y;
}

std::vector<Vector> distribute_dual(const InterfaceTopology& topo, DualFlavor flavor,
                                    const Vector& y) {
  std::vector<Vector> xb(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) xb[s] = Vector::Zero(topo.boundary_count(s));
  const auto& rels = topo.relations(flavor);
  for (size_t r = 0; r < rels.size(); ++r)
    for (const DualEntry& e : rels[r].entries) xb[e.subdomain][e.slot] += e.weight * y[r];
  return xb;
}

double ScalingSet::neighbor_share(const InterfaceTopology& topo, const DualRelation& rel,
                                  int entry) const {
  const DualEntry& e = rel.entries[entry];
  const DualEntry& other = rel.entries[1 - entry];
  const double sum = weight_sum[topo.primal_index[e.subdomain][e.slot]];
  return weight[other.subdomain][other.slot] / sum;
}

ScalingSet build_scaling(const InterfaceTopology& topo, const DecomposedProblem& problem,
                         ScalingKind kind) {
  ScalingSet sc;
  sc.kind = kind;
  sc.weight.resize(topo.num_subdomains);
  sc.share.resize(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    const int nb = topo.boundary_count(s);
    sc.weight[s] = Vector::Ones(nb);
    if (kind == ScalingKind::Stiffness) {
      const auto diag = problem.subdomains[s].K.diagonal();
      for (int i = 0; i < nb; ++i) {
        sc.weight[s][i] = diag[topo.boundary_dofs[s][i]];
        if (!(sc.weight[s][i] > 0.0))
          throw std::runtime_error("nonpositive diagonal stiffness on an interface dof");
      }
    }
  }
  sc.weight_sum = Vector::Zero(topo.num_primal);
  for (int s = 0; s < topo.num_subdomains; ++s)
    for (int i = 0; i < topo.boundary_count(s); ++i)
      sc.weight_sum[topo.primal_index[s][i]] += sc.weight[s][i];
  for (int s = 0; s < topo.num_subdomains; ++s) {
    sc.share[s] = sc.weight[s];
    for (int i = 0; i < topo.boundary_count(s); ++i)
      sc.share[s][i] /= sc.weight_sum[topo.primal_index[s][i]];
  }
  return sc;
}

Vector assemble_primal_scaled(const InterfaceTopology& topo, const ScalingSet& sc,
                              const std::vector<Vector>& xb) {
  Vector y = Vector::Zero(topo.num_primal);
  for (int s = 0; s < topo.num_subdomains; ++s)
    for (int i = 0; i < topo.boundary_count(s); ++i)
      y[topo.primal_index[s][i]] += sc.share[s][i] * xb[s][i];
  return y;
}

std::vector<Vector> distribute_primal_scaled(const InterfaceTopology& topo,
                                             const ScalingSet& sc, const Vector& y) {
  std::vector<Vector> xb(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    xb[s] = Vector(topo.boundary_count(s));
    for (int i = 0; i < topo.boundary_count(s); ++i)
      xb[s][i] = sc.share[s][i] * y[topo.primal_index[s][i]];
  }
  return xb;
}

Vector assemble_dual_scaled(const InterfaceTopology& topo, const ScalingSet& sc,
                            DualFlavor flavor, const std::vector<Vector>& xb) {
  if (flavor == DualFlavor::Orthonormal)
    throw std::invalid_argument("scaled assembly is defined for the boolean flavors");
  const auto& rels = topo.relations(flavor);
  Vector y = Vector::Zero(static_cast<int>(rels.size()));
  for (size_t r = 0; r < rels.size(); ++r)
    for (int e = 0; e < 2; ++e) {
      const DualEntry& en = rels[r].entries[e];
      y[r] += en.weight * sc.neighbor_share(topo, rels[r], e) * xb[en.subdomain][en.slot];
    }
  return y;
}

std::vector<Vector> distribute_dual_scaled(const InterfaceTopology& topo,
                                           const ScalingSet& sc, DualFlavor flavor,
                                           const Vector& y) {
  if (flavor == DualFlavor::Orthonormal)
    throw std::invalid_argument("scaled assembly is defined for the boolean flavors");
  std::vector<Vector> xb(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) xb[s] = Vector::Zero(topo.boundary_count(s));
  const auto& rels = topo.relations(flavor);
  for (size_t r = 0; r < rels.size(); ++r)
    for (int e = 0; e < 2; ++e) {
      const DualEntry& en = rels[r].entries[e];
      xb[en.subdomain][en.slot] +=
          en.weight * sc.neighbor_share(topo, rels[r], e) * y[r];
    }
  return xb;
}

Matrix dense_trace(const InterfaceTopology& topo, int s) {
  Matrix t = Matrix::Zero(topo.boundary_count(s), topo.subdomain_dofs[s]);
  for (int i = 0; i < topo.boundary_count(s); ++i) t(i, topo.boundary_dofs[s][i]) = 1.0;
  return t;
}

Matrix dense_primal_assembly(const InterfaceTopology& topo, int s) {
  Matrix a = Matrix::Zero(topo.num_primal, topo.boundary_count(s));
  for (int i = 0; i < topo.boundary_count(s); ++i) a(topo.primal_index[s][i], i) = 1.0;
  return a;
}

Matrix dense_dual_assembly(const InterfaceTopology& topo, DualFlavor flavor, int s) {
  const auto& rels = topo.relations(flavor);
  Matrix a = Matrix::Zero(static_cast<int>(rels.size()), topo.boundary_count(s));
  for (size_t r = 0; r < rels.size(); ++r)
    for (const DualEntry& e : rels[r].entries)
      if (e.subdomain == s) a(static_cast<int>(r), e.slot) = e.weight;
  return a;
}

}  // namespace ddlab
