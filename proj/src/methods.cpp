#include "ddlab/methods.hpp"

#include "ddlab/parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ddlab {

Workspace::Workspace(const DecomposedProblem& p)
    : problem(&p), topology(build_topology(p)), ops(LocalOperators::build(p, topology)) {
  auto [k, load] = assemble_global(p);
  K = std::move(k);
  f = std::move(load);
  f_norm = std::max(f.norm(), 1e-300);
}

double global_residual(const Workspace& ws, const Vector& u) {
  return (ws.K * u - ws.f).norm() / ws.f_norm;
}

Vector reconstruct_from_interface(const Workspace& ws, const Vector& u_primal) {
  Vector u = Vector::Zero(ws.problem->num_global_dofs);
  const auto xb = distribute_primal(ws.topology, u_primal);
  for (int s = 0; s < ws.topology.num_subdomains; ++s) {
    const Subdomain& sub = ws.problem->subdomains[s];
    const auto& so = ws.ops.sub[s];
    const auto& bd = ws.topology.boundary_dofs[s];
    Vector interior = so.complete_interior(xb[s], true);
    int ipos = 0;
    for (int d = 0; d < sub.num_dofs(); ++d) {
      if (std::binary_search(bd.begin(), bd.end(), d)) continue;
      u[sub.global_dof[d]] = interior[ipos++];
    }
    for (size_t i = 0; i < bd.size(); ++i) u[sub.global_dof[bd[i]]] = xb[s][static_cast<int>(i)];
  }
  return u;
}

double dual_residual_estimate(const Workspace& ws, const ScalingSet& sc,
                              DualFlavor flavor, const Vector& jump) {
  std::vector<Vector> xb = flavor == DualFlavor::Orthonormal
                               ? distribute_dual(ws.topology, flavor, jump)
                               : distribute_dual_scaled(ws.topology, sc, flavor, jump);
  for (int s = 0; s < ws.topology.num_subdomains; ++s)
    xb[s] = ws.ops.sub[s].schur_primal_apply(xb[s]);
  return assemble_primal(ws.topology, xb).norm() / ws.f_norm;
}

namespace {

using Clock = std::chrono::steady_clock;

std::string method_name(Method m) {
  switch (m) {
    case Method::Bdd: return "bdd";
    case Method::Feti: return "feti";
    case Method::Pfeti: return "pfeti";
    case Method::Afeti: return "afeti";
    case Method::Hybrid: return "hybrid";
    case Method::Fetidp: return "fetidp";
    case Method::Bddc: return "bddc";
    case Method::Mixed2: return "mixed2";
  }
  return "?";
}

std::vector<Vector> zero_boundary_blocks(const Workspace& ws) {
  std::vector<Vector> xb(ws.topology.num_subdomains);
  for (int s = 0; s < ws.topology.num_subdomains; ++s)
    xb[s] = Vector::Zero(ws.topology.boundary_count(s));
  return xb;
}

KrylovConfig krylov_config(const MethodConfig& cfg) {
  KrylovConfig kc;
  kc.tolerance = cfg.tolerance;
  kc.max_iterations = cfg.max_iterations;
  kc.reorth = Reorthogonalization::Full;
  kc.observer = cfg.observer;
  return kc;
}

// ---------------------------------------------------------------- primal side

LinearMap primal_operator(const Workspace& ws) {
  const Workspace* w = &ws;
  return {ws.topology.num_primal, [w](const Vector& v) {
            auto xb = distribute_primal(w->topology, v);
            parallel_subdomains(w->topology.num_subdomains, [&](int s) {
              xb[s] = w->ops.sub[s].schur_primal_apply(xb[s]);
            });
            return assemble_primal(w->topology, xb);
          }};
}

Vector primal_rhs(const Workspace& ws) {
  std::vector<Vector> xb(ws.topology.num_subdomains);
  for (int s = 0; s < ws.topology.num_subdomains; ++s)
    xb[s] = ws.ops.sub[s].condensed_load();
  return assemble_primal(ws.topology, xb);
}

LinearMap neumann_preconditioner(const Workspace& ws, const ScalingSet& sc) {
  const Workspace* w = &ws;
  const ScalingSet* s_ = &sc;
  return {ws.topology.num_primal, [w, s_](const Vector& r) {
            auto xb = distribute_primal_scaled(w->topology, *s_, r);
            parallel_subdomains(w->topology.num_subdomains, [&](int s) {
              xb[s] = w->ops.sub[s].schur_dual_apply(xb[s], false);
            });
            return assemble_primal_scaled(w->topology, *s_, xb);
          }};
}

/// Columns of the primal coarse basis: weighted assembly of the boundary
/// kernel traces of every floating subdomain.
Matrix primal_kernel_columns(const Workspace& ws, const ScalingSet& sc,
                             std::vector<std::pair<int, int>>* col_ids = nullptr) {
  std::vector<Vector> cols;
  for (int s = 0; s < ws.topology.num_subdomains; ++s) {
    const auto& so = ws.ops.sub[s];
    for (int k = 0; k < so.kernel_dim(); ++k) {
      auto xb = zero_boundary_blocks(ws);
      xb[s] = so.boundary_kernel().col(k);
      cols.push_back(assemble_primal_scaled(ws.topology, sc, xb));
      if (col_ids) col_ids->push_back({s, k});
    }
  }
  Matrix g(ws.topology.num_primal, static_cast<int>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) g.col(static_cast<int>(c)) = cols[c];
  return g;
}

// ------------------------------------------------------------------ dual side

struct DualSystem {
  DualFlavor flavor = DualFlavor::Redundant;
  int n = 0;
  LinearMap op;
  Vector rhs;  // right-hand side of the interface system
  Matrix G;
  Vector e;
  std::vector<std::pair<int, int>> g_cols;  // (subdomain, kernel column)
};

Matrix dual_kernel_columns(const Workspace& ws, DualFlavor flavor,
                           std::vector<std::pair<int, int>>* col_ids) {
  std::vector<Vector> cols;
  for (int s = 0; s < ws.topology.num_subdomains; ++s) {
    const auto& so = ws.ops.sub[s];
    for (int k = 0; k < so.kernel_dim(); ++k) {
      auto xb = zero_boundary_blocks(ws);
      xb[s] = so.boundary_kernel().col(k);
      cols.push_back(assemble_dual(ws.topology, flavor, xb));
      if (col_ids) col_ids->push_back({s, k});
    }
  }
  Matrix g(ws.topology.num_dual(flavor), static_cast<int>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) g.col(static_cast<int>(c)) = cols[c];
  return g;
}

DualSystem build_dual_system(const Workspace& ws, DualFlavor flavor) {
  DualSystem ds;
  ds.flavor = flavor;
  ds.n = ws.topology.num_dual(flavor);
  const Workspace* w = &ws;
  ds.op = {ds.n, [w, flavor](const Vector& lambda) {
             auto xb = distribute_dual(w->topology, flavor, lambda);
             parallel_subdomains(w->topology.num_subdomains, [&](int s) {
               xb[s] = w->ops.sub[s].schur_dual_apply(xb[s], false);
             });
             return assemble_dual(w->topology, flavor, xb);
           }};

  // displacement response to the loads alone
  std::vector<Vector> xb(ws.topology.num_subdomains);
  for (int s = 0; s < ws.topology.num_subdomains; ++s) {
    const auto& so = ws.ops.sub[s];
    Vector u_f = so.pseudo_solve(ws.problem->subdomains[s].f);
    xb[s] = trace_apply(ws.topology, s, u_f);
  }
  ds.rhs = -assemble_dual(ws.topology, flavor, xb);

  ds.G = dual_kernel_columns(ws, flavor, &ds.g_cols);
  ds.e = Vector(ds.G.cols());
  for (size_t c = 0; c < ds.g_cols.size(); ++c) {
    auto [s, k] = ds.g_cols[c];
    ds.e[static_cast<int>(c)] =
        ws.ops.sub[s].kernel().col(k).dot(ws.problem->subdomains[s].f);
  }
  return ds;
}

/// Weighted sum of local operators on the connectivity interface:
/// the dual preconditioners and the projector-shaping operators.
LinearMap dual_scaled_local(const Workspace& ws, const ScalingSet& sc, DualFlavor flavor,
                            Preconditioner kind) {
  const Workspace* w = &ws;
  const ScalingSet* s_ = &sc;
  const int n = ws.topology.num_dual(flavor);
  return {n, [w, s_, flavor, kind](const Vector& r) {
            std::vector<Vector> xb =
                flavor == DualFlavor::Orthonormal
                    ? distribute_dual(w->topology, flavor, r)
                    : distribute_dual_scaled(w->topology, *s_, flavor, r);
            parallel_subdomains(w->topology.num_subdomains, [&](int s) {
              const auto& so = w->ops.sub[s];
              switch (kind) {
                case Preconditioner::Dirichlet: xb[s] = so.schur_primal_apply(xb[s]); break;
                case Preconditioner::Lumped: xb[s] = so.lumped_apply(xb[s]); break;
                case Preconditioner::Superlumped: xb[s] = so.superlumped_apply(xb[s]); break;
                default: break;
              }
            });
            return flavor == DualFlavor::Orthonormal
                       ? assemble_dual(w->topology, flavor, xb)
                       : assemble_dual_scaled(w->topology, *s_, flavor, xb);
          }};
}

LinearMap dual_q_map(const Workspace& ws, const ScalingSet& sc, DualFlavor flavor,
                     ProjectorQ q) {
  const int n = ws.topology.num_dual(flavor);
  switch (q) {
    case ProjectorQ::Identity:
      return LinearMap::identity(n);
    case ProjectorQ::Multiplicity: {
      Vector d(n);
      const auto& rels = ws.topology.relations(flavor);
      for (int r = 0; r < n; ++r) d[r] = 1.0 / ws.topology.multiplicity[rels[r].primal];
      auto held = std::make_shared<Vector>(std::move(d));
      return {n, [held](const Vector& v) { return Vector(held->cwiseProduct(v)); }};
    }
    case ProjectorQ::Superlumped:
      return dual_scaled_local(ws, sc, flavor, Preconditioner::Superlumped);
    case ProjectorQ::Lumped:
      return dual_scaled_local(ws, sc, flavor, Preconditioner::Lumped);
    case ProjectorQ::Dirichlet:
      return dual_scaled_local(ws, sc, flavor, Preconditioner::Dirichlet);
  }
  return LinearMap::identity(n);
}

/// Dual-side optional-constraint columns for the corner set: unit vectors on
/// the spanning-tree relations of every corner dof, expressed in `flavor`
/// numbering.
Matrix dual_corner_columns(const Workspace& ws, DualFlavor flavor) {
  const auto& topo = ws.topology;
  const auto corner = corner_primal_dofs(ws);
  std::set<int> corner_set(corner.begin(), corner.end());
  std::map<std::tuple<int, int, int>, int> index_of;  // (primal, +sub, -sub) -> row
  const auto& rels = topo.relations(flavor);
  for (size_t r = 0; r < rels.size(); ++r)
    index_of[{rels[r].primal, rels[r].plus_subdomain, rels[r].minus_subdomain}] =
        static_cast<int>(r);

  std::vector<int> rows;
  for (const DualRelation& rel :
       topo.relations(DualFlavor::NonRedundant))  // m-1 relations per dof
    if (corner_set.count(rel.primal))
      rows.push_back(index_of.at({rel.primal, rel.plus_subdomain, rel.minus_subdomain}));

  Matrix c = Matrix::Zero(static_cast<int>(rels.size()), static_cast<int>(rows.size()));
  for (size_t j = 0; j < rows.size(); ++j) c(rows[j], static_cast<int>(j)) = 1.0;
  return c;
}

Vector gather_columns_alpha(const DualSystem& ds, const Workspace& ws, const Vector& alpha,
                            int s) {
  Vector out = Vector::Zero(ws.ops.sub[s].kernel_dim());
  for (size_t c = 0; c < ds.g_cols.size(); ++c)
    if (ds.g_cols[c].first == s) out[ds.g_cols[c].second] = alpha[static_cast<int>(c)];
  return out;
}

/// Per-subdomain displacements for a converged dual iterate, averaged into a
/// unique interface field.
Vector dual_reconstruct(const Workspace& ws, const ScalingSet& sc, const DualSystem& ds,
                        const Vector& lambda, const Vector& alpha) {
  auto lb = distribute_dual(ws.topology, ds.flavor, lambda);
  std::vector<Vector> xb(ws.topology.num_subdomains);
  for (int s = 0; s < ws.topology.num_subdomains; ++s) {
    const Subdomain& sub = ws.problem->subdomains[s];
    const auto& so = ws.ops.sub[s];
    Vector rhs = sub.f + trace_apply(ws.topology, s, lb[s], true);
    Vector u = so.pseudo_solve(rhs);
    if (so.kernel_dim() > 0) u += so.kernel() * gather_columns_alpha(ds, ws, alpha, s);
    xb[s] = trace_apply(ws.topology, s, u);
  }
  return assemble_primal_scaled(ws.topology, sc, xb);
}

/// Keeps a maximal independent subset of the given columns. Optional
/// constraints are free-form; dependent directions add nothing and break the
/// coarse factorization.
Matrix filter_rank(const Matrix& basis, double tol = 1e-10) {
  if (basis.cols() == 0) return basis;
  Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  qr.setThreshold(tol);
  const int rank = static_cast<int>(qr.rank());
  if (rank == basis.cols()) return basis;
  Matrix out(basis.rows(), rank);
  std::vector<int> keep(rank);
  for (int i = 0; i < rank; ++i) keep[i] = qr.colsPermutation().indices()[i];
  std::sort(keep.begin(), keep.end());
  for (int i = 0; i < rank; ++i) out.col(i) = basis.col(keep[i]);
  return out;
}

/// Rank filter in the metric of a symmetric positive operator: returns
/// combinations whose Gram matrix under `op` is safely invertible.
Matrix filter_rank_in_metric(const Matrix& basis, const LinearMap& op,
                             double tol = 1e-12) {
  if (basis.cols() == 0) return basis;
  Matrix image(basis.rows(), basis.cols());
  for (int c = 0; c < basis.cols(); ++c) image.col(c) = op(basis.col(c));
  Matrix gram = basis.transpose() * image;
  gram = 0.5 * (gram + Matrix(gram.transpose()));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double lmax = eig.eigenvalues().maxCoeff();
  int kept = 0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i)
    if (eig.eigenvalues()[i] > tol * lmax) ++kept;
  if (kept == basis.cols()) return basis;
  return basis * eig.eigenvectors().rightCols(kept);
}

std::pair<Vector, SolverReport> direct_fallback(const Workspace& ws,
                                                const MethodConfig& cfg) {
  // no interface: each subdomain solves independently (single-subdomain case)
  SolverReport rep;
  rep.method = cfg.label.empty() ? method_name(cfg.method) : cfg.label;
  Eigen::SimplicialLDLT<SparseMatrix> solver(ws.K);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("direct fallback factorization failed");
  Vector u = solver.solve(ws.f);
  rep.converged = true;
  rep.iterations = 0;
  rep.true_residual = global_residual(ws, u);
  return {u, rep};
}

void finish_report(const Workspace& ws, const MethodConfig& cfg, const KrylovResult& res,
                   const Vector& u, SolverReport& rep) {
  rep.method = cfg.label.empty() ? method_name(cfg.method) : cfg.label;
  rep.iterations = res.iterations;
  rep.converged = res.converged;
  rep.history = res.history;
  rep.true_residual = global_residual(ws, u);
}

// generic GMRes pass over a projected system (common solver for the
// equivalence studies and the hybrid strategy). Right-preconditioned so the
// monitored norm is the projected residual itself, not a preconditioned one.
KrylovResult constrained_gmres(const LinearMap& op, const Vector& rhs,
                               const LinearMap* precond, const ProjectorPair& pair,
                               const KrylovConfig& cfg, Vector* x_out) {
  Vector x_init = pair.x0.size() ? pair.x0 : Vector::Zero(op.dim);
  Vector rho = pair.apply_t(rhs - op(x_init));
  LinearMap projected = {op.dim, [&op, &pair, precond](const Vector& v) {
                           Vector w = precond ? (*precond)(v) : v;
                           return pair.apply_t(op(pair.apply(w)));
                         }};
  auto recover = [&](const Vector& z) {
    Vector y = precond ? (*precond)(z) : z;
    return Vector(x_init + pair.apply(y));
  };
  KrylovConfig inner = cfg;
  if (cfg.observer) {
    inner.observer = [&](int it, const Vector& z, const Vector&) {
      Vector none(0);
      cfg.observer(it, recover(z), none);
    };
  }
  if (cfg.stop_metric) {
    inner.stop_metric = [&](const Vector& z, const Vector& r) {
      return cfg.stop_metric(recover(z), r);
    };
  }
  KrylovResult res = gmres(projected, rho, nullptr, inner);
  *x_out = recover(res.x);
  return res;
}

}  // namespace

// ----------------------------------------------------------------- config

MethodConfig MethodConfig::for_method(Method m) {
  MethodConfig cfg;
  cfg.method = m;
  switch (m) {
    case Method::Bdd:
    case Method::Bddc:
    case Method::Pfeti:
      cfg.preconditioner = Preconditioner::Neumann;
      break;
    case Method::Feti:
    case Method::Afeti:
    case Method::Fetidp:
      cfg.preconditioner = Preconditioner::Dirichlet;
      break;
    case Method::Hybrid:
      cfg.preconditioner = Preconditioner::Dirichlet;  // echoes the scaled local inverses
      break;
    case Method::Mixed2:
      cfg.preconditioner = Preconditioner::None;
      break;
  }
  if (m == Method::Pfeti) cfg.projector_q = ProjectorQ::Dirichlet;
  return cfg;
}

void MethodConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  const bool dual_like = method == Method::Feti || method == Method::Afeti;
  const bool primal_like = method == Method::Bdd || method == Method::Bddc;
  if (primal_like &&
      (preconditioner == Preconditioner::Dirichlet ||
       preconditioner == Preconditioner::Lumped ||
       preconditioner == Preconditioner::Superlumped))
    fail("dual-side preconditioner on a primal method");
  if ((dual_like || method == Method::Fetidp) && preconditioner == Preconditioner::Neumann)
    fail("neumann preconditioner on a dual method");
  if (projector_q != ProjectorQ::Identity &&
      !(dual_like || method == Method::Pfeti || method == Method::Hybrid))
    fail("projector choice applies to dual-type methods only");
  if (initialization != Initialization::Zero && method != Method::Feti)
    fail("effort-split initialization applies to the dual method only");
  if (constraint_source != ConstraintSource::None &&
      !(method == Method::Bdd || method == Method::Feti))
    fail("optional corner augmentation applies to bdd/feti");
  if (constraint_source == ConstraintSource::Custom && custom_constraints.cols() == 0)
    fail("custom constraints requested but none supplied");
  if (fetidp_constraints == FetidpConstraints::CornersPlusEdgeAverages &&
      method != Method::Fetidp)
    fail("edge averages apply to fetidp");
  if (tolerance <= 0.0) fail("tolerance must be positive");
  if (max_iterations < 1) fail("max iterations must be >= 1");
}

// -------------------------------------------------------------------- BDD

std::pair<Vector, SolverReport> solve_bdd(const Workspace& ws, const MethodConfig& cfg) {
  cfg.validate();
  if (ws.topology.num_primal == 0) return direct_fallback(ws, cfg);
  SolverReport rep;

  ScalingSet sc = build_scaling(ws.topology, *ws.problem, cfg.scaling);
  LinearMap op = primal_operator(ws);
  Vector rhs = primal_rhs(ws);

  LinearMap precond;
  if (cfg.preconditioner == Preconditioner::Neumann) precond = neumann_preconditioner(ws, sc);

  Matrix coarse(ws.topology.num_primal, 0);
  if (cfg.coarse == CoarseMode::AutoRbm) coarse = primal_kernel_columns(ws, sc);
  if (cfg.coarse == CoarseMode::None && ws.ops.total_kernel_dim() > 0)
    rep.notes = "floating subdomains without a coarse problem: local Neumann solves "
                "use generalized-inverse representatives";
  if (cfg.constraint_source != ConstraintSource::None) {
    Matrix extra = cfg.constraint_source == ConstraintSource::Corners
                       ? corner_constraint_matrix(ws, ConstraintSide::Primal, sc)
                       : cfg.custom_constraints;
    Matrix both(ws.topology.num_primal, coarse.cols() + extra.cols());
    both << coarse, extra;
    coarse = filter_rank_in_metric(both, op, 1e-11);  // corner responses overlap
  }

  ProjectorPair pair = coarse.cols() > 0
                           ? make_augmentation_projector(coarse, op, rhs, true)
                           : identity_projector(op.dim);

  KrylovConfig kc = krylov_config(cfg);
  const Workspace* w = &ws;
  kc.stop_metric = [w](const Vector&, const Vector& r) { return r.norm() / w->f_norm; };

  KrylovResult res;
  Vector u_b;
  if (cfg.solver == SolverChoice::Gmres) {
    kc.stop_metric = [w, &op, &rhs](const Vector& x, const Vector&) {
      return (rhs - op(x)).norm() / w->f_norm;
    };
    res = constrained_gmres(op, rhs, precond.apply ? &precond : nullptr, pair, kc, &u_b);
  } else {
    res = projected_cg(op, rhs, precond.apply ? &precond : nullptr, pair, kc);
    u_b = res.x;
  }

  Vector u = reconstruct_from_interface(ws, u_b);
  finish_report(ws, cfg, res, u, rep);
  rep.coarse_augmentation = static_cast<int>(coarse.cols());
  return {u, rep};
}

// ------------------------------------------------------------------- P-FETI

std::pair<Vector, SolverReport> solve_pfeti(const Workspace& ws, const MethodConfig& cfg) {
  cfg.validate();
  if (ws.topology.num_primal == 0) return direct_fallback(ws, cfg);
  SolverReport rep;

  ScalingSet sc = build_scaling(ws.topology, *ws.problem, cfg.scaling);
  LinearMap op = primal_operator(ws);
  Vector rhs = primal_rhs(ws);

  const DualFlavor flavor = DualFlavor::Redundant;
  Matrix g_dual = dual_kernel_columns(ws, flavor, nullptr);
  Matrix g_primal = primal_kernel_columns(ws, sc);
  LinearMap qmap = dual_q_map(ws, sc, flavor, cfg.projector_q);

  auto qg = std::make_shared<Matrix>(ws.topology.num_dual(flavor), g_dual.cols());
  for (int c = 0; c < g_dual.cols(); ++c) qg->col(c) = qmap(g_dual.col(c));
  auto coarse_lu = std::make_shared<Eigen::PartialPivLU<Matrix>>();
  auto coarse_lu_t = std::make_shared<Eigen::PartialPivLU<Matrix>>();
  if (g_dual.cols() > 0) {
    Matrix f = g_dual.transpose() * (*qg);
    coarse_lu->compute(f);
    coarse_lu_t->compute(f.transpose());
  }

  const Workspace* w = &ws;
  const ScalingSet* scp = &sc;
  auto gp = std::make_shared<Matrix>(g_primal);
  LinearMap precond = {
      ws.topology.num_primal, [w, scp, flavor, qg, coarse_lu, coarse_lu_t, gp](const Vector& r) {
        auto h = distribute_primal_scaled(w->topology, *scp, r);
        const int k = static_cast<int>(gp->cols());
        if (k > 0) {
          Vector gr = gp->transpose() * r;
          Vector corr_dual = (*qg) * coarse_lu->solve(gr);
          auto corr = distribute_dual(w->topology, flavor, corr_dual);
          for (int s = 0; s < w->topology.num_subdomains; ++s) h[s] -= corr[s];
        }
        for (int s = 0; s < w->topology.num_subdomains; ++s)
          h[s] = w->ops.sub[s].schur_dual_apply(h[s], false);
        Vector z = assemble_primal_scaled(w->topology, *scp, h);
        if (k > 0) {
          Vector back = qg->transpose() * assemble_dual(w->topology, flavor, h);
          z -= (*gp) * coarse_lu_t->solve(back);
        }
        return z;
      }};

  ProjectorPair pair = g_primal.cols() > 0 && cfg.coarse == CoarseMode::AutoRbm
                           ? make_augmentation_projector(g_primal, op, rhs, true)
                           : identity_projector(op.dim);

  KrylovConfig kc = krylov_config(cfg);
  kc.stop_metric = [w](const Vector&, const Vector& r) { return r.norm() / w->f_norm; };

  KrylovResult res;
  Vector u_b;
  if (cfg.solver == SolverChoice::Gmres) {
    kc.stop_metric = [w, &op, &rhs](const Vector& x, const Vector&) {
      return (rhs - op(x)).norm() / w->f_norm;
    };
    res = constrained_gmres(op, rhs, &precond, pair, kc, &u_b);
  } else {
    res = projected_cg(op, rhs, &precond, pair, kc);
    u_b = res.x;
  }

  Vector u = reconstruct_from_interface(ws, u_b);
  finish_report(ws, cfg, res, u, rep);
  rep.coarse_augmentation = static_cast<int>(pair.augmentation_size);
  return {u, rep};
}

// ------------------------------------------------------------- FETI / A-FETI

namespace {

std::pair<Vector, SolverReport> solve_dual_method(const Workspace& ws,
                                                  const MethodConfig& cfg,
                                                  DualFlavor flavor) {
  cfg.validate();
  if (ws.topology.num_primal == 0) return direct_fallback(ws, cfg);
  SolverReport rep;

  ScalingSet sc = build_scaling(ws.topology, *ws.problem, cfg.scaling);
  DualSystem ds = build_dual_system(ws, flavor);

  LinearMap precond;
  if (cfg.preconditioner != Preconditioner::None)
    precond = dual_scaled_local(ws, sc, flavor, cfg.preconditioner);

  LinearMap qmap = dual_q_map(ws, sc, flavor, cfg.projector_q);
  ProjectorPair adm = ds.G.cols() > 0
                          ? make_admissibility_projector(ds.G, Vector(-ds.e), qmap)
                          : identity_projector(ds.n);

  if (cfg.initialization != Initialization::Zero) {
    Vector split = feti_initial_split(ws, sc, cfg.initialization, cfg.init_weight);
    adm.x0 = (adm.x0.size() ? adm.x0 : Vector::Zero(ds.n)) + adm.apply(split);
  }

  ProjectorPair pair = adm;
  if (cfg.constraint_source != ConstraintSource::None) {
    Matrix c = cfg.constraint_source == ConstraintSource::Corners
                   ? dual_corner_columns(ws, flavor)
                   : cfg.custom_constraints;
    pair = nest_projectors(adm, c, ds.op, ds.rhs, true);
  }

  KrylovConfig kc = krylov_config(cfg);
  const Workspace* w = &ws;
  const ScalingSet* scp = &sc;
  kc.stop_metric = [w, scp, flavor](const Vector&, const Vector& r) {
    return dual_residual_estimate(*w, *scp, flavor, r);
  };

  KrylovResult res;
  Vector lambda;
  if (cfg.solver == SolverChoice::Gmres) {
    const ProjectorPair* admp = &adm;
    const DualSystem* dsp = &ds;
    kc.stop_metric = [w, scp, flavor, admp, dsp](const Vector& x, const Vector&) {
      Vector rho = admp->apply_t(dsp->rhs - dsp->op(x));
      return dual_residual_estimate(*w, *scp, flavor, rho);
    };
    res = constrained_gmres(ds.op, ds.rhs, precond.apply ? &precond : nullptr, pair, kc,
                            &lambda);
  } else {
    res = projected_cg(ds.op, ds.rhs, precond.apply ? &precond : nullptr, pair, kc);
    lambda = res.x;
  }

  Vector alpha(0);
  if (ds.G.cols() > 0) alpha = adm.multipliers(ds.rhs - ds.op(lambda));
  Vector u_b = dual_reconstruct(ws, sc, ds, lambda, alpha);
  Vector u = reconstruct_from_interface(ws, u_b);
  finish_report(ws, cfg, res, u, rep);
  rep.coarse_admissibility = static_cast<int>(ds.G.cols());
  rep.coarse_augmentation = pair.augmentation_size;
  return {u, rep};
}

}  // namespace

std::pair<Vector, SolverReport> solve_feti(const Workspace& ws, const MethodConfig& cfg) {
  return solve_dual_method(ws, cfg, DualFlavor::Redundant);
}

std::pair<Vector, SolverReport> solve_afeti(const Workspace& ws, const MethodConfig& cfg) {
  return solve_dual_method(ws, cfg, DualFlavor::Orthonormal);
}

// ----------------------------------------------------------------- corners

std::vector<int> corner_primal_dofs(const Workspace& ws) {
  const auto& topo = ws.topology;
  std::set<int> corners;

  // nodes touched by any dof of multiplicity >= 3
  std::set<std::pair<double, double>> corner_nodes;
  auto dof_node = [&](int p) {
    const int s = topo.owners[p][0];
    const int local = topo.boundary_dofs[s][topo.owner_slots[p][0]];
    const Subdomain& sub = ws.problem->subdomains[s];
    return std::make_pair(sub.dof_x[local], sub.dof_y[local]);
  };
  for (int p = 0; p < topo.num_primal; ++p)
    if (topo.multiplicity[p] >= 3) corner_nodes.insert(dof_node(p));

  // endpoints of every two-subdomain edge
  std::map<std::vector<int>, std::vector<int>> edges;  // owner pair -> primal dofs
  for (int p = 0; p < topo.num_primal; ++p)
    if (topo.multiplicity[p] == 2) edges[topo.owners[p]].push_back(p);
  for (auto& [pairkey, dofs] : edges) {
    std::pair<double, double> lo, hi;
    bool first = true;
    for (int p : dofs) {
      auto node = dof_node(p);
      if (first || node < lo) lo = node;
      if (first || node > hi) hi = node;
      first = false;
    }
    corner_nodes.insert(lo);
    corner_nodes.insert(hi);
  }

  for (int p = 0; p < topo.num_primal; ++p)
    if (corner_nodes.count(dof_node(p))) corners.insert(p);
  return {corners.begin(), corners.end()};
}

Matrix corner_constraint_matrix(const Workspace& ws, ConstraintSide side,
                                const ScalingSet& sc) {
  if (side == ConstraintSide::Dual) return dual_corner_columns(ws, DualFlavor::Redundant);

  // weighted local responses to unit corner efforts, one column per owner
  const auto corners = corner_primal_dofs(ws);
  std::vector<Vector> cols;
  for (int p : corners) {
    for (size_t o = 0; o < ws.topology.owners[p].size(); ++o) {
      const int s = ws.topology.owners[p][o];
      const int slot = ws.topology.owner_slots[p][o];
      Vector e = Vector::Zero(ws.topology.boundary_count(s));
      e[slot] = sc.share[s][slot];
      auto xb = zero_boundary_blocks(ws);
      xb[s] = ws.ops.sub[s].schur_dual_apply(e, false);
      cols.push_back(assemble_primal_scaled(ws.topology, sc, xb));
    }
  }
  Matrix c(ws.topology.num_primal, static_cast<int>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) c.col(static_cast<int>(j)) = cols[j];
  return c;
}

// ------------------------------------------------------- initial effort split

Vector feti_initial_split(const Workspace& ws, const ScalingSet& sc, Initialization kind,
                          InitWeight weight) {
  const auto& topo = ws.topology;
  const DualFlavor flavor = DualFlavor::Redundant;
  const int n = topo.num_dual(flavor);
  if (kind == Initialization::Zero) return Vector::Zero(n);
  (void)sc;

  // boundary efforts to split
  std::vector<Vector> vals(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s)
    vals[s] = kind == Initialization::ClassicalSplit
                  ? trace_apply(topo, s, ws.problem->subdomains[s].f)
                  : ws.ops.sub[s].condensed_load();

  if (weight == InitWeight::DualSchur) {
    DualSystem ds = build_dual_system(ws, flavor);
    Matrix s_dense(n, n);
    for (int c = 0; c < n; ++c) s_dense.col(c) = ds.op(Vector::Unit(n, c));
    Vector rhs = assemble_dual(topo, flavor, [&] {
      std::vector<Vector> xb(topo.num_subdomains);
      for (int s = 0; s < topo.num_subdomains; ++s)
        xb[s] = ws.ops.sub[s].schur_dual_apply(vals[s], false);
      return xb;
    }());
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(s_dense);
    cod.setThreshold(1e-12);
    return Vector(-cod.solve(rhs));
  }

  // per-dof weighted splitting with the inverse boundary-stiffness diagonal
  Vector gamma = Vector::Zero(n);
  std::map<int, std::vector<int>> rels_of;  // primal dof -> relation ids
  const auto& rels = topo.relations(flavor);
  for (size_t r = 0; r < rels.size(); ++r) rels_of[rels[r].primal].push_back(static_cast<int>(r));

  for (auto& [p, rlist] : rels_of) {
    const auto& own = topo.owners[p];
    const auto& slots = topo.owner_slots[p];
    const int m = static_cast<int>(own.size());
    const int q = static_cast<int>(rlist.size());
    auto owner_pos = [&](int s) {
      return static_cast<int>(std::find(own.begin(), own.end(), s) - own.begin());
    };
    Matrix b = Matrix::Zero(q, m);
    for (int i = 0; i < q; ++i)
      for (const DualEntry& en : rels[rlist[i]].entries)
        b(i, owner_pos(en.subdomain)) = en.weight;
    Vector d(m), v(m);
    for (int a = 0; a < m; ++a) {
      d[a] = 1.0 / ws.ops.sub[own[a]].kbb_diagonal()[slots[a]];
      v[a] = vals[own[a]][slots[a]];
    }
    Matrix mp = b * d.asDiagonal() * b.transpose();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(mp);
    cod.setThreshold(1e-12);
    Vector g = cod.solve(b * d.cwiseProduct(v));
    for (int i = 0; i < q; ++i) gamma[rlist[i]] = g[i];
  }
  return -gamma;
}

// ------------------------------------------------------------------- hybrid

namespace {

/// Per-dof treatment from the split string.
std::vector<bool> parse_split(const Workspace& ws, const std::string& split) {
  const auto& topo = ws.topology;
  std::vector<bool> is_p(topo.num_primal, false);
  std::string s = split;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  auto comp_of = [&](int p) {
    const int sub = topo.owners[p][0];
    const int local = topo.boundary_dofs[sub][topo.owner_slots[p][0]];
    return ws.problem->subdomains[sub].dof_comp[local];
  };
  if (s == "all-p") {
    std::fill(is_p.begin(), is_p.end(), true);
  } else if (s == "all-d") {
    // default false
  } else if (s == "alternate") {
    for (int p = 0; p < topo.num_primal; ++p) is_p[p] = (p % 2 == 1);
  } else {
    std::vector<char> letters;
    for (char c : s)
      if (c == 'p' || c == 'd') letters.push_back(c);
    if (letters.empty()) throw std::invalid_argument("unrecognized interface split: " + split);
    for (int p = 0; p < topo.num_primal; ++p) {
      const int comp = comp_of(p);
      const char letter = letters[std::min<size_t>(comp, letters.size() - 1)];
      is_p[p] = letter == 'p';
    }
  }
  return is_p;
}

struct HybridSpace {
  std::vector<bool> is_p;                      // per primal dof
  std::vector<int> p_index;                    // primal dof -> unique p index
  int n_p = 0;
  std::vector<int> d_relation;                 // redundant relation -> d index, -1
  std::vector<int> d_rows;                     // d index -> relation id
  int n_d = 0;
  std::deque<SplitOperators> split;            // clamp p
  std::deque<SplitOperators> complement;       // clamp d
  std::vector<std::vector<int>> p_slot_index;  // per sub: position in split.p_slots per slot
  std::vector<std::vector<int>> d_slot_index;  // per sub: position in split.d_slots per slot
};

HybridSpace build_hybrid_space(const Workspace& ws, const std::vector<bool>& is_p) {
  const auto& topo = ws.topology;
  HybridSpace hs;
  hs.is_p = is_p;
  hs.p_index.assign(topo.num_primal, -1);
  for (int p = 0; p < topo.num_primal; ++p)
    if (is_p[p]) hs.p_index[p] = hs.n_p++;

  const auto& rels = topo.relations(DualFlavor::Redundant);
  hs.d_relation.assign(rels.size(), -1);
  for (size_t r = 0; r < rels.size(); ++r)
    if (!is_p[rels[r].primal]) {
      hs.d_relation[r] = hs.n_d++;
      hs.d_rows.push_back(static_cast<int>(r));
    }

  hs.p_slot_index.resize(topo.num_subdomains);
  hs.d_slot_index.resize(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    const int nb = topo.boundary_count(s);
    std::vector<bool> constrained(nb, false);
    for (int i = 0; i < nb; ++i) constrained[i] = is_p[topo.primal_index[s][i]];
    hs.split.emplace_back(ws.problem->subdomains[s], topo.boundary_dofs[s], constrained);
    std::vector<bool> inverted(nb);
    for (int i = 0; i < nb; ++i) inverted[i] = !constrained[i];
    hs.complement.emplace_back(ws.problem->subdomains[s], topo.boundary_dofs[s], inverted);

    hs.p_slot_index[s].assign(nb, -1);
    hs.d_slot_index[s].assign(nb, -1);
    const auto& ps = hs.split[s].p_slots();
    for (size_t i = 0; i < ps.size(); ++i) hs.p_slot_index[s][ps[i]] = static_cast<int>(i);
    const auto& dsl = hs.split[s].d_slots();
    for (size_t i = 0; i < dsl.size(); ++i) hs.d_slot_index[s][dsl[i]] = static_cast<int>(i);
  }
  return hs;
}

Vector hybrid_gather_up(const Workspace& ws, const HybridSpace& hs, const Vector& x, int s) {
  const auto& ps = hs.split[s].p_slots();
  Vector up(static_cast<int>(ps.size()));
  for (size_t i = 0; i < ps.size(); ++i)
    up[static_cast<int>(i)] = x[hs.p_index[ws.topology.primal_index[s][ps[i]]]];
  return up;
}

Vector hybrid_lambda_d(const Workspace& ws, const HybridSpace& hs, const Vector& xd, int s) {
  Vector ld = Vector::Zero(hs.split[s].num_d());
  const auto& rels = ws.topology.relations(DualFlavor::Redundant);
  for (int di = 0; di < hs.n_d; ++di) {
    const DualRelation& rel = rels[hs.d_rows[di]];
    for (const DualEntry& en : rel.entries)
      if (en.subdomain == s) ld[hs.d_slot_index[s][en.slot]] += en.weight * xd[di];
  }
  return ld;
}

}  // namespace

std::pair<Vector, SolverReport> solve_hybrid(const Workspace& ws, const MethodConfig& cfg) {
  cfg.validate();
  if (ws.topology.num_primal == 0) return direct_fallback(ws, cfg);
  SolverReport rep;

  const auto& topo = ws.topology;
  ScalingSet sc = build_scaling(topo, *ws.problem, cfg.scaling);
  HybridSpace hs = build_hybrid_space(ws, parse_split(ws, cfg.hybrid_split));
  const int n = hs.n_p + hs.n_d;
  const auto& rels = topo.relations(DualFlavor::Redundant);

  auto scatter_pd = [&](const std::vector<Vector>& lp, const std::vector<Vector>& ud) {
    Vector out = Vector::Zero(n);
    for (int s = 0; s < topo.num_subdomains; ++s) {
      const auto& ps = hs.split[s].p_slots();
      for (size_t i = 0; i < ps.size(); ++i)
        out[hs.p_index[topo.primal_index[s][ps[i]]]] += lp[s][static_cast<int>(i)];
    }
    for (int di = 0; di < hs.n_d; ++di) {
      const DualRelation& rel = rels[hs.d_rows[di]];
      for (const DualEntry& en : rel.entries)
        out[hs.n_p + di] += en.weight * ud[en.subdomain][hs.d_slot_index[en.subdomain][en.slot]];
    }
    return out;
  };

  LinearMap op = {n, [&ws, &hs, &topo, &rels, n, scatter_pd](const Vector& x) {
                    std::vector<Vector> lp(topo.num_subdomains), ud(topo.num_subdomains);
                    const Vector xd = x.tail(x.size() - hs.n_p);
                    for (int s = 0; s < topo.num_subdomains; ++s) {
                      Vector up = hybrid_gather_up(ws, hs, x, s);
                      Vector ld = hybrid_lambda_d(ws, hs, xd, s);
                      hs.split[s].apply(up, ld, lp[s], ud[s]);
                    }
                    return scatter_pd(lp, ud);
                  }};

  // right-hand side: condensed efforts on p, displacement responses on d
  Vector rhs;
  {
    std::vector<Vector> lp(topo.num_subdomains), ud(topo.num_subdomains);
    for (int s = 0; s < topo.num_subdomains; ++s) {
      lp[s] = hs.split[s].condensed_p_load();
      ud[s] = -hs.split[s].condensed_d_load();
    }
    rhs = scatter_pd(lp, ud);
  }

  // admissibility columns from the clamped-side kernels
  std::vector<std::pair<int, int>> gcols;
  Matrix gcol(n, 0), grow(n, 0);
  {
    std::vector<Vector> cols_c, cols_r;
    for (int s = 0; s < topo.num_subdomains; ++s) {
      const int r = hs.split[s].kernel_dim();
      if (r == 0) continue;
      Matrix reaction = hs.split[s].reaction_modes();
      Matrix d_rows_m = hs.split[s].kernel_d_rows();
      for (int k = 0; k < r; ++k) {
        std::vector<Vector> lp(topo.num_subdomains), ud(topo.num_subdomains);
        for (int t = 0; t < topo.num_subdomains; ++t) {
          lp[t] = Vector::Zero(hs.split[t].num_p());
          ud[t] = Vector::Zero(hs.split[t].num_d());
        }
        lp[s] = reaction.col(k);
        ud[s] = d_rows_m.col(k);
        Vector col = scatter_pd(lp, ud);
        Vector row = col;
        row.head(hs.n_p) *= -1.0;  // effort constraints enter the row negated
        cols_c.push_back(col);
        cols_r.push_back(row);
        gcols.push_back({s, k});
      }
    }
    gcol.resize(n, static_cast<int>(cols_c.size()));
    grow.resize(n, static_cast<int>(cols_c.size()));
    for (size_t c = 0; c < cols_c.size(); ++c) {
      gcol.col(static_cast<int>(c)) = cols_c[c];
      grow.col(static_cast<int>(c)) = cols_r[c];
    }
  }
  Vector e(gcol.cols());
  for (size_t c = 0; c < gcols.size(); ++c)
    e[static_cast<int>(c)] = hs.split[gcols[c].first].kernel_load(gcols[c].second);

  // projector shaping: identity on the p block, configurable on the d block
  LinearMap qmap = {n, [&ws, &hs, &topo, &rels, &sc, &cfg, n](const Vector& v) {
                      Vector out = v;
                      if (hs.n_d == 0 || cfg.projector_q == ProjectorQ::Identity) return out;
                      Vector vd = v.tail(hs.n_d);
                      if (cfg.projector_q == ProjectorQ::Multiplicity) {
                        const auto& rels2 = topo.relations(DualFlavor::Redundant);
                        for (int di = 0; di < hs.n_d; ++di)
                          out[hs.n_p + di] =
                              vd[di] / topo.multiplicity[rels2[hs.d_rows[di]].primal];
                        return out;
                      }
                      // weighted local boundary operators restricted to the d block
                      std::vector<Vector> xb(topo.num_subdomains);
                      for (int s = 0; s < topo.num_subdomains; ++s) {
                        xb[s] = Vector::Zero(topo.boundary_count(s));
                        for (int di = 0; di < hs.n_d; ++di) {
                          const DualRelation& rel = rels[hs.d_rows[di]];
                          for (const DualEntry& en : rel.entries)
                            if (en.subdomain == s)
                              xb[s][en.slot] +=
                                  en.weight * sc.neighbor_share(topo, rel, en.subdomain == rel.plus_subdomain ? 0 : 1) * vd[di];
                        }
                      }
                      for (int s = 0; s < topo.num_subdomains; ++s) {
                        const auto& so = ws.ops.sub[s];
                        if (cfg.projector_q == ProjectorQ::Dirichlet)
                          xb[s] = so.schur_primal_apply(xb[s]);
                        else if (cfg.projector_q == ProjectorQ::Lumped)
                          xb[s] = so.lumped_apply(xb[s]);
                        else
                          xb[s] = so.superlumped_apply(xb[s]);
                      }
                      for (int di = 0; di < hs.n_d; ++di) {
                        const DualRelation& rel = rels[hs.d_rows[di]];
                        double acc = 0.0;
                        for (int eidx = 0; eidx < 2; ++eidx) {
                          const DualEntry& en = rel.entries[eidx];
                          acc += en.weight * sc.neighbor_share(topo, rel, eidx) *
                                 xb[en.subdomain][en.slot];
                        }
                        out[hs.n_p + di] = acc;
                      }
                      return out;
                    }};

  ProjectorPair adm = gcol.cols() > 0
                          ? make_admissibility_projector(gcol, grow, Vector(-e), qmap)
                          : identity_projector(n);

  // optimality columns from the preconditioner-side kernels, weighted
  Matrix copt(n, 0);
  if (cfg.coarse == CoarseMode::AutoRbm) {
    std::vector<Vector> cols;
    for (int s = 0; s < topo.num_subdomains; ++s) {
      const int r = hs.complement[s].kernel_dim();
      if (r == 0) continue;
      Matrix modes_p = hs.complement[s].kernel_d_rows();   // values at our p slots
      Matrix react_d = hs.complement[s].reaction_modes();  // reactions on our d slots
      for (int k = 0; k < r; ++k) {
        Vector col = Vector::Zero(n);
        const auto& ps = hs.split[s].p_slots();
        for (size_t i = 0; i < ps.size(); ++i)
          col[hs.p_index[topo.primal_index[s][ps[i]]]] +=
              sc.share[s][ps[i]] * modes_p(static_cast<int>(i), k);
        for (int di = 0; di < hs.n_d; ++di) {
          const DualRelation& rel = rels[hs.d_rows[di]];
          for (int eidx = 0; eidx < 2; ++eidx) {
            const DualEntry& en = rel.entries[eidx];
            if (en.subdomain != s) continue;
            col[hs.n_p + di] += en.weight * sc.neighbor_share(topo, rel, eidx) *
                                react_d(hs.d_slot_index[s][en.slot], k);
          }
        }
        cols.push_back(col);
      }
    }
    copt.resize(n, static_cast<int>(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c) copt.col(static_cast<int>(c)) = cols[c];
    copt = filter_rank(copt);
  }

  // transpose apply: flip the sign of the free block on both sides
  LinearMap op_t = {n, [&op, &hs, n](const Vector& v) {
                      Vector w = v;
                      w.tail(hs.n_d) *= -1.0;
                      Vector y = op(w);
                      y.tail(hs.n_d) *= -1.0;
                      return y;
                    }};
  ProjectorPair pair = nest_projectors(adm, copt, op, rhs, /*symmetric=*/false, &op_t);

  // preconditioner: weighted assembly of the complementary condensations
  LinearMap precond = {n, [&ws, &hs, &topo, &rels, &sc, n, scatter_pd](const Vector& r) {
                         std::vector<Vector> up(topo.num_subdomains), ld(topo.num_subdomains);
                         const Vector rd = r.tail(hs.n_d);
                         for (int s = 0; s < topo.num_subdomains; ++s) {
                           // weighted distribution of the residual
                           const auto& ps = hs.split[s].p_slots();
                           Vector lp(static_cast<int>(ps.size()));
                           for (size_t i = 0; i < ps.size(); ++i)
                             lp[static_cast<int>(i)] =
                                 sc.share[s][ps[i]] *
                                 r[hs.p_index[topo.primal_index[s][ps[i]]]];
                           Vector ud = Vector::Zero(hs.split[s].num_d());
                           for (int di = 0; di < hs.n_d; ++di) {
                             const DualRelation& rel = rels[hs.d_rows[di]];
                             for (int eidx = 0; eidx < 2; ++eidx) {
                               const DualEntry& en = rel.entries[eidx];
                               if (en.subdomain == s)
                                 ud[hs.d_slot_index[s][en.slot]] +=
                                     en.weight * sc.neighbor_share(topo, rel, eidx) * rd[di];
                             }
                           }
                           // complementary condensation: effort on p, displacement on d
                           Vector up_out, ld_out;
                           hs.complement[s].apply(ud, lp, ld_out, up_out);
                           // roles are swapped relative to the complement split
                           up[s] = up_out;
                           ld[s] = ld_out;
                         }
                         // weighted assembly back
                         Vector out = Vector::Zero(n);
                         for (int s = 0; s < topo.num_subdomains; ++s) {
                           const auto& ps = hs.split[s].p_slots();
                           for (size_t i = 0; i < ps.size(); ++i)
                             out[hs.p_index[topo.primal_index[s][ps[i]]]] +=
                                 sc.share[s][ps[i]] * up[s][static_cast<int>(i)];
                         }
                         for (int di = 0; di < hs.n_d; ++di) {
                           const DualRelation& rel = rels[hs.d_rows[di]];
                           for (int eidx = 0; eidx < 2; ++eidx) {
                             const DualEntry& en = rel.entries[eidx];
                             out[hs.n_p + di] +=
                                 en.weight * sc.neighbor_share(topo, rel, eidx) *
                                 ld[en.subdomain][hs.d_slot_index[en.subdomain][en.slot]];
                           }
                         }
                         return out;
                       }};

  // per-subdomain solve-side fields plus kernel amplitudes, then the averaged
  // interface displacement; shared by the stop test and the final answer
  auto build_field = [&](const Vector& x) -> Vector {
    Vector alpha(0);
    if (gcol.cols() > 0) alpha = adm.multipliers(rhs - op(x));
    const Vector xd = x.tail(hs.n_d);
    std::vector<Vector> xb(topo.num_subdomains);
    for (int s = 0; s < topo.num_subdomains; ++s) {
      Vector up = hybrid_gather_up(ws, hs, x, s);
      Vector ld = hybrid_lambda_d(ws, hs, xd, s);
      Vector y = hs.split[s].pseudo_solve_side(hs.split[s].side_load() +
                                               hs.split[s].scatter_d(ld) -
                                               hs.split[s].couple_from_p(up));
      if (hs.split[s].kernel_dim() > 0) {
        Vector a = Vector::Zero(hs.split[s].kernel_dim());
        for (size_t c = 0; c < gcols.size(); ++c)
          if (gcols[c].first == s) a[gcols[c].second] = alpha[static_cast<int>(c)];
        y += hs.split[s].kernel() * a;
      }
      // boundary trace: constrained part imposed, free part from the solve
      xb[s] = Vector::Zero(topo.boundary_count(s));
      const auto& ps = hs.split[s].p_slots();
      for (size_t i = 0; i < ps.size(); ++i) xb[s][ps[i]] = up[static_cast<int>(i)];
      Vector ud = hs.split[s].gather_d(y);
      const auto& dsl = hs.split[s].d_slots();
      for (size_t i = 0; i < dsl.size(); ++i) xb[s][dsl[i]] = ud[static_cast<int>(i)];
    }
    return reconstruct_from_interface(ws, assemble_primal_scaled(topo, sc, xb));
  };

  KrylovConfig kc = krylov_config(cfg);
  const Workspace* wsp = &ws;
  kc.stop_metric = [&build_field, wsp](const Vector& x, const Vector&) {
    return global_residual(*wsp, build_field(x));
  };
  Vector x;
  KrylovResult res = constrained_gmres(op, rhs, &precond, pair, kc, &x);

  Vector u = build_field(x);
  finish_report(ws, cfg, res, u, rep);
  rep.coarse_admissibility = static_cast<int>(gcol.cols());
  rep.coarse_augmentation = static_cast<int>(copt.cols());
  return {u, rep};
}

// ------------------------------------------------------------------ FETI-DP

namespace {

struct RecondensedSpace {
  std::vector<int> corner_dofs;       // primal dof ids
  std::vector<int> corner_index;      // primal dof -> global corner id, -1
  int n_c = 0;
  std::vector<int> d_rows;            // redundant relation ids on the remainder
  int n_d = 0;
  std::deque<SplitOperators> split;   // clamp corners
  std::vector<std::vector<int>> p_slot_index, d_slot_index;
  Matrix spp;                         // assembled corner stiffness
  Eigen::LDLT<Matrix> spp_solver;
  Vector bc;                          // assembled corner load
};

RecondensedSpace build_recondensed(const Workspace& ws, const std::vector<int>& corners,
                                   const char* who) {
  const auto& topo = ws.topology;
  RecondensedSpace rs;
  rs.corner_dofs = corners;
  rs.corner_index.assign(topo.num_primal, -1);
  for (int p : corners) rs.corner_index[p] = rs.n_c++;

  const auto& rels = topo.relations(DualFlavor::Redundant);
  for (size_t r = 0; r < rels.size(); ++r)
    if (rs.corner_index[rels[r].primal] < 0) {
      rs.d_rows.push_back(static_cast<int>(r));
      ++rs.n_d;
    }

  rs.p_slot_index.resize(topo.num_subdomains);
  rs.d_slot_index.resize(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    const int nb = topo.boundary_count(s);
    std::vector<bool> constrained(nb, false);
    for (int i = 0; i < nb; ++i) constrained[i] = rs.corner_index[topo.primal_index[s][i]] >= 0;
    rs.split.emplace_back(ws.problem->subdomains[s], topo.boundary_dofs[s], constrained);
    if (rs.split[s].kernel_dim() > 0) {
      std::ostringstream msg;
      msg << who << ": constrained local stiffness of subdomain " << s
          << " is singular; enrich the corner set";
      throw std::runtime_error(msg.str());
    }
    rs.p_slot_index[s].assign(nb, -1);
    rs.d_slot_index[s].assign(nb, -1);
    const auto& ps = rs.split[s].p_slots();
    for (size_t i = 0; i < ps.size(); ++i) rs.p_slot_index[s][ps[i]] = static_cast<int>(i);
    const auto& dsl = rs.split[s].d_slots();
    for (size_t i = 0; i < dsl.size(); ++i) rs.d_slot_index[s][dsl[i]] = static_cast<int>(i);
  }

  rs.spp = Matrix::Zero(rs.n_c, rs.n_c);
  rs.bc = Vector::Zero(rs.n_c);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    const auto& ps = rs.split[s].p_slots();
    if (ps.empty()) continue;
    Matrix local = rs.split[s].condensed_pp();
    Vector load = rs.split[s].p_load();  // raw; condensation enters via reactions
    std::vector<int> gidx(ps.size());
    for (size_t i = 0; i < ps.size(); ++i)
      gidx[i] = rs.corner_index[topo.primal_index[s][ps[i]]];
    for (size_t i = 0; i < ps.size(); ++i) {
      rs.bc[gidx[i]] += load[static_cast<int>(i)];
      for (size_t j = 0; j < ps.size(); ++j)
        rs.spp(gidx[i], gidx[j]) += local(static_cast<int>(i), static_cast<int>(j));
    }
  }
  rs.spp_solver.compute(rs.spp);
  if (rs.spp_solver.info() != Eigen::Success)
    throw std::runtime_error(std::string(who) + ": corner coarse factorization failed");
  return rs;
}

Vector recondensed_lambda_side(const Workspace& ws, const RecondensedSpace& rs,
                               const Vector& lambda, int s) {
  Vector ld = Vector::Zero(rs.split[s].num_d());
  const auto& rels = ws.topology.relations(DualFlavor::Redundant);
  for (int di = 0; di < rs.n_d; ++di) {
    const DualRelation& rel = rels[rs.d_rows[di]];
    for (const DualEntry& en : rel.entries)
      if (en.subdomain == s) ld[rs.d_slot_index[s][en.slot]] += en.weight * lambda[di];
  }
  return ld;
}

Vector recondensed_corner_gather(const Workspace& ws, const RecondensedSpace& rs,
                                 const Vector& uc, int s) {
  const auto& ps = rs.split[s].p_slots();
  Vector up(static_cast<int>(ps.size()));
  for (size_t i = 0; i < ps.size(); ++i)
    up[static_cast<int>(i)] = uc[rs.corner_index[ws.topology.primal_index[s][ps[i]]]];
  return up;
}

/// One operator application of the corner-condensed dual system.
Vector recondensed_apply(const Workspace& ws, const RecondensedSpace& rs,
                         const Vector& lambda) {
  const auto& topo = ws.topology;
  const auto& rels = topo.relations(DualFlavor::Redundant);
  std::vector<Vector> y1(topo.num_subdomains);
  Vector coarse = Vector::Zero(rs.n_c);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    Vector ld = recondensed_lambda_side(ws, rs, lambda, s);
    y1[s] = rs.split[s].pseudo_solve_side(rs.split[s].scatter_d(ld));
    Vector react = rs.split[s].clamp_reaction(y1[s]);
    const auto& ps = rs.split[s].p_slots();
    for (size_t i = 0; i < ps.size(); ++i)
      coarse[rs.corner_index[topo.primal_index[s][ps[i]]]] += react[static_cast<int>(i)];
  }
  Vector uc = rs.spp_solver.solve(coarse);
  Vector out = Vector::Zero(rs.n_d);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    Vector up = recondensed_corner_gather(ws, rs, uc, s);
    Vector y = y1[s] + rs.split[s].pseudo_solve_side(rs.split[s].couple_from_p(up));
    Vector ud = rs.split[s].gather_d(y);
    for (int di = 0; di < rs.n_d; ++di) {
      const DualRelation& rel = rels[rs.d_rows[di]];
      for (const DualEntry& en : rel.entries)
        if (en.subdomain == s) out[di] += en.weight * ud[rs.d_slot_index[s][en.slot]];
    }
  }
  return out;
}

/// Displacement field for a given remainder effort (corner solve included).
Vector recondensed_reconstruct(const Workspace& ws, const RecondensedSpace& rs,
                               const ScalingSet& sc, const Vector& lambda) {
  const auto& topo = ws.topology;
  // corner balance under loads and the interface effort
  Vector coarse = rs.bc;
  std::vector<Vector> ld_all(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    ld_all[s] = recondensed_lambda_side(ws, rs, lambda, s);
    Vector y = rs.split[s].pseudo_solve_side(rs.split[s].side_load() +
                                             rs.split[s].scatter_d(ld_all[s]));
    Vector react = rs.split[s].clamp_reaction(y);
    const auto& ps = rs.split[s].p_slots();
    for (size_t i = 0; i < ps.size(); ++i)
      coarse[rs.corner_index[topo.primal_index[s][ps[i]]]] -= react[static_cast<int>(i)];
  }
  Vector uc = rs.spp_solver.solve(coarse);

  std::vector<Vector> xb(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    Vector up = recondensed_corner_gather(ws, rs, uc, s);
    Vector y = rs.split[s].pseudo_solve_side(rs.split[s].side_load() +
                                             rs.split[s].scatter_d(ld_all[s]) -
                                             rs.split[s].couple_from_p(up));
    xb[s] = Vector::Zero(topo.boundary_count(s));
    const auto& ps = rs.split[s].p_slots();
    for (size_t i = 0; i < ps.size(); ++i) xb[s][ps[i]] = up[static_cast<int>(i)];
    Vector ud = rs.split[s].gather_d(y);
    const auto& dsl = rs.split[s].d_slots();
    for (size_t i = 0; i < dsl.size(); ++i) xb[s][dsl[i]] = ud[static_cast<int>(i)];
  }
  return assemble_primal_scaled(topo, sc, xb);
}

}  // namespace

std::vector<SparseMatrix> build_change_of_basis(const Workspace& ws,
                                                bool stiffness_scaled) {
  const auto& topo = ws.topology;
  const auto corners = corner_primal_dofs(ws);
  std::vector<bool> is_corner(topo.num_primal, false);
  for (int p : corners) is_corner[p] = true;

  // edges: non-corner dofs grouped by owner pair and component
  std::map<std::pair<std::vector<int>, int>, std::vector<int>> edges;
  for (int p = 0; p < topo.num_primal; ++p) {
    if (is_corner[p] || topo.multiplicity[p] != 2) continue;
    const int s = topo.owners[p][0];
    const int local = topo.boundary_dofs[s][topo.owner_slots[p][0]];
    const int comp = ws.problem->subdomains[s].dof_comp[local];
    edges[{topo.owners[p], comp}].push_back(p);
  }

  std::vector<std::vector<Eigen::Triplet<double>>> trips(topo.num_subdomains);
  std::vector<std::vector<bool>> touched(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s)
    touched[s].assign(ws.problem->subdomains[s].num_dofs(), false);

  for (auto& [key, dofs] : edges) {
    const int k = static_cast<int>(dofs.size());
    Vector c = Vector::Ones(k);
    if (stiffness_scaled) {
      for (int i = 0; i < k; ++i) {
        const int p = dofs[i];
        double wsum = 0.0;
        for (size_t o = 0; o < topo.owners[p].size(); ++o) {
          const int s = topo.owners[p][o];
          wsum += ws.ops.sub[s].kbb_diagonal()[topo.owner_slots[p][o]];
        }
        c[i] = wsum;
      }
    }
    c /= c.norm();
    Matrix h = Matrix::Identity(k, k);
    Vector v = c - Vector::Unit(k, 0);
    if (v.norm() > 1e-14) h -= (2.0 / v.squaredNorm()) * (v * v.transpose());

    for (int owner : key.first) {
      // local dof per edge dof in this owner
      std::vector<int> locals(k);
      for (int i = 0; i < k; ++i) {
        const int p = dofs[i];
        for (size_t o = 0; o < topo.owners[p].size(); ++o)
          if (topo.owners[p][o] == owner)
            locals[i] = topo.boundary_dofs[owner][topo.owner_slots[p][o]];
      }
      for (int i = 0; i < k; ++i) {
        touched[owner][locals[i]] = true;
        for (int j = 0; j < k; ++j)
          if (std::abs(h(i, j)) > 0.0)
            trips[owner].emplace_back(locals[i], locals[j], h(i, j));
      }
    }
  }

  std::vector<SparseMatrix> t(topo.num_subdomains);
  for (int s = 0; s < topo.num_subdomains; ++s) {
    const int nd = ws.problem->subdomains[s].num_dofs();
    for (int d = 0; d < nd; ++d)
      if (!touched[s][d]) trips[s].emplace_back(d, d, 1.0);
    t[s].resize(nd, nd);
    t[s].setFromTriplets(trips[s].begin(), trips[s].end());
  }
  return t;
}

std::pair<Vector, SolverReport> solve_fetidp(const Workspace& ws, const MethodConfig& cfg) {
  cfg.validate();
  if (ws.topology.num_primal == 0) return direct_fallback(ws, cfg);
  SolverReport rep;

  const bool with_averages =
      cfg.fetidp_constraints == FetidpConstraints::CornersPlusEdgeAverages;

  // optional change of basis: edge averages become leading dofs
  std::unique_ptr<DecomposedProblem> transformed;
  std::unique_ptr<Workspace> tws;
  std::vector<SparseMatrix> basis;
  const Workspace* w = &ws;
  std::vector<int> corners =
      cfg.custom_corners.empty() ? corner_primal_dofs(ws) : cfg.custom_corners;
  if (with_averages) {
    basis = build_change_of_basis(ws, cfg.edge_average_stiffness_scaled);
    transformed = std::make_unique<DecomposedProblem>(*ws.problem);
    for (int s = 0; s < ws.topology.num_subdomains; ++s) {
      Subdomain& sub = transformed->subdomains[s];
      sub.K = SparseMatrix(basis[s].transpose() * sub.K * basis[s]);
      sub.f = basis[s].transpose() * sub.f;
    }
    tws = std::make_unique<Workspace>(*transformed);
    w = tws.get();
    // leading dof of each edge carries the average: promote it to the corner set
    std::set<int> cset(corners.begin(), corners.end());
    std::map<std::pair<std::vector<int>, int>, int> leading;
    const auto& topo = ws.topology;
    std::vector<bool> is_corner(topo.num_primal, false);
    for (int p : corners) is_corner[p] = true;
    for (int p = 0; p < topo.num_primal; ++p) {
      if (is_corner[p] || topo.multiplicity[p] != 2) continue;
      const int s = topo.owners[p][0];
      const int local = topo.boundary_dofs[s][topo.owner_slots[p][0]];
      const int comp = ws.problem->subdomains[s].dof_comp[local];
      auto key = std::make_pair(topo.owners[p], comp);
      if (!leading.count(key)) leading[key] = p;  // dofs scanned in primal order
    }
    for (auto& [key, p] : leading) cset.insert(p);
    corners.assign(cset.begin(), cset.end());
  }

  RecondensedSpace rs = build_recondensed(*w, corners, "fetidp");
  ScalingSet sc = build_scaling(w->topology, *w->problem, cfg.scaling);

  SolverReport base;
  base.coarse_augmentation = rs.n_c;
  Vector lambda = Vector::Zero(rs.n_d);
  KrylovResult res;

  if (rs.n_d == 0) {
    res.converged = true;  // fully primal interface: single coarse solve
  } else {
    LinearMap op = {rs.n_d,
                    [w, &rs](const Vector& l) { return recondensed_apply(*w, rs, l); }};
    Vector rhs;
    {
      // rhs of the condensed dual system: remainder jump under loads
      const auto& topo = w->topology;
      const auto& rels = topo.relations(DualFlavor::Redundant);
      Vector coarse = rs.bc;
      std::vector<Vector> y1(topo.num_subdomains);
      for (int s = 0; s < topo.num_subdomains; ++s) {
        y1[s] = rs.split[s].pseudo_solve_side(rs.split[s].side_load());
        Vector react = rs.split[s].clamp_reaction(y1[s]);
        const auto& ps = rs.split[s].p_slots();
        for (size_t i = 0; i < ps.size(); ++i)
          coarse[rs.corner_index[topo.primal_index[s][ps[i]]]] -= react[static_cast<int>(i)];
      }
      Vector uf = rs.spp_solver.solve(coarse);
      rhs = Vector::Zero(rs.n_d);
      for (int s = 0; s < topo.num_subdomains; ++s) {
        Vector up = recondensed_corner_gather(*w, rs, uf, s);
        Vector y = y1[s] - rs.split[s].pseudo_solve_side(rs.split[s].couple_from_p(up));
        Vector ud = rs.split[s].gather_d(y);
        for (int di = 0; di < rs.n_d; ++di) {
          const DualRelation& rel = rels[rs.d_rows[di]];
          for (const DualEntry& en : rel.entries)
            if (en.subdomain == s) rhs[di] -= en.weight * ud[rs.d_slot_index[s][en.slot]];
        }
      }
    }

    // Dirichlet-style preconditioner restricted to the remainder
    LinearMap precond = {
        rs.n_d, [w, &rs, &sc](const Vector& r) {
          const auto& topo = w->topology;
          const auto& rels = topo.relations(DualFlavor::Redundant);
          std::vector<Vector> xb(topo.num_subdomains);
          for (int s = 0; s < topo.num_subdomains; ++s) {
            xb[s] = Vector::Zero(topo.boundary_count(s));
            for (int di = 0; di < rs.n_d; ++di) {
              const DualRelation& rel = rels[rs.d_rows[di]];
              for (int eidx = 0; eidx < 2; ++eidx) {
                const DualEntry& en = rel.entries[eidx];
                if (en.subdomain == s)
                  xb[s][en.slot] +=
                      en.weight * sc.neighbor_share(topo, rel, eidx) * r[di];
              }
            }
            xb[s] = w->ops.sub[s].schur_primal_apply(xb[s]);
          }
          Vector out = Vector::Zero(rs.n_d);
          for (int di = 0; di < rs.n_d; ++di) {
            const DualRelation& rel = rels[rs.d_rows[di]];
            for (int eidx = 0; eidx < 2; ++eidx) {
              const DualEntry& en = rel.entries[eidx];
              out[di] += en.weight * sc.neighbor_share(topo, rel, eidx) *
                         xb[en.subdomain][en.slot];
            }
          }
          return out;
        }};

    KrylovConfig kc = krylov_config(cfg);
    const ScalingSet* scp = &sc;
    kc.stop_metric = [w, &rs, scp](const Vector& x, const Vector&) {
      Vector u_b = recondensed_reconstruct(*w, rs, *scp, x);
      Vector u = reconstruct_from_interface(*w, u_b);
      return global_residual(*w, u);
    };
    const LinearMap* pc = cfg.preconditioner == Preconditioner::None ? nullptr : &precond;
    res = projected_cg(op, rhs, pc, identity_projector(rs.n_d), kc);
    lambda = res.x;
  }

  Vector u_b = recondensed_reconstruct(*w, rs, sc, lambda);
  Vector u = reconstruct_from_interface(*w, u_b);
  if (with_averages) {
    // map the transformed field back to nodal displacements
    Vector mapped = Vector::Zero(ws.problem->num_global_dofs);
    for (int s = 0; s < ws.topology.num_subdomains; ++s) {
      const Subdomain& sub = ws.problem->subdomains[s];
      Vector local(sub.num_dofs());
      for (int d = 0; d < sub.num_dofs(); ++d) local[d] = u[sub.global_dof[d]];
      Vector back = basis[s] * local;
      for (int d = 0; d < sub.num_dofs(); ++d) mapped[sub.global_dof[d]] = back[d];
    }
    u = mapped;
  }
  finish_report(ws, cfg, res, u, rep);
  rep.coarse_augmentation = rs.n_c;
  return {u, rep};
}

// --------------------------------------------------------------------- BDDC

LinearMap bddc_preconditioner(const Workspace& ws, ScalingKind scaling, int* coarse_size) {
  auto rs = std::make_shared<RecondensedSpace>(
      build_recondensed(ws, corner_primal_dofs(ws), "bddc"));
  auto sc = std::make_shared<ScalingSet>(build_scaling(ws.topology, *ws.problem, scaling));
  if (coarse_size) *coarse_size = rs->n_c;
  const Workspace* w = &ws;
  return {ws.topology.num_primal, [w, rs, sc](const Vector& r) {
            const auto& topo2 = w->topology;
            Vector rc(rs->n_c);
            for (int p = 0; p < topo2.num_primal; ++p)
              if (rs->corner_index[p] >= 0) rc[rs->corner_index[p]] = r[p];

            std::vector<Vector> wd(topo2.num_subdomains), y(topo2.num_subdomains);
            Vector coarse = rc;
            for (int s = 0; s < topo2.num_subdomains; ++s) {
              const auto& dsl = rs->split[s].d_slots();
              wd[s] = Vector(static_cast<int>(dsl.size()));
              for (size_t i = 0; i < dsl.size(); ++i) {
                const int p = topo2.primal_index[s][dsl[i]];
                wd[s][static_cast<int>(i)] = sc->share[s][dsl[i]] * r[p];
              }
              y[s] = rs->split[s].pseudo_solve_side(rs->split[s].scatter_d(wd[s]));
              Vector react = rs->split[s].clamp_reaction(y[s]);
              const auto& ps = rs->split[s].p_slots();
              for (size_t i = 0; i < ps.size(); ++i)
                coarse[rs->corner_index[topo2.primal_index[s][ps[i]]]] -=
                    react[static_cast<int>(i)];
            }
            Vector zc = rs->spp_solver.solve(coarse);

            Vector z = Vector::Zero(topo2.num_primal);
            for (int p = 0; p < topo2.num_primal; ++p)
              if (rs->corner_index[p] >= 0) z[p] = zc[rs->corner_index[p]];
            for (int s = 0; s < topo2.num_subdomains; ++s) {
              Vector up = recondensed_corner_gather(*w, *rs, zc, s);
              Vector y2 =
                  y[s] - rs->split[s].pseudo_solve_side(rs->split[s].couple_from_p(up));
              Vector zd = rs->split[s].gather_d(y2);
              const auto& dsl = rs->split[s].d_slots();
              for (size_t i = 0; i < dsl.size(); ++i) {
                const int p = topo2.primal_index[s][dsl[i]];
                z[p] += sc->share[s][dsl[i]] * zd[static_cast<int>(i)];
              }
            }
            return z;
          }};
}

std::pair<Vector, SolverReport> solve_bddc(const Workspace& ws, const MethodConfig& cfg) {
  cfg.validate();
  if (ws.topology.num_primal == 0) return direct_fallback(ws, cfg);
  SolverReport rep;

  LinearMap op = primal_operator(ws);
  Vector rhs = primal_rhs(ws);
  int coarse_size = 0;
  LinearMap precond = bddc_preconditioner(ws, cfg.scaling, &coarse_size);

  const Workspace* w = &ws;
  KrylovConfig kc = krylov_config(cfg);
  kc.stop_metric = [w](const Vector&, const Vector& r) { return r.norm() / w->f_norm; };
  KrylovResult res = projected_cg(op, rhs, &precond, identity_projector(op.dim), kc);

  Vector u = reconstruct_from_interface(ws, res.x);
  finish_report(ws, cfg, res, u, rep);
  rep.coarse_augmentation = coarse_size;
  return {u, rep};
}

// ------------------------------------------------------------- two-subdomain

std::pair<Vector, SolverReport> solve_mixed2(const Workspace& ws, const MethodConfig& cfg) {
  cfg.validate();
  const auto& topo = ws.topology;
  if (topo.num_subdomains != 2)
    throw std::invalid_argument("mixed two-subdomain method needs exactly 2 subdomains");
  if (topo.num_primal == 0) return direct_fallback(ws, cfg);
  SolverReport rep;

  const int nb = topo.num_primal;
  // permutations: boundary slots of each side into shared interface order
  auto perm_of = [&](int s) {
    std::vector<int> perm(nb, -1);  // primal dof -> slot
    for (int i = 0; i < topo.boundary_count(s); ++i) perm[topo.primal_index[s][i]] = i;
    return perm;
  };
  const auto perm0 = perm_of(0), perm1 = perm_of(1);
  auto permute = [&](const Matrix& m, const std::vector<int>& perm) {
    Matrix out(nb, nb);
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) out(i, j) = m(perm[i], perm[j]);
    return out;
  };
  auto permute_vec = [&](const Vector& v, const std::vector<int>& perm) {
    Vector out(nb);
    for (int i = 0; i < nb; ++i) out[i] = v[perm[i]];
    return out;
  };

  Matrix s0 = permute(ws.ops.sub[0].schur_primal_dense(), perm0);
  Matrix s1 = permute(ws.ops.sub[1].schur_primal_dense(), perm1);
  Vector b0 = permute_vec(ws.ops.sub[0].condensed_load(), perm0);
  Vector b1 = permute_vec(ws.ops.sub[1].condensed_load(), perm1);

  auto interface_stiffness = [&](int neighbor) -> Matrix {
    switch (cfg.mixed_stiffness) {
      case MixedStiffness::NeighborSchur: return neighbor == 0 ? s0 : s1;
      case MixedStiffness::NeighborKbb: {
        Matrix full = Matrix::Zero(nb, nb);
        for (int j = 0; j < nb; ++j)
          full.col(j) = ws.ops.sub[neighbor].lumped_apply(Vector::Unit(nb, j));
        return permute(full, neighbor == 0 ? perm0 : perm1);
      }
      case MixedStiffness::NeighborStrip:
        return permute(strip_schur(ws.problem->subdomains[neighbor],
                                   topo.boundary_dofs[neighbor], cfg.strip_layers),
                       neighbor == 0 ? perm0 : perm1);
      case MixedStiffness::Zero:
        return Matrix::Zero(nb, nb);
    }
    return s0;
  };
  Matrix t0 = interface_stiffness(1);  // side 0 carries the neighbor's stiffness
  Matrix t1 = interface_stiffness(0);

  auto check_invertible = [](const Matrix& m, const char* what) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
    cod.setThreshold(1e-10);
    if (cod.rank() < m.cols())
      throw std::runtime_error(std::string(what) + " is singular");
  };
  check_invertible(t0 + t1, "interface stiffness sum (equivalence condition)");
  Matrix a0 = s0 + t0, a1 = s1 + t1;
  check_invertible(a0, "regularized side 1 operator");
  check_invertible(a1, "regularized side 2 operator");
  Eigen::PartialPivLU<Matrix> lu0(a0), lu1(a1);
  const Matrix tsum = t0 + t1;

  Matrix sys = Matrix::Zero(2 * nb, 2 * nb);
  sys.topLeftCorner(nb, nb) = Matrix::Identity(nb, nb);
  sys.bottomRightCorner(nb, nb) = Matrix::Identity(nb, nb);
  sys.topRightCorner(nb, nb) =
      Matrix::Identity(nb, nb) - tsum * lu1.solve(Matrix::Identity(nb, nb));
  sys.bottomLeftCorner(nb, nb) =
      Matrix::Identity(nb, nb) - tsum * lu0.solve(Matrix::Identity(nb, nb));
  Vector rhs(2 * nb);
  rhs.head(nb) = tsum * lu1.solve(b1);
  rhs.tail(nb) = tsum * lu0.solve(b0);

  ScalingSet sc = build_scaling(topo, *ws.problem, cfg.scaling);
  auto build_field = [&](const Vector& mu) -> Vector {
    Vector u0 = lu0.solve(mu.head(nb) + b0);
    Vector u1 = lu1.solve(mu.tail(nb) + b1);
    std::vector<Vector> xb(2);
    xb[0] = Vector(topo.boundary_count(0));
    xb[1] = Vector(topo.boundary_count(1));
    for (int p = 0; p < nb; ++p) {
      xb[0][perm0[p]] = u0[p];
      xb[1][perm1[p]] = u1[p];
    }
    return reconstruct_from_interface(ws, assemble_primal_scaled(topo, sc, xb));
  };

  KrylovConfig kc = krylov_config(cfg);
  const Workspace* wsp = &ws;
  kc.stop_metric = [&build_field, wsp](const Vector& mu, const Vector&) {
    return global_residual(*wsp, build_field(mu));
  };
  KrylovResult res = gmres(LinearMap::from_dense(sys), rhs, nullptr, kc);

  Vector u = build_field(res.x);
  finish_report(ws, cfg, res, u, rep);
  return {u, rep};
}

// ----------------------------------------------------------------- dispatch

std::pair<Vector, SolverReport> solve(const Workspace& ws, const MethodConfig& cfg) {
  const auto start = Clock::now();
  std::pair<Vector, SolverReport> out;
  switch (cfg.method) {
    case Method::Bdd: out = solve_bdd(ws, cfg); break;
    case Method::Feti: out = solve_feti(ws, cfg); break;
    case Method::Pfeti: out = solve_pfeti(ws, cfg); break;
    case Method::Afeti: out = solve_afeti(ws, cfg); break;
    case Method::Hybrid: out = solve_hybrid(ws, cfg); break;
    case Method::Fetidp: out = solve_fetidp(ws, cfg); break;
    case Method::Bddc: out = solve_bddc(ws, cfg); break;
    case Method::Mixed2: out = solve_mixed2(ws, cfg); break;
  }
  out.second.seconds =
      std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - start).count();
  return out;
}

}  // namespace ddlab
