// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include "ddlab/bench.hpp"
#include "ddlab/methods.hpp"
#include "fixtures.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ddlab;

namespace {

struct Harness {
  int failures = 0;
  std::vector<std::string> details;

  bool expect(bool ok, const std::string& what) {
    if (!ok) details.push_back(what);
    return ok;
  }

  void criterion(int number, const std::string& name, const std::function<bool()>& body) {
    details.clear();
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = body();
    } catch (const std::exception& e) {
      details.push_back(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration_cast<std::chrono::duration<double>>(
            std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d: %s (%.2fs)\n", ok ? "PASS" : "FAIL", number,
                name.c_str(), secs);
    for (const std::string& d : details) std::printf("       - %s\n", d.c_str());
    if (!ok) ++failures;
  }
};

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

ProblemSpec het_soft_loaded(int p, int m) {
  ProblemSpec spec = fixtures::square(p, m);
  Checkerboard cb;
  cb.young_a = 2.0;       // soft cell under the corner load
  cb.young_b = 200000.0;  // ratio 1e5
  cb.cell = m;
  spec.checkerboard = cb;
  return spec;
}

double oracle_gap(const Workspace& ws, const Vector& u) {
  Vector ref = oracle_solve(*ws.problem);
  return (u - ref).norm() / std::max(ref.norm(), 1e-300);
}

bool within(double value, double target, double band) {
  return value >= (1.0 - band) * target && value <= (1.0 + band) * target;
}

std::vector<double> metric_history(const SolverReport& rep) {
  std::vector<double> out;
  for (const IterationRecord& r : rep.history) out.push_back(r.metric);
  return out;
}

std::vector<double> relres_history(const SolverReport& rep) {
  std::vector<double> out;
  for (const IterationRecord& r : rep.history) out.push_back(r.relres);
  return out;
}

bool histories_agree(const std::vector<double>& a, const std::vector<double>& b,
                     double tol) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-300});
    if (std::abs(a[i] - b[i]) > tol * std::max(scale, 1.0)) return false;
  }
  return true;
}

}  // namespace

int main() {
  Harness h;

  // ------------------------------------------------------------------ 1
  h.criterion(1, "interface operator identities on the hand-checked fixture", [&] {
    bool ok = true;
    DecomposedProblem f3 = fixtures::three_subdomain_scalar();
    InterfaceTopology topo = build_topology(f3);

    // reference tables, verbatim
    Matrix p0(4, 3), p1(4, 3), p2(4, 3);
    p0 << 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 1;
    p1 << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0;
    p2 << 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0;
    ok &= h.expect((dense_primal_assembly(topo, 0) - p0).norm() == 0.0 &&
                       (dense_primal_assembly(topo, 1) - p1).norm() == 0.0 &&
                       (dense_primal_assembly(topo, 2) - p2).norm() == 0.0,
                   "geometric assembly tables differ from the reference ones");

    Matrix d0(6, 3), d1(6, 3), d2(6, 3);
    d0 << 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1;
    d1 << 1, 0, 0, 0, 0, -1, 0, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 0;
    d2 << 0, 0, -1, 0, 0, 0, -1, 0, 0, 0, -1, 0, 0, 0, 0, 0, -1, 0;
    ok &= h.expect(
        (dense_dual_assembly(topo, DualFlavor::Redundant, 0) - d0).norm() == 0.0 &&
            (dense_dual_assembly(topo, DualFlavor::Redundant, 1) - d1).norm() == 0.0 &&
            (dense_dual_assembly(topo, DualFlavor::Redundant, 2) - d2).norm() == 0.0,
        "connectivity assembly tables differ from the reference ones");

    const double s2 = 1.0 / std::sqrt(2.0), s6 = 1.0 / std::sqrt(6.0);
    Matrix o0(5, 3);
    o0 << 0, 0, 0, 0, s2, 0, s2, 0, 0, 0, 0, 0, 0, 0, 2 * s6;
    ok &= h.expect(
        (dense_dual_assembly(topo, DualFlavor::Orthonormal, 0) - o0).norm() <= 1e-15,
        "orthonormal connectivity weights differ from the reference ones");

    // identities on every fixture
    std::vector<DecomposedProblem> probs;
    probs.push_back(fixtures::three_subdomain_scalar());
    probs.push_back(build_problem(fixtures::bar(3, 2)));
    probs.push_back(build_problem(fixtures::square(2, 2)));
    probs.push_back(build_problem(fixtures::square(3, 2)));
    for (const DecomposedProblem& problem : probs) {
      InterfaceTopology t = build_topology(problem);
      for (DualFlavor flavor : {DualFlavor::Redundant, DualFlavor::NonRedundant}) {
        Matrix orth = Matrix::Zero(t.num_dual(flavor), t.num_primal);
        for (int s = 0; s < t.num_subdomains; ++s)
          orth += dense_dual_assembly(t, flavor, s) *
                  dense_primal_assembly(t, s).transpose();
        ok &= h.expect(orth.lpNorm<Eigen::Infinity>() == 0.0,
                       "assembly orthogonality violated");
      }
      for (int s = 0; s < t.num_subdomains; ++s) {
        const int nb = t.boundary_count(s);
        Matrix ap = dense_primal_assembly(t, s);
        ok &= h.expect(
            (ap.transpose() * ap - Matrix::Identity(nb, nb)).norm() == 0.0,
            "trace-side normalization violated");
        Matrix ad = dense_dual_assembly(t, DualFlavor::Redundant, s);
        Matrix dtd = ad.transpose() * ad;
        for (int i = 0; i < nb; ++i)
          ok &= h.expect(dtd(i, i) == double(t.multiplicity[t.primal_index[s][i]] - 1),
                         "connectivity multiplicity count violated");
      }
      for (ScalingKind kind : {ScalingKind::Multiplicity, ScalingKind::Stiffness}) {
        ScalingSet sc = build_scaling(t, problem, kind);
        Vector sums = Vector::Zero(t.num_primal);
        for (int s = 0; s < t.num_subdomains; ++s)
          for (int i = 0; i < t.boundary_count(s); ++i)
            sums[t.primal_index[s][i]] += sc.share[s][i];
        ok &= h.expect(
            (sums - Vector::Ones(t.num_primal)).lpNorm<Eigen::Infinity>() <= 1e-14,
            "partition of unity violated");
        const auto& rels = t.relations(DualFlavor::Redundant);
        for (int s = 0; s < t.num_subdomains; ++s) {
          const int nb = t.boundary_count(s);
          Matrix ad = dense_dual_assembly(t, DualFlavor::Redundant, s);
          Matrix mshare = Matrix::Zero(nb, nb);
          for (int i = 0; i < nb; ++i) mshare(i, i) = sc.share[s][i];
          Matrix mdual = Matrix::Zero(ad.rows(), ad.rows());
          for (size_t r = 0; r < rels.size(); ++r)
            for (int e = 0; e < 2; ++e)
              if (rels[r].entries[e].subdomain == s)
                mdual(int(r), int(r)) = sc.neighbor_share(t, rels[r], e);
          ok &= h.expect((mshare + ad.transpose() * mdual * ad -
                          Matrix::Identity(nb, nb))
                                 .norm() <= 1e-14,
                         "weighted-assembly complementarity violated");
        }
      }
    }
    return ok;
  });

  // ------------------------------------------------------------------ 2
  h.criterion(2, "oracle equivalence of every strategy on every fixture", [&] {
    bool ok = true;
    const double eps = 1e-6;
    std::vector<std::pair<std::string, ProblemSpec>> fixtures_list = {
        {"bar1d", fixtures::bar(2, 2)},
        {"SQ(2x2,m=4)", fixtures::square(2, 4)},
        {"SQ(4x4,m=8)", fixtures::square(4, 8)},
        {"HET(4x4,m=8,1e5)", het_soft_loaded(4, 8)},
    };
    for (auto& [name, spec] : fixtures_list) {
      DecomposedProblem problem = build_problem(spec);
      Workspace ws(problem);
      Vector ref = oracle_solve(problem);
      for (Method m : {Method::Bdd, Method::Feti, Method::Pfeti, Method::Afeti,
                       Method::Hybrid, Method::Fetidp, Method::Bddc}) {
        MethodConfig cfg = MethodConfig::for_method(m);
        if (spec.checkerboard) cfg.scaling = ScalingKind::Stiffness;
        cfg.max_iterations = 2000;
        auto [u, rep] = solve(ws, cfg);
        const double gap = (u - ref).norm() / ref.norm();
        ok &= h.expect(rep.converged && gap <= 10.0 * eps,
                       name + "/" + rep.method + fmt(": gap %.2e", gap));
      }
    }
    // the two-piece mixed strategy on its two-piece fixtures
    for (auto& [name, spec] : std::vector<std::pair<std::string, ProblemSpec>>{
             {"bar1d", fixtures::bar(2, 2)}, {"SQ(2x1,m=4)", fixtures::square_grid(2, 1, 4)}}) {
      DecomposedProblem problem = build_problem(spec);
      Workspace ws(problem);
      Vector ref = oracle_solve(problem);
      MethodConfig cfg = MethodConfig::for_method(Method::Mixed2);
      auto [u, rep] = solve(ws, cfg);
      const double gap = (u - ref).norm() / ref.norm();
      ok &= h.expect(rep.converged && gap <= 10.0 * eps,
                     name + "/mixed2" + fmt(": gap %.2e", gap));
    }
    return ok;
  });

  // ------------------------------------------------------------------ 3
  h.criterion(3, "method equivalences", [&] {
    bool ok = true;
    DecomposedProblem problem = build_problem(fixtures::square(3, 4));
    Workspace ws(problem);

    {
      MethodConfig afeti = MethodConfig::for_method(Method::Afeti);
      auto [u1, rep1] = solve_afeti(ws, afeti);
      MethodConfig feti = MethodConfig::for_method(Method::Feti);
      feti.projector_q = ProjectorQ::Multiplicity;
      auto [u2, rep2] = solve_feti(ws, feti);
      ok &= h.expect(rep1.converged && rep2.converged &&
                         histories_agree(metric_history(rep1), metric_history(rep2), 1e-9),
                     "orthonormal-connectivity dual deviates from the classical iterates");
    }
    {
      MethodConfig bdd = MethodConfig::for_method(Method::Bdd);
      auto [u1, rep1] = solve_bdd(ws, bdd);
      MethodConfig pfeti = MethodConfig::for_method(Method::Pfeti);
      pfeti.projector_q = ProjectorQ::Dirichlet;
      auto [u2, rep2] = solve_pfeti(ws, pfeti);
      ok &= h.expect(rep1.converged && rep2.converged &&
                         histories_agree(relres_history(rep1), relres_history(rep2), 1e-9),
                     "mode-eliminating variant deviates from the primal iterates");
    }
    {
      DecomposedProblem small = build_problem(fixtures::square(2, 2));
      Workspace ws2(small);
      MethodConfig hybrid = MethodConfig::for_method(Method::Hybrid);
      hybrid.hybrid_split = "all-p";
      auto [u1, rep1] = solve_hybrid(ws2, hybrid);
      MethodConfig bdd = MethodConfig::for_method(Method::Bdd);
      bdd.solver = SolverChoice::Gmres;
      auto [u2, rep2] = solve_bdd(ws2, bdd);
      ok &= h.expect(histories_agree(relres_history(rep1), relres_history(rep2), 1e-8),
                     "all-constrained split deviates from the primal method");

      MethodConfig hybrid_d = MethodConfig::for_method(Method::Hybrid);
      hybrid_d.hybrid_split = "all-d";
      auto [u3, rep3] = solve_hybrid(ws2, hybrid_d);
      MethodConfig feti = MethodConfig::for_method(Method::Feti);
      feti.solver = SolverChoice::Gmres;
      auto [u4, rep4] = solve_feti(ws2, feti);
      ok &= h.expect(histories_agree(relres_history(rep3), relres_history(rep4), 1e-8),
                     "all-free split deviates from the dual method");
    }
    return ok;
  });

  // ------------------------------------------------------------------ 4
  h.criterion(4, "scalability trends against the reference tables", [&] {
    bool ok = true;

    // (a) 4 -> 25 pieces at 16 elements each: coarse-space effect
    std::vector<int> with_its, without_its;
    for (int p : {2, 3, 4, 5}) {
      DecomposedProblem problem = build_problem(fixtures::square(p, 16));
      Workspace ws(problem);
      MethodConfig with = MethodConfig::for_method(Method::Bdd);
      auto [u1, rep1] = solve_bdd(ws, with);
      with_its.push_back(rep1.iterations);
      if (p == 4)  // 12 floating pieces, three modes each
        ok &= h.expect(rep1.coarse_augmentation == 36,
                       fmt("coarse size %.0f on the 16-piece layout", rep1.coarse_augmentation));
      MethodConfig without = MethodConfig::for_method(Method::Bdd);
      without.coarse = CoarseMode::None;
      without.max_iterations = 2000;
      auto [u2, rep2] = solve_bdd(ws, without);
      without_its.push_back(rep2.iterations);
      ok &= h.expect(rep1.converged && rep2.converged, "primal run failed to converge");
    }
    const double growth_with = double(with_its.back()) / with_its.front();
    const double growth_without = double(without_its.back()) / without_its.front();
    ok &= h.expect(growth_with <= 2.0,
                   fmt("coarse-equipped growth %.2f exceeds 2", growth_with));
    ok &= h.expect(growth_without >= 3.0,
                   fmt("coarse-free growth %.2f below 3", growth_without));
    const std::vector<int> cited_with = {8, 10, 12, 13};
    const std::vector<int> cited_without = {13, 29, 45, 63};
    for (size_t i = 0; i < 4; ++i) {
      ok &= h.expect(within(with_its[i], cited_with[i], 0.5),
                     fmt("coarse-equipped count %.0f vs cited %.0f", with_its[i],
                         cited_with[i]));
      ok &= h.expect(within(without_its[i], cited_without[i], 0.5),
                     fmt("coarse-free count %.0f vs cited %.0f", without_its[i],
                         cited_without[i]));
    }

    // (b) dual method over element counts: monotone, logarithmic-square fit
    std::vector<double> hh = {4, 8, 16};
    std::vector<int> feti_its;
    for (double m : hh) {
      DecomposedProblem problem = build_problem(fixtures::square(4, int(m)));
      Workspace ws(problem);
      MethodConfig feti = MethodConfig::for_method(Method::Feti);
      auto [u, rep] = solve_feti(ws, feti);
      ok &= h.expect(rep.converged, "dual run failed to converge");
      feti_its.push_back(rep.iterations);
    }
    ok &= h.expect(feti_its[0] <= feti_its[1] && feti_its[1] <= feti_its[2],
                   "dual counts not monotone over element counts");
    Matrix a(3, 2);
    Vector y(3);
    for (int i = 0; i < 3; ++i) {
      const double g = 1.0 + std::log(hh[i]);
      a(i, 0) = 1.0;
      a(i, 1) = g * g;
      y[i] = feti_its[i];
    }
    Vector coef = (a.transpose() * a).ldlt().solve(a.transpose() * y);
    const double fit_res = (a * coef - y).norm() / y.norm();
    ok &= h.expect(fit_res < 0.2, fmt("fit residual %.3f above 20%%", fit_res));
    ok &= h.expect(within(feti_its[1], 13, 0.5) && within(feti_its[2], 15, 0.5),
                   fmt("dual counts %.0f/%.0f vs cited 13/15", feti_its[1], feti_its[2]));

    // cited single cells at 16 pieces, 16 elements
    {
      DecomposedProblem problem = build_problem(fixtures::square(4, 16));
      Workspace ws(problem);
      MethodConfig lumped = MethodConfig::for_method(Method::Feti);
      lumped.preconditioner = Preconditioner::Lumped;
      auto [u, rep] = solve_feti(ws, lumped);
      ok &= h.expect(rep.converged && within(rep.iterations, 26, 0.5),
                     fmt("lumped count %.0f vs cited 26", rep.iterations));
    }
    return ok;
  });

  // ------------------------------------------------------------------ 5
  h.criterion(5, "heterogeneity and initialization", [&] {
    bool ok = true;
    DecomposedProblem problem = build_problem(het_soft_loaded(4, 8));
    Workspace ws(problem);

    MethodConfig base = MethodConfig::for_method(Method::Feti);
    base.scaling = ScalingKind::Stiffness;
    base.projector_q = ProjectorQ::Dirichlet;
    base.max_iterations = 2000;

    auto [u0, rep0] = solve_feti(ws, base);
    MethodConfig condensed = base;
    condensed.initialization = Initialization::CondensedSplit;
    auto [u1, rep1] = solve_feti(ws, condensed);
    MethodConfig classical = base;
    classical.initialization = Initialization::ClassicalSplit;
    auto [u2, rep2] = solve_feti(ws, classical);

    ok &= h.expect(rep0.converged && rep1.converged && rep2.converged,
                   "heterogeneous dual runs failed to converge");
    ok &= h.expect(rep1.iterations <= 0.8 * rep0.iterations,
                   fmt("condensed split saved too little: %.0f vs %.0f", rep1.iterations,
                       rep0.iterations));
    ok &= h.expect(std::abs(rep2.iterations - rep0.iterations) <= 1,
                   fmt("classical split moved counts: %.0f vs %.0f", rep2.iterations,
                       rep0.iterations));

    // exact dual weight: immediate convergence on a two-piece fixture
    ProblemSpec spec2 = fixtures::square_grid(2, 1, 2);
    spec2.clamp.right = true;
    DecomposedProblem p2 = build_problem(spec2);
    Workspace ws2(p2);
    MethodConfig exact = MethodConfig::for_method(Method::Feti);
    exact.initialization = Initialization::CondensedSplit;
    exact.init_weight = InitWeight::DualSchur;
    auto [u3, rep3] = solve_feti(ws2, exact);
    ok &= h.expect(rep3.converged && rep3.iterations == 0,
                   fmt("exact-weight initialization needed %.0f iterations",
                       rep3.iterations));
    return ok;
  });

  // ------------------------------------------------------------------ 6
  h.criterion(6, "two-piece mixed strategy with swapped condensations", [&] {
    bool ok = true;
    DecomposedProblem problem = build_problem(fixtures::square_grid(2, 1, 3));
    Workspace ws(problem);
    InterfaceTopology& topo = ws.topology;
    const int nb = topo.num_primal;

    // the system matrix with each side carrying the neighbor's condensed
    // stiffness is the identity
    auto perm_of = [&](int s) {
      std::vector<int> perm(nb, -1);
      for (int i = 0; i < topo.boundary_count(s); ++i) perm[topo.primal_index[s][i]] = i;
      return perm;
    };
    auto permute = [&](const Matrix& m, const std::vector<int>& perm) {
      Matrix out(nb, nb);
      for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) out(i, j) = m(perm[i], perm[j]);
      return out;
    };
    Matrix s0 = permute(ws.ops.sub[0].schur_primal_dense(), perm_of(0));
    Matrix s1 = permute(ws.ops.sub[1].schur_primal_dense(), perm_of(1));
    Matrix tsum = s0 + s1;  // T1 + T2 with T1 = S2, T2 = S1
    Matrix sys = Matrix::Zero(2 * nb, 2 * nb);
    sys.topLeftCorner(nb, nb) = Matrix::Identity(nb, nb);
    sys.bottomRightCorner(nb, nb) = Matrix::Identity(nb, nb);
    sys.topRightCorner(nb, nb) =
        Matrix::Identity(nb, nb) - tsum * (s1 + s0).ldlt().solve(Matrix::Identity(nb, nb));
    sys.bottomLeftCorner(nb, nb) =
        Matrix::Identity(nb, nb) - tsum * (s0 + s1).ldlt().solve(Matrix::Identity(nb, nb));
    ok &= h.expect((sys - Matrix::Identity(2 * nb, 2 * nb)).norm() <= 1e-10,
                   "system matrix differs from the identity");

    MethodConfig cfg = MethodConfig::for_method(Method::Mixed2);
    cfg.mixed_stiffness = MixedStiffness::NeighborSchur;
    auto [u, rep] = solve_mixed2(ws, cfg);
    ok &= h.expect(rep.converged && rep.iterations <= 1,
                   fmt("optimal choice needed %.0f iterations", rep.iterations));
    ok &= h.expect(oracle_gap(ws, u) <= 1e-5, "optimal choice missed the reference");
    return ok;
  });

  // ------------------------------------------------------------------ 7
  h.criterion(7, "constraint maintenance at every iteration", [&] {
    bool ok = true;
    DecomposedProblem problem = build_problem(fixtures::square(3, 4));
    Workspace ws(problem);
    const auto& topo = ws.topology;

    // shared raw material: admissibility data of the dual formulation
    Matrix g(topo.num_dual(DualFlavor::Redundant), ws.ops.total_kernel_dim());
    Vector e(g.cols());
    {
      int col = 0;
      for (int s = 0; s < topo.num_subdomains; ++s)
        for (int k = 0; k < ws.ops.sub[s].kernel_dim(); ++k) {
          std::vector<Vector> xb(topo.num_subdomains);
          for (int t = 0; t < topo.num_subdomains; ++t)
            xb[t] = Vector::Zero(topo.boundary_count(t));
          xb[s] = ws.ops.sub[s].boundary_kernel().col(k);
          g.col(col) = assemble_dual(topo, DualFlavor::Redundant, xb);
          e[col] = ws.ops.sub[s].kernel().col(k).dot(problem.subdomains[s].f);
          ++col;
        }
    }
    auto dual_op = [&](const Vector& lambda) {
      auto xb = distribute_dual(topo, DualFlavor::Redundant, lambda);
      for (int s = 0; s < topo.num_subdomains; ++s)
        xb[s] = ws.ops.sub[s].schur_dual_apply(xb[s], false);
      return assemble_dual(topo, DualFlavor::Redundant, xb);
    };
    Vector dual_rhs;
    {
      std::vector<Vector> xb(topo.num_subdomains);
      for (int s = 0; s < topo.num_subdomains; ++s)
        xb[s] =
            trace_apply(topo, s, ws.ops.sub[s].pseudo_solve(problem.subdomains[s].f));
      dual_rhs = -assemble_dual(topo, DualFlavor::Redundant, xb);
    }

    // plain dual run: admissibility
    {
      double worst = 0.0;
      MethodConfig cfg = MethodConfig::for_method(Method::Feti);
      cfg.observer = [&](int, const Vector& lambda, const Vector&) {
        worst = std::max(worst,
                         (g.transpose() * lambda + e).norm() / (1.0 + lambda.norm()));
      };
      auto [u, rep] = solve_feti(ws, cfg);
      ok &= h.expect(rep.converged && worst <= 1e-10 * (e.norm() + 1.0),
                     fmt("dual admissibility drift %.2e", worst));
    }

    // primal run with the mode coarse space: residual stays balanced
    {
      ScalingSet sc = build_scaling(topo, problem, ScalingKind::Multiplicity);
      std::vector<Vector> cols;
      for (int s = 0; s < topo.num_subdomains; ++s)
        for (int k = 0; k < ws.ops.sub[s].kernel_dim(); ++k) {
          std::vector<Vector> xb(topo.num_subdomains);
          for (int t = 0; t < topo.num_subdomains; ++t)
            xb[t] = Vector::Zero(topo.boundary_count(t));
          xb[s] = ws.ops.sub[s].boundary_kernel().col(k);
          cols.push_back(assemble_primal_scaled(topo, sc, xb));
        }
      Matrix gp(topo.num_primal, int(cols.size()));
      for (size_t c = 0; c < cols.size(); ++c) gp.col(int(c)) = cols[c];

      double worst = 0.0;
      MethodConfig cfg = MethodConfig::for_method(Method::Bdd);
      cfg.observer = [&](int, const Vector&, const Vector& r) {
        if (r.size()) worst = std::max(worst, (gp.transpose() * r).norm() / (1.0 + r.norm()));
      };
      auto [u, rep] = solve_bdd(ws, cfg);
      ok &= h.expect(rep.converged && worst <= 1e-10,
                     fmt("balanced-residual drift %.2e", worst));
    }

    // corner-augmented dual run: both families
    {
      ScalingSet sc = build_scaling(topo, problem, ScalingKind::Multiplicity);
      Matrix cd = corner_constraint_matrix(ws, ConstraintSide::Dual, sc);
      ProjectorPair adm =
          make_admissibility_projector(g, Vector(-e), LinearMap::identity(g.rows()));
      Matrix w(g.rows(), cd.cols());
      for (int c = 0; c < cd.cols(); ++c) w.col(c) = adm.apply(cd.col(c));

      double worst_adm = 0.0, worst_aug = 0.0;
      MethodConfig cfg = MethodConfig::for_method(Method::Feti);
      cfg.constraint_source = ConstraintSource::Corners;
      cfg.observer = [&](int, const Vector& lambda, const Vector&) {
        worst_adm = std::max(
            worst_adm, (g.transpose() * lambda + e).norm() / (1.0 + lambda.norm()));
        Vector rho = dual_rhs - dual_op(lambda);
        worst_aug =
            std::max(worst_aug, (w.transpose() * rho).norm() / (1.0 + rho.norm()));
      };
      auto [u, rep] = solve_feti(ws, cfg);
      const double scale = dual_rhs.norm() + e.norm() + 1.0;
      ok &= h.expect(rep.converged && worst_adm <= 1e-10 * scale &&
                         worst_aug <= 1e-10 * scale,
                     fmt("corner-augmented drifts %.2e / %.2e", worst_adm, worst_aug));
    }

    // per-dof split run: both constraint families through its own machinery
    {
      std::vector<bool> is_p(topo.num_primal, false);
      for (int p = 0; p < topo.num_primal; ++p) {
        const int s = topo.owners[p][0];
        const int local = topo.boundary_dofs[s][topo.owner_slots[p][0]];
        is_p[p] = problem.subdomains[s].dof_comp[local] == 1;  // "D-P"
      }
      std::vector<int> p_index(topo.num_primal, -1);
      int n_p = 0;
      for (int p = 0; p < topo.num_primal; ++p)
        if (is_p[p]) p_index[p] = n_p++;
      const auto& rels = topo.relations(DualFlavor::Redundant);
      std::vector<int> d_rows;
      for (size_t r = 0; r < rels.size(); ++r)
        if (!is_p[rels[r].primal]) d_rows.push_back(int(r));
      const int n_d = int(d_rows.size());
      const int n = n_p + n_d;

      std::deque<SplitOperators> splits;
      std::vector<std::vector<int>> p_pos(topo.num_subdomains),
          d_pos(topo.num_subdomains);
      for (int s = 0; s < topo.num_subdomains; ++s) {
        const int nb = topo.boundary_count(s);
        std::vector<bool> constrained(nb, false);
        for (int i = 0; i < nb; ++i) constrained[i] = is_p[topo.primal_index[s][i]];
        splits.emplace_back(problem.subdomains[s], topo.boundary_dofs[s], constrained);
        p_pos[s].assign(nb, -1);
        d_pos[s].assign(nb, -1);
        const auto& ps = splits[s].p_slots();
        for (size_t i = 0; i < ps.size(); ++i) p_pos[s][ps[i]] = int(i);
        const auto& dsl = splits[s].d_slots();
        for (size_t i = 0; i < dsl.size(); ++i) d_pos[s][dsl[i]] = int(i);
      }

      Matrix grow(n, 0);
      Vector eh;
      {
        std::vector<Vector> cols;
        std::vector<double> loads;
        for (int s = 0; s < topo.num_subdomains; ++s) {
          const int r = splits[s].kernel_dim();
          if (!r) continue;
          Matrix reaction = splits[s].reaction_modes();
          Matrix dvals = splits[s].kernel_d_rows();
          for (int k = 0; k < r; ++k) {
            Vector col = Vector::Zero(n);
            const auto& ps = splits[s].p_slots();
            for (size_t i = 0; i < ps.size(); ++i)
              col[p_index[topo.primal_index[s][ps[i]]]] -= reaction(int(i), k);
            for (int di = 0; di < n_d; ++di)
              for (const DualEntry& en : rels[d_rows[di]].entries)
                if (en.subdomain == s)
                  col[n_p + di] += en.weight * dvals(d_pos[s][en.slot], k);
            cols.push_back(col);
            loads.push_back(splits[s].kernel_load(k));
          }
        }
        grow.resize(n, int(cols.size()));
        eh.resize(int(cols.size()));
        for (size_t c = 0; c < cols.size(); ++c) {
          grow.col(int(c)) = cols[c];
          eh[int(c)] = loads[c];
        }
      }

      double worst_adm = 0.0;
      int iterates = 0;
      MethodConfig cfg = MethodConfig::for_method(Method::Hybrid);
      cfg.hybrid_split = "D-P";
      cfg.observer = [&](int, const Vector& x, const Vector&) {
        ++iterates;
        worst_adm =
            std::max(worst_adm, (grow.transpose() * x + eh).norm() / (1.0 + x.norm()));
      };
      auto [u, rep] = solve_hybrid(ws, cfg);
      const double scale = eh.norm() + 1.0;
      ok &= h.expect(rep.converged && iterates > 0 && worst_adm <= 1e-10 * scale,
                     fmt("split-treatment admissibility drift %.2e", worst_adm));
      ok &= h.expect(oracle_gap(ws, u) <= 1e-5, "split-treatment run missed the reference");
    }
    return ok;
  });

  // ------------------------------------------------------------------ 8
  h.criterion(8, "zero-energy modes and the generalized inverse", [&] {
    bool ok = true;
    DecomposedProblem problem = build_problem(fixtures::square(2, 3));
    Workspace ws(problem);
    const Subdomain& floating = problem.subdomains[3];
    const auto& bd = ws.topology.boundary_dofs[3];

    Matrix geo = detect_rbm(floating, bd, RbmMode::Geometric);
    Matrix alg = detect_rbm(floating, bd, RbmMode::Algebraic);
    Matrix k = Matrix(floating.K);
    ok &= h.expect(geo.cols() == 3, fmt("geometric mode count %.0f", geo.cols()));
    ok &= h.expect(alg.cols() == 3, fmt("algebraic mode count %.0f", alg.cols()));
    ok &= h.expect((k * geo).norm() <= 1e-10 * k.norm(), "geometric modes not in the kernel");
    ok &= h.expect((k * alg).norm() <= 1e-10 * k.norm(), "algebraic modes not in the kernel");

    Eigen::JacobiSVD<Matrix> svd(alg - geo * (geo.transpose() * alg));
    const double angle = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    ok &= h.expect(angle < 1e-8, fmt("principal angle %.2e", angle));

    const auto& so = ws.ops.sub[3];
    std::mt19937 rng(99);
    std::normal_distribution<double> dist;
    for (int trial = 0; trial < 100; ++trial) {
      Vector z(so.num_dofs());
      for (int i = 0; i < z.size(); ++i) z[i] = dist(rng);
      Vector kz = k * z;
      if ((k * so.pseudo_solve(kz) - kz).norm() > 1e-10 * kz.norm()) {
        ok &= h.expect(false, fmt("generalized-inverse defect at trial %.0f", trial));
        break;
      }
    }
    return ok;
  });

  // ------------------------------------------------------------------ 9
  h.criterion(9, "iterative-solver guarantees", [&] {
    bool ok = true;
    std::mt19937 rng(7);
    std::normal_distribution<double> dist;

    // finite termination
    {
      const int n = 12;
      Matrix a(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = dist(rng);
      Matrix s = a.transpose() * a + 0.5 * Matrix::Identity(n, n);
      Vector b(n);
      for (int i = 0; i < n; ++i) b[i] = dist(rng);
      KrylovConfig cfg;
      cfg.tolerance = 1e-10;
      KrylovResult res = cg(LinearMap::from_dense(s), b, nullptr, cfg);
      ok &= h.expect(res.converged && res.iterations <= n + 1,
                     fmt("termination after %.0f steps", res.iterations));
    }

    // energy-norm bound on the two-eigenvalue fixture
    {
      const double kappa = 400.0;
      Matrix s = Matrix::Zero(2, 2);
      s(0, 0) = 1.0;
      s(1, 1) = kappa;
      Vector b(2);
      b << 1.0, 1.0;
      Vector exact = s.ldlt().solve(b);
      std::vector<Vector> iterates;
      KrylovConfig cfg;
      cfg.tolerance = 1e-12;
      cfg.observer = [&](int, const Vector& x, const Vector&) { iterates.push_back(x); };
      cg(LinearMap::from_dense(s), b, nullptr, cfg);
      auto energy = [&](const Vector& v) { return std::sqrt(v.dot(s * v)); };
      const double rate = (std::sqrt(kappa) - 1.0) / (std::sqrt(kappa) + 1.0);
      for (size_t m = 0; m < iterates.size(); ++m) {
        const double bound =
            2.0 * std::pow(rate, double(m)) * energy(exact - iterates[0]) + 1e-14;
        if (energy(exact - iterates[m]) > bound) {
          ok &= h.expect(false, fmt("energy bound violated at step %.0f", double(m)));
          break;
        }
      }
    }

    // minimal-residual property against explicit bases
    {
      const int n = 8;
      Matrix s(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s(i, j) = dist(rng);
      s += 6.0 * Matrix::Identity(n, n);
      Vector b(n);
      for (int i = 0; i < n; ++i) b[i] = dist(rng);
      KrylovConfig cfg;
      cfg.tolerance = 1e-14;
      cfg.max_iterations = n;
      KrylovResult res = gmres(LinearMap::from_dense(s), b, nullptr, cfg);
      Matrix basis(n, n);
      basis.col(0) = b;
      for (int m = 1; m < n; ++m) basis.col(m) = s * basis.col(m - 1);
      for (const IterationRecord& rec : res.history) {
        if (rec.iter == 0) continue;
        Matrix v = basis.leftCols(rec.iter);
        Vector yv = (s * v).colPivHouseholderQr().solve(b);
        const double best = (b - s * v * yv).norm();
        if (std::abs(rec.res - best) > 1e-8 * (b.norm() + best)) {
          ok &= h.expect(false, fmt("residual %.3e above the best %.3e", rec.res, best));
          break;
        }
      }
    }

    // projection never worsens the active conditioning
    {
      const int n = 40;
      Matrix a(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = dist(rng);
      Matrix s = a.transpose() * a + 1e-3 * Matrix::Identity(n, n);
      Matrix c(n, 3);
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < n; ++i) c(i, j) = dist(rng);
      LinearMap sm = LinearMap::from_dense(s);
      ProjectorPair pair = make_augmentation_projector(c, sm, Vector::Zero(n));
      Matrix p = Matrix::Identity(n, n);
      for (int j = 0; j < n; ++j) p.col(j) = pair.apply(Vector::Unit(n, j));
      Matrix projected = p.transpose() * s * p;
      Eigen::SelfAdjointEigenSolver<Matrix> full(s), proj(projected);
      std::vector<double> nonzero;
      for (int i = 0; i < n; ++i)
        if (proj.eigenvalues()[i] > 1e-10 * proj.eigenvalues().maxCoeff())
          nonzero.push_back(proj.eigenvalues()[i]);
      const double kf = full.eigenvalues().maxCoeff() / full.eigenvalues().minCoeff();
      const double kp = nonzero.back() / nonzero.front();
      ok &= h.expect(kp <= kf * (1.0 + 1e-10),
                     fmt("projected conditioning %.3e above %.3e", kp, kf));
    }
    return ok;
  });

  if (h.failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", h.failures);
  return h.failures == 0 ? 0 : 1;
}
