#include "ddlab/problem.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace ddlab {

namespace {

/// Q1 plane-stress element stiffness on a square of side h, 2x2 Gauss points.
/// Node order: (0,0), (h,0), (h,h), (0,h); dof order (n0x,n0y,n1x,...).
Matrix q1_plane_stress(double young, double poisson, double h) {
  Eigen::Matrix3d d;
  const double c = young / (1.0 - poisson * poisson);
  d << c, c * poisson, 0.0,
       c * poisson, c, 0.0,
       0.0, 0.0, c * (1.0 - poisson) / 2.0;

  const double g = 1.0 / std::sqrt(3.0);
  const std::array<double, 2> gp = {-g, g};
  const std::array<double, 4> xi_n = {-1.0, 1.0, 1.0, -1.0};
  const std::array<double, 4> eta_n = {-1.0, -1.0, 1.0, 1.0};

  Matrix ke = Matrix::Zero(8, 8);
  const double jac = h / 2.0;  // square element, diagonal Jacobian
  for (double xi : gp) {
    for (double eta : gp) {
      Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
      for (int n = 0; n < 4; ++n) {
        const double dn_dxi = 0.25 * xi_n[n] * (1.0 + eta_n[n] * eta);
        const double dn_deta = 0.25 * eta_n[n] * (1.0 + xi_n[n] * xi);
        const double dx = dn_dxi / jac;
        const double dy = dn_deta / jac;
        b(0, 2 * n) = dx;
        b(1, 2 * n + 1) = dy;
        b(2, 2 * n) = dy;
        b(2, 2 * n + 1) = dx;
      }
      ke += b.transpose() * d * b * (jac * jac);
    }
  }
  ke = 0.5 * (ke + Matrix(ke.transpose()));  // exact symmetry under scatter
  return ke;
}

struct MeshContext {
  int nx = 0, ny = 0;              // global node grid
  int dofs_per_node = 1;
  std::vector<int> free_index;     // global dof -> free index, -1 if clamped
  int num_free = 0;
};

bool node_clamped(const ProblemSpec& spec, int i, int j, int nx, int ny) {
  if (spec.clamp.left && i == 0) return true;
  if (spec.clamp.right && i == nx - 1) return true;
  if (spec.kind == ProblemKind::Square2d) {
    if (spec.clamp.bottom && j == 0) return true;
    if (spec.clamp.top && j == ny - 1) return true;
  }
  return false;
}

double element_young(const ProblemSpec& spec, int ex, int ey) {
  if (!spec.checkerboard) return spec.young;
  const int c = spec.checkerboard->cell;
  const bool stiff = ((ex / c) + (ey / c)) % 2 == 0;
  return stiff ? spec.checkerboard->young_a : spec.checkerboard->young_b;
}

}  // namespace

void ProblemSpec::validate() const {
  if (px < 1 || py < 1 || mx < 1 || my < 1)
    throw std::invalid_argument("subdomain and element grids must be >= 1");
  if (checkerboard) {
    if (checkerboard->young_a <= 0.0 || checkerboard->young_b <= 0.0)
      throw std::invalid_argument("moduli must be positive");
    const int c = checkerboard->cell;
    if (c < 1 || (px * mx) % c != 0 || (kind == ProblemKind::Square2d && (py * my) % c != 0))
      throw std::invalid_argument("checkerboard cell must divide the element grid");
  } else if (young <= 0.0) {
    throw std::invalid_argument("modulus must be positive");
  }
  if (poisson <= -1.0 || poisson >= 0.5)
    throw std::invalid_argument("poisson ratio out of range (-1, 0.5)");
  if (!clamp.left && !clamp.right && !clamp.bottom && !clamp.top)
    throw std::invalid_argument("at least one edge must be clamped");
  if (kind == ProblemKind::Bar1d && (clamp.bottom || clamp.top))
    throw std::invalid_argument("bar1d supports left/right clamping only");
}

DecomposedProblem build_problem(const ProblemSpec& spec) {
  spec.validate();

  DecomposedProblem out;
  out.spec = spec;

  const bool is2d = spec.kind == ProblemKind::Square2d;
  const int dpn = spec.dofs_per_node();
  const int nex = spec.px * spec.mx;
  const int ney = is2d ? spec.py * spec.my : 1;
  const int nx = nex + 1;
  const int ny = is2d ? ney + 1 : 1;
  const double h = 1.0;  // unit element size; trends are scale-invariant

  auto node_id = [&](int i, int j) { return j * nx + i; };

  MeshContext ctx;
  ctx.nx = nx;
  ctx.ny = ny;
  ctx.dofs_per_node = dpn;
  ctx.free_index.assign(static_cast<size_t>(nx) * ny * dpn, -1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (node_clamped(spec, i, j, nx, ny)) continue;
      for (int c = 0; c < dpn; ++c)
        ctx.free_index[node_id(i, j) * dpn + c] = ctx.num_free++;
    }
  if (ctx.num_free == 0) throw std::invalid_argument("all dofs are clamped");
  out.num_global_dofs = ctx.num_free;

  // loaded node: free node with maximal x, then maximal y
  int load_i = -1, load_j = -1;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (node_clamped(spec, i, j, nx, ny)) continue;
      if (i > load_i || (i == load_i && j > load_j)) {
        load_i = i;
        load_j = j;
      }
    }

  const int nsub = spec.px * (is2d ? spec.py : 1);
  out.subdomains.resize(nsub);

  const int lnx = spec.mx + 1;
  const int lny = is2d ? spec.my + 1 : 1;

  for (int s = 0; s < nsub; ++s) {
    const int sx = s % spec.px;
    const int sy = is2d ? s / spec.px : 0;
    Subdomain& sub = out.subdomains[s];
    sub.dim = spec.spatial_dim();

    // local free numbering over the subdomain node patch
    std::unordered_map<int, int> local_of_global;  // global dof -> local dof
    for (int jj = 0; jj < lny; ++jj)
      for (int ii = 0; ii < lnx; ++ii) {
        const int gi = sx * spec.mx + ii;
        const int gj = is2d ? sy * spec.my + jj : 0;
        const int gnode = node_id(gi, gj);
        for (int c = 0; c < dpn; ++c) {
          const int gdof = gnode * dpn + c;
          if (ctx.free_index[gdof] >= 0) {
            const int local = static_cast<int>(sub.global_dof.size());
            local_of_global[gdof] = local;
            sub.global_dof.push_back(ctx.free_index[gdof]);
            sub.dof_x.push_back(gi * h);
            sub.dof_y.push_back(gj * h);
            sub.dof_comp.push_back(c);
          } else {
            sub.fixed_x.push_back(gi * h);
            sub.fixed_y.push_back(gj * h);
            sub.fixed_comp.push_back(c);
          }
        }
      }

    const int n = sub.num_dofs();
    sub.f = Vector::Zero(n);
    std::vector<Eigen::Triplet<double>> trips;

    auto scatter_element = [&](const Matrix& ke, const std::vector<int>& gdofs) {
      const int ne = static_cast<int>(gdofs.size());
      for (int a = 0; a < ne; ++a) {
        auto ita = local_of_global.find(gdofs[a]);
        if (ita == local_of_global.end()) continue;
        for (int b = 0; b < ne; ++b) {
          auto itb = local_of_global.find(gdofs[b]);
          if (itb == local_of_global.end()) continue;
          trips.emplace_back(ita->second, itb->second, ke(a, b));
        }
      }
    };

    if (is2d) {
      for (int ejj = 0; ejj < spec.my; ++ejj)
        for (int eii = 0; eii < spec.mx; ++eii) {
          const int ex = sx * spec.mx + eii;
          const int ey = sy * spec.my + ejj;
          const Matrix ke = q1_plane_stress(element_young(spec, ex, ey), spec.poisson, h);
          const std::array<std::pair<int, int>, 4> enodes = {
              std::pair{ex, ey}, {ex + 1, ey}, {ex + 1, ey + 1}, {ex, ey + 1}};
          std::vector<int> gdofs;
          for (auto [i, j] : enodes)
            for (int c = 0; c < 2; ++c) gdofs.push_back(node_id(i, j) * 2 + c);
          scatter_element(ke, gdofs);
        }
    } else {
      Matrix ke(2, 2);
      for (int eii = 0; eii < spec.mx; ++eii) {
        const int ex = sx * spec.mx + eii;
        const double k = spec.checkerboard ? element_young(spec, ex, 0) / spec.young
                                           : 1.0;  // unit springs by default
        ke << k, -k, -k, k;
        scatter_element(ke, {node_id(ex, 0), node_id(ex + 1, 0)});
      }
    }

    sub.K.resize(n, n);
    sub.K.setFromTriplets(trips.begin(), trips.end());

    // point load goes to exactly one owner: the highest subdomain id wins
    const int gi_lo = sx * spec.mx, gj_lo = is2d ? sy * spec.my : 0;
    const bool owns_load = load_i >= gi_lo && load_i <= gi_lo + spec.mx &&
                           load_j >= gj_lo && load_j <= gj_lo + (is2d ? spec.my : 0);
    bool highest_owner = owns_load;
    if (owns_load) {
      for (int t = s + 1; t < nsub && highest_owner; ++t) {
        const int tx = t % spec.px, ty = is2d ? t / spec.px : 0;
        if (load_i >= tx * spec.mx && load_i <= tx * spec.mx + spec.mx &&
            load_j >= ty * (is2d ? spec.my : 0) &&
            load_j <= ty * (is2d ? spec.my : 0) + (is2d ? spec.my : 0))
          highest_owner = false;
      }
    }
    if (highest_owner) {
      for (int c = 0; c < dpn; ++c) {
        const int gdof = node_id(load_i, load_j) * dpn + c;
        if (ctx.free_index[gdof] >= 0)
          sub.f[local_of_global.at(gdof)] += spec.load_magnitude;
      }
    }
  }

  return out;
}

std::pair<SparseMatrix, Vector> assemble_global(const DecomposedProblem& problem) {
  const int n = problem.num_global_dofs;
  Vector f = Vector::Zero(n);
  std::vector<Eigen::Triplet<double>> trips;
  for (const Subdomain& sub : problem.subdomains) {
    for (int i = 0; i < sub.num_dofs(); ++i) f[sub.global_dof[i]] += sub.f[i];
    for (int col = 0; col < sub.K.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(sub.K, col); it; ++it)
        trips.emplace_back(sub.global_dof[it.row()], sub.global_dof[it.col()], it.value());
  }
  SparseMatrix k(n, n);
  k.setFromTriplets(trips.begin(), trips.end());
  return {std::move(k), std::move(f)};
}

Vector oracle_solve(const DecomposedProblem& problem) {
  auto [k, f] = assemble_global(problem);
  Eigen::SimplicialLDLT<SparseMatrix> solver(k);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("global factorization failed: assembly is not SPD");
  Vector u = solver.solve(f);
  const double fn = f.norm();
  if (fn > 0.0 && (k * u - f).norm() > 1e-12 * fn) {
    // one refinement pass, then re-check
    u += solver.solve(f - k * u);
    if ((k * u - f).norm() > 1e-12 * fn)
      throw std::runtime_error("direct solve failed to reach reference accuracy");
  }
  return u;
}

}  // namespace ddlab
