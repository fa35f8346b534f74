#pragma once

#include "ddlab/problem.hpp"

#include <vector>

namespace fixtures {

inline ddlab::ProblemSpec bar(int subdomains = 2, int springs = 2) {
  ddlab::ProblemSpec spec;
  spec.kind = ddlab::ProblemKind::Bar1d;
  spec.px = subdomains;
  spec.mx = springs;
  spec.py = spec.my = 1;
  return spec;
}

inline ddlab::ProblemSpec square(int p, int m) {
  ddlab::ProblemSpec spec;
  spec.kind = ddlab::ProblemKind::Square2d;
  spec.px = spec.py = p;
  spec.mx = spec.my = m;
  return spec;
}

inline ddlab::ProblemSpec square_grid(int px, int py, int m) {
  ddlab::ProblemSpec spec;
  spec.kind = ddlab::ProblemKind::Square2d;
  spec.px = px;
  spec.py = py;
  spec.mx = spec.my = m;
  return spec;
}

inline ddlab::ProblemSpec het(int p, int m, double ratio, int cell = 0) {
  ddlab::ProblemSpec spec = square(p, m);
  ddlab::Checkerboard cb;
  cb.young_a = 200000.0;
  cb.young_b = cb.young_a / ratio;
  cb.cell = cell > 0 ? cell : m;
  spec.checkerboard = cb;
  return spec;
}

/// Hand-built three-subdomain scalar fixture (14 local dofs, 9 global), with
/// the crosspoint shared by all three pieces. Local boundary orderings follow
/// the reference operator tables.
inline ddlab::DecomposedProblem three_subdomain_scalar() {
  ddlab::DecomposedProblem problem;
  problem.spec.kind = ddlab::ProblemKind::Bar1d;
  problem.num_global_dofs = 9;

  // interface globals: 5 (s1-s2), 6 (s0-s1), 7 (s0-s2), 8 (crosspoint)
  const std::vector<std::vector<int>> maps = {
      {0, 1, 7, 6, 8},  // subdomain 0: internals 0,1; boundary locals 2,3,4
      {2, 3, 5, 8, 6},  // subdomain 1
      {7, 8, 5, 4},     // subdomain 2: boundary locals 0,1,2; internal 3
  };
  for (int s = 0; s < 3; ++s) {
    ddlab::Subdomain sub;
    sub.dim = 1;
    const int n = static_cast<int>(maps[s].size());
    sub.global_dof = maps[s];
    Eigen::SparseMatrix<double> k(n, n);
    for (int i = 0; i < n; ++i) k.insert(i, i) = double(s + 1) * (1.0 + 0.25 * i);
    sub.K = k;
    sub.f = ddlab::Vector::Zero(n);
    for (int i = 0; i < n; ++i) {
      sub.dof_x.push_back(double(maps[s][i]));
      sub.dof_y.push_back(0.0);
      sub.dof_comp.push_back(0);
    }
    // one clamp record per piece keeps the mode detector quiet on these
    // synthetic diagonal stiffnesses
    sub.fixed_x.push_back(-1.0 - s);
    sub.fixed_y.push_back(0.0);
    sub.fixed_comp.push_back(0);
    problem.subdomains.push_back(std::move(sub));
  }
  return problem;
}

}  // namespace fixtures
