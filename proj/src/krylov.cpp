#include "ddlab/krylov.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>

namespace ddlab {

LinearMap LinearMap::identity(int n) {
  return {n, [](const Vector& x) { return x; }};
}

LinearMap LinearMap::from_dense(Matrix m) {
  auto held = std::make_shared<Matrix>(std::move(m));
  return {static_cast<int>(held->rows()),
          [held](const Vector& x) { return Vector(*held * x); }};
}

ProjectorPair identity_projector(int n) {
  ProjectorPair pair;
  pair.dim = n;
  pair.x0 = Vector::Zero(n);
  return pair;
}

namespace {

/// Small dense coarse factorization with both direct and transposed solves,
/// optionally rank-revealing.
struct CoarseFactor {
  Eigen::PartialPivLU<Matrix> lu, lu_t;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod, cod_t;
  bool rank_deficient = false;

  void factor(const Matrix& f, bool allow_rank_deficient, const char* what) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> probe(f);
    probe.setThreshold(1e-12);
    if (probe.rank() < f.cols()) {
      if (!allow_rank_deficient)
        throw std::runtime_error(std::string(what) + ": coarse matrix is rank deficient");
      rank_deficient = true;
      cod = std::move(probe);
      cod_t.compute(f.transpose());
      cod_t.setThreshold(1e-12);
      return;
    }
    lu.compute(f);
    lu_t.compute(f.transpose());
  }
  Vector solve(const Vector& v) const {
    if (rank_deficient) return cod.solve(v);
    return lu.solve(v);
  }
  Vector solve_t(const Vector& v) const {
    if (rank_deficient) return cod_t.solve(v);
    return lu_t.solve(v);
  }
};

}  // namespace

ProjectorPair make_admissibility_projector(const Matrix& G, const Vector& e,
                                           const LinearMap& Q, bool allow_rank_deficient) {
  return make_admissibility_projector(G, G, e, Q, allow_rank_deficient);
}

ProjectorPair make_admissibility_projector(const Matrix& Gcol, const Matrix& Grow,
                                           const Vector& e, const LinearMap& Q,
                                           bool allow_rank_deficient) {
  const int n = Q.dim;
  if (Gcol.cols() == 0) return identity_projector(n);

  auto qg = std::make_shared<Matrix>(n, Gcol.cols());
  for (int c = 0; c < Gcol.cols(); ++c) qg->col(c) = Q(Gcol.col(c));
  auto factor = std::make_shared<CoarseFactor>();
  factor->factor(Grow.transpose() * (*qg), allow_rank_deficient, "admissibility");
  auto grow = std::make_shared<Matrix>(Grow);

  ProjectorPair pair;
  pair.dim = n;
  pair.admissibility_size = static_cast<int>(Gcol.cols());
  pair.x0 = (*qg) * factor->solve(e);
  pair.project = [qg, grow, factor](const Vector& v) {
    return Vector(v - (*qg) * factor->solve(grow->transpose() * v));
  };
  pair.project_t = [qg, grow, factor](const Vector& v) {
    return Vector(v - (*grow) * factor->solve_t(qg->transpose() * v));
  };
  pair.multipliers = [qg, factor](const Vector& residual) {
    return Vector(factor->solve(qg->transpose() * residual));
  };
  return pair;
}

ProjectorPair make_augmentation_projector(const Matrix& C, const LinearMap& S,
                                          const Vector& b, bool symmetric,
                                          const LinearMap* S_transpose) {
  const int n = S.dim;
  if (C.cols() == 0) return identity_projector(n);

  auto basis = std::make_shared<Matrix>(C);
  auto image = std::make_shared<Matrix>(n, C.cols());  // S C
  for (int c = 0; c < C.cols(); ++c) image->col(c) = S(C.col(c));
  auto factor = std::make_shared<CoarseFactor>();
  factor->factor(basis->transpose() * (*image), false, "augmentation");

  ProjectorPair pair;
  pair.dim = n;
  pair.augmentation_size = static_cast<int>(C.cols());
  pair.x0 = (*basis) * factor->solve(basis->transpose() * b);
  if (symmetric) {
    pair.project = [basis, image, factor](const Vector& v) {
      return Vector(v - (*basis) * factor->solve(image->transpose() * v));
    };
    pair.project_t = [basis, image, factor](const Vector& v) {
      return Vector(v - (*image) * factor->solve_t(basis->transpose() * v));
    };
  } else {
    LinearMap op = S;
    pair.project = [basis, factor, op](const Vector& v) {
      return Vector(v - (*basis) * factor->solve(basis->transpose() * op(v)));
    };
    if (S_transpose) {
      auto timage = std::make_shared<Matrix>(n, C.cols());  // S^T C
      for (int c = 0; c < C.cols(); ++c) timage->col(c) = (*S_transpose)(C.col(c));
      pair.project_t = [basis, timage, factor](const Vector& v) {
        return Vector(v - (*timage) * factor->solve_t(basis->transpose() * v));
      };
    }
  }
  pair.multipliers = [basis, factor](const Vector& residual) {
    return Vector(factor->solve(basis->transpose() * residual));
  };
  return pair;
}

ProjectorPair nest_projectors(const ProjectorPair& admissibility, const Matrix& C,
                              const LinearMap& S, const Vector& b, bool symmetric,
                              const LinearMap* S_transpose) {
  const int n = S.dim;
  if (C.cols() == 0) return admissibility;
  if (admissibility.trivial())
    return make_augmentation_projector(C, S, b, symmetric, S_transpose);

  auto basis = std::make_shared<Matrix>(n, C.cols());  // W = P C
  for (int c = 0; c < C.cols(); ++c) basis->col(c) = admissibility.project(C.col(c));
  auto image = std::make_shared<Matrix>(n, C.cols());  // S W
  for (int c = 0; c < C.cols(); ++c) image->col(c) = S(basis->col(c));
  auto factor = std::make_shared<CoarseFactor>();
  factor->factor(basis->transpose() * (*image), false, "nested augmentation");

  ProjectorPair pair;
  pair.dim = n;
  pair.admissibility_size = admissibility.admissibility_size;
  pair.augmentation_size = static_cast<int>(C.cols());
  pair.multipliers = admissibility.multipliers;

  const Vector rho0 = b - S(admissibility.x0);
  pair.x0 = admissibility.x0 + (*basis) * factor->solve(basis->transpose() * rho0);

  // second level applied after the first keeps both constraint families exact:
  // the first level leaves W-directions alone, the second never reintroduces
  // inadmissible components because W already sits in the admissible subspace.
  auto adm_p = admissibility.project;
  auto adm_pt = admissibility.project_t;
  if (symmetric) {
    pair.project = [basis, image, factor, adm_p](const Vector& v) {
      Vector w = adm_p(v);
      return Vector(w - (*basis) * factor->solve(image->transpose() * w));
    };
    pair.project_t = [basis, image, factor, adm_pt](const Vector& v) {
      Vector w = v - (*image) * factor->solve_t(basis->transpose() * v);
      return adm_pt(w);
    };
  } else {
    LinearMap op = S;
    pair.project = [basis, factor, adm_p, op](const Vector& v) {
      Vector w = adm_p(v);
      return Vector(w - (*basis) * factor->solve(basis->transpose() * op(w)));
    };
    if (S_transpose) {
      auto timage = std::make_shared<Matrix>(n, C.cols());  // S^T W
      for (int c = 0; c < C.cols(); ++c) timage->col(c) = (*S_transpose)(basis->col(c));
      pair.project_t = [basis, timage, factor, adm_pt](const Vector& v) {
        Vector w = v - (*timage) * factor->solve_t(basis->transpose() * v);
        return adm_pt(w);
      };
    }
  }
  return pair;
}

KrylovResult projected_cg(const LinearMap& op, const Vector& rhs,
                          const LinearMap* precond, const ProjectorPair& pair,
                          const KrylovConfig& config) {
  const int n = op.dim;
  KrylovResult out;
  out.x = pair.x0.size() ? pair.x0 : Vector::Zero(n);

  Vector r = pair.apply_t(rhs - op(out.x));
  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  const double r0_norm = std::max(r.norm(), 1e-300);

  auto metric_of = [&](const Vector& x, const Vector& res) {
    return config.stop_metric ? config.stop_metric(x, res) : res.norm() / rhs_norm;
  };
  auto record = [&](int it, const Vector& res, double metric) {
    if (config.record_history)
      out.history.push_back({it, res.norm(), res.norm() / r0_norm, metric});
  };

  std::vector<Vector> dirs, images;  // w_i and projected S w_i
  std::vector<double> wp;
  Vector w_prev, z_prev;
  double rz_prev = 0.0;

  for (int j = 0; j <= config.max_iterations; ++j) {
    const double metric = metric_of(out.x, r);
    record(j, r, metric);
    if (config.observer) config.observer(j, out.x, r);
    out.final_metric = metric;
    out.iterations = j;
    if (metric <= config.tolerance) {
      out.converged = true;
      return out;
    }
    if (j == config.max_iterations) break;

    Vector z = precond ? (*precond)(r) : r;
    z = pair.apply(z);

    Vector w;
    if (config.reorth == Reorthogonalization::Full) {
      w = z;
      for (size_t i = 0; i < dirs.size(); ++i) w -= (w.dot(images[i]) / wp[i]) * dirs[i];
    } else {
      const double rz = r.dot(z);
      if (j == 0) {
        w = z;
      } else {
        w = z + (rz / rz_prev) * w_prev;
      }
      rz_prev = rz;
    }

    Vector p = pair.apply_t(op(w));
    const double denom = w.dot(p);
    if (!(denom > 0.0)) {
      // an exhausted search space stalls with |w^T p| at rounding level;
      // a genuinely indefinite operator produces a decisively negative value
      if (std::abs(denom) <= 1e-12 * w.norm() * p.norm() ||
          z.norm() <= 1e-14 * r0_norm) {
        out.converged = out.final_metric <= config.tolerance;
        return out;
      }
      throw std::runtime_error("conjugate gradient breakdown: operator not positive "
                               "definite on the search space");
    }
    const double alpha = z.dot(r) / denom;
    out.x += alpha * w;
    r -= alpha * p;

    if (config.reorth == Reorthogonalization::Full) {
      dirs.push_back(w);
      images.push_back(p);
      wp.push_back(denom);
    } else {
      w_prev = w;
    }
  }
  out.converged = false;
  return out;
}

KrylovResult cg(const LinearMap& op, const Vector& rhs, const LinearMap* precond,
                const KrylovConfig& config) {
  return projected_cg(op, rhs, precond, identity_projector(op.dim), config);
}

KrylovResult gmres(const LinearMap& op, const Vector& rhs, const LinearMap* precond,
                   const KrylovConfig& config) {
  const int n = op.dim;
  KrylovResult out;
  out.x = Vector::Zero(n);

  Vector r0 = precond ? (*precond)(rhs) : rhs;
  const double beta = r0.norm();
  double metric0 = 1.0;
  if (config.stop_metric) {
    Vector dummy(0);
    metric0 = config.stop_metric(out.x, dummy);
  }
  if (config.record_history) out.history.push_back({0, beta, 1.0, metric0});
  if (beta == 0.0 || (config.stop_metric && metric0 <= config.tolerance)) {
    out.converged = true;
    out.final_metric = config.stop_metric ? metric0 : 0.0;
    return out;
  }

  const int m_max = std::min(config.max_iterations, n);
  Matrix v(n, m_max + 1);
  Matrix h = Matrix::Zero(m_max + 1, m_max);
  Vector g = Vector::Zero(m_max + 1);
  std::vector<double> cs(m_max), sn(m_max);
  v.col(0) = r0 / beta;
  g[0] = beta;

  int m = 0;
  bool happy = false;
  for (int j = 0; j < m_max; ++j) {
    Vector w = op(v.col(j));
    if (precond) w = (*precond)(w);
    for (int i = 0; i <= j; ++i) {  // modified Gram-Schmidt
      h(i, j) = v.col(i).dot(w);
      w -= h(i, j) * v.col(i);
    }
    const double hnext = w.norm();
    h(j + 1, j) = hnext;

    for (int i = 0; i < j; ++i) {
      const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
      h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
      h(i, j) = t;
    }
    const double denom = std::hypot(h(j, j), h(j + 1, j));
    cs[j] = denom > 0.0 ? h(j, j) / denom : 1.0;
    sn[j] = denom > 0.0 ? h(j + 1, j) / denom : 0.0;
    h(j, j) = denom;
    h(j + 1, j) = 0.0;
    g[j + 1] = -sn[j] * g[j];
    g[j] = cs[j] * g[j];

    m = j + 1;
    const double res = std::abs(g[j + 1]);
    out.final_metric = res / beta;
    Vector x_j;
    const bool need_iterate = config.observer || config.stop_metric;
    if (need_iterate) {
      Vector y_j = h.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(g.head(m));
      x_j = v.leftCols(m) * y_j;
    }
    if (config.stop_metric) {
      Vector dummy(0);
      out.final_metric = config.stop_metric(x_j, dummy);
    }
    if (config.record_history)
      out.history.push_back({m, res, res / beta, out.final_metric});
    if (config.observer) {
      Vector dummy(0);
      config.observer(m, x_j, dummy);
    }

    if (out.final_metric <= config.tolerance) {
      out.converged = true;
      break;
    }
    if (hnext <= 1e-300) {  // exact subspace hit
      happy = true;
      out.converged = true;
      break;
    }
    v.col(j + 1) = w / hnext;
  }
  (void)happy;

  // x = V_m y with the m x m triangular solve
  Vector y = h.topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(g.head(m));
  out.x = v.leftCols(m) * y;
  out.iterations = m;
  return out;
}

}  // namespace ddlab
