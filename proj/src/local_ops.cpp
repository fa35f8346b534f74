#include "ddlab/local_ops.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ddlab {

namespace {

SparseMatrix submatrix(const SparseMatrix& k, const std::vector<int>& rows,
                       const std::vector<int>& cols) {
  std::vector<int> rpos(k.rows(), -1), cpos(k.cols(), -1);
  for (size_t i = 0; i < rows.size(); ++i) rpos[rows[i]] = static_cast<int>(i);
  for (size_t j = 0; j < cols.size(); ++j) cpos[cols[j]] = static_cast<int>(j);
  std::vector<Eigen::Triplet<double>> trips;
  for (int outer = 0; outer < k.outerSize(); ++outer)
    for (SparseMatrix::InnerIterator it(k, outer); it; ++it)
      if (rpos[it.row()] >= 0 && cpos[it.col()] >= 0)
        trips.emplace_back(rpos[it.row()], cpos[it.col()], it.value());
  SparseMatrix out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Vector subvector(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<int>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = v[idx[i]];
  return out;
}

/// Candidate rigid modes evaluated at arbitrary points: translations plus the
/// in-plane rotation in 2D, the single translation in 1D.
double candidate_mode(int mode, double x, double y, int comp, int dim) {
  if (dim == 1) return 1.0;
  switch (mode) {
    case 0: return comp == 0 ? 1.0 : 0.0;
    case 1: return comp == 1 ? 1.0 : 0.0;
    default: return comp == 0 ? -y : x;
  }
}

Matrix orthonormalize(const Matrix& m) {
  if (m.cols() == 0) return m;
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  for (int c = 0; c < q.cols(); ++c) {  // deterministic sign convention
    int imax = 0;
    q.col(c).cwiseAbs().maxCoeff(&imax);
    if (q(imax, c) < 0.0) q.col(c) = -q.col(c);
  }
  return q;
}

/// Geometric mode detection with an optional extra set of clamped local dofs.
Matrix geometric_kernel(const Subdomain& sub, const std::vector<int>& extra_clamped) {
  const int dim = sub.dim;
  const int ncand = dim == 1 ? 1 : 3;
  const int n = sub.num_dofs();
  Matrix candidates(n, ncand);
  for (int i = 0; i < n; ++i)
    for (int m = 0; m < ncand; ++m)
      candidates(i, m) = candidate_mode(m, sub.dof_x[i], sub.dof_y[i], sub.dof_comp[i], dim);

  const int nfix = static_cast<int>(sub.fixed_x.size()) + static_cast<int>(extra_clamped.size());
  if (nfix == 0) return orthonormalize(candidates);

  Matrix constraints(nfix, ncand);
  int row = 0;
  for (size_t i = 0; i < sub.fixed_x.size(); ++i, ++row)
    for (int m = 0; m < ncand; ++m)
      constraints(row, m) =
          candidate_mode(m, sub.fixed_x[i], sub.fixed_y[i], sub.fixed_comp[i], dim);
  for (int local : extra_clamped) {
    for (int m = 0; m < ncand; ++m)
      constraints(row, m) =
          candidate_mode(m, sub.dof_x[local], sub.dof_y[local], sub.dof_comp[local], dim);
    ++row;
  }

  Eigen::JacobiSVD<Matrix> svd(constraints, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * smax) ++rank;
  const int r = ncand - rank;
  if (r == 0) return Matrix(n, 0);
  Matrix v0 = svd.matrixV().rightCols(r);
  return orthonormalize(candidates * v0);
}

/// Picks the most mutually distant boundary nodes, lowest index breaking ties.
std::vector<int> distant_boundary_nodes(const Subdomain& sub,
                                        const std::vector<int>& boundary_dofs, int want) {
  std::vector<std::pair<std::pair<double, double>, int>> nodes;  // coords, first dof
  std::map<std::pair<double, double>, int> seen;
  for (int d : boundary_dofs) {
    auto key = std::make_pair(sub.dof_x[d], sub.dof_y[d]);
    if (!seen.count(key)) {
      seen[key] = d;
      nodes.push_back({key, d});
    }
  }
  const int count = static_cast<int>(nodes.size());
  want = std::min(want, count);
  std::vector<int> chosen;
  if (want == 0) return chosen;
  if (count == 1) return {0};

  auto dist2 = [&](int a, int b) {
    const double dx = nodes[a].first.first - nodes[b].first.first;
    const double dy = nodes[a].first.second - nodes[b].first.second;
    return dx * dx + dy * dy;
  };
  int best_a = 0, best_b = 1;
  double best = -1.0;
  for (int a = 0; a < count; ++a)
    for (int b = a + 1; b < count; ++b)
      if (dist2(a, b) > best) {
        best = dist2(a, b);
        best_a = a;
        best_b = b;
      }
  chosen = {best_a, best_b};
  while (static_cast<int>(chosen.size()) < want) {
    int pick = -1;
    double pick_score = -1.0;
    for (int c = 0; c < count; ++c) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
      double score = std::numeric_limits<double>::max();
      for (int p : chosen) score = std::min(score, dist2(c, p));
      if (score > pick_score) {
        pick_score = score;
        pick = c;
      }
    }
    chosen.push_back(pick);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Matrix algebraic_kernel(const Subdomain& sub, const std::vector<int>& boundary_dofs) {
  const int n = sub.num_dofs();
  const int want_nodes = sub.dim == 1 ? 2 : 3;
  std::vector<int> node_picks = distant_boundary_nodes(sub, boundary_dofs, want_nodes);

  // gather the picked nodes' dofs among the boundary dofs
  std::vector<std::pair<double, double>> coords;
  {
    std::map<std::pair<double, double>, int> seen;
    for (int d : boundary_dofs) {
      auto key = std::make_pair(sub.dof_x[d], sub.dof_y[d]);
      if (!seen.count(key)) {
        seen[key] = 1;
        coords.push_back(key);
      }
    }
  }
  std::set<std::pair<double, double>> picked;
  for (int c : node_picks) picked.insert(coords[c]);

  std::vector<int> nset, oset;
  for (int d = 0; d < n; ++d) {
    const bool is_boundary =
        std::binary_search(boundary_dofs.begin(), boundary_dofs.end(), d);
    if (is_boundary && picked.count({sub.dof_x[d], sub.dof_y[d]}))
      nset.push_back(d);
    else
      oset.push_back(d);
  }
  if (nset.empty()) throw std::runtime_error("mode detection: empty probe set");

  SparseMatrix k_oo = submatrix(sub.K, oset, oset);
  SparseMatrix k_on = submatrix(sub.K, oset, nset);
  Matrix k_nn = Matrix(submatrix(sub.K, nset, nset));

  Matrix s = k_nn;
  if (!oset.empty()) {
    Eigen::SimplicialLDLT<SparseMatrix> solver(k_oo);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error(
          "mode detection: complement block is singular, choose a different probe set");
    Matrix sol = solver.solve(Matrix(k_on));
    if (!sol.allFinite())
      throw std::runtime_error(
          "mode detection: complement block is singular, choose a different probe set");
    s -= Matrix(k_on).transpose() * sol;
  }

  Eigen::JacobiSVD<Matrix> svd(s, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double scale = std::max(sv.size() ? sv[0] : 0.0, k_nn.diagonal().maxCoeff());
  int r = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] <= 1e-8 * scale) ++r;
  if (r == 0) return Matrix(n, 0);

  Matrix r_n = svd.matrixV().rightCols(r);
  Matrix full = Matrix::Zero(n, r);
  for (size_t i = 0; i < nset.size(); ++i) full.row(nset[i]) = r_n.row(static_cast<int>(i));
  if (!oset.empty()) {
    Eigen::SimplicialLDLT<SparseMatrix> solver(k_oo);
    solver.compute(k_oo);
    Matrix lift = -solver.solve(Matrix(k_on) * r_n);
    for (size_t i = 0; i < oset.size(); ++i) full.row(oset[i]) = lift.row(static_cast<int>(i));
  }
  return orthonormalize(full);
}

/// Row selection for the fixed-dof generalized inverse: the most independent
/// kernel rows among the preferred dofs, via column-pivoted QR. Falls back to
/// the full dof set when the preferred one cannot pin every mode (tiny pieces
/// whose boundary is almost the whole piece).
std::vector<int> pick_fixed_dofs(const Matrix& kernel, const std::vector<int>& preferred,
                                 const std::vector<int>* fallback = nullptr) {
  const int r = static_cast<int>(kernel.cols());
  if (r == 0) return {};
  auto try_pick = [&](const std::vector<int>& allowed) -> std::vector<int> {
    if (static_cast<int>(allowed.size()) < r) return {};
    Matrix rows(r, static_cast<int>(allowed.size()));
    for (size_t i = 0; i < allowed.size(); ++i)
      rows.col(static_cast<int>(i)) = kernel.row(allowed[i]);
    Eigen::ColPivHouseholderQR<Matrix> qr(rows);
    qr.setThreshold(1e-10);
    if (qr.rank() < r) return {};
    std::vector<int> fixed(r);
    for (int i = 0; i < r; ++i) fixed[i] = allowed[qr.colsPermutation().indices()[i]];
    std::sort(fixed.begin(), fixed.end());
    return fixed;
  };
  std::vector<int> fixed = try_pick(preferred);
  if (fixed.empty() && fallback) fixed = try_pick(*fallback);
  if (fixed.empty())
    throw std::runtime_error("generalized inverse: no admissible anchor selection found");
  return fixed;
}

}  // namespace

Matrix detect_rbm(const Subdomain& sub, const std::vector<int>& boundary_dofs,
                  RbmMode mode) {
  if (mode == RbmMode::Geometric) return geometric_kernel(sub, {});
  return algebraic_kernel(sub, boundary_dofs);
}

SubdomainOperators::SubdomainOperators(const Subdomain& sub, std::vector<int> boundary_dofs)
    : sub_(&sub), n_(sub.num_dofs()), boundary_(std::move(boundary_dofs)) {
  interior_pos_.assign(n_, -1);
  for (int d = 0; d < n_; ++d)
    if (!std::binary_search(boundary_.begin(), boundary_.end(), d)) {
      interior_pos_[d] = static_cast<int>(interior_.size());
      interior_.push_back(d);
    }

  k_ib_ = submatrix(sub.K, interior_, boundary_);
  k_bb_ = submatrix(sub.K, boundary_, boundary_);
  kbb_diag_ = Vector(k_bb_.diagonal());

  if (!interior_.empty()) {
    SparseMatrix k_ii = submatrix(sub.K, interior_, interior_);
    interior_solver_.compute(k_ii);
    if (interior_solver_.info() != Eigen::Success)
      throw std::runtime_error("interior factorization failed");
  }

  // condensed load
  Vector f_b = subvector(sub.f, boundary_);
  if (!interior_.empty()) {
    Vector f_i = subvector(sub.f, interior_);
    condensed_load_ = f_b - k_ib_.transpose() * interior_solver_.solve(f_i);
  } else {
    condensed_load_ = f_b;
  }

  kernel_ = geometric_kernel(sub, {});
  kernel_b_ = Matrix(static_cast<int>(boundary_.size()), kernel_.cols());
  for (size_t i = 0; i < boundary_.size(); ++i)
    kernel_b_.row(static_cast<int>(i)) = kernel_.row(boundary_[i]);

  {
    std::vector<int> all(n_);
    for (int d = 0; d < n_; ++d) all[d] = d;
    fixed_ = pick_fixed_dofs(kernel_, interior_, &all);
  }
  reduced_index_.assign(n_, -1);
  int idx = 0;
  for (int d = 0; d < n_; ++d)
    if (!std::binary_search(fixed_.begin(), fixed_.end(), d)) reduced_index_[d] = idx++;
  std::vector<int> kept;
  kept.reserve(idx);
  for (int d = 0; d < n_; ++d)
    if (reduced_index_[d] >= 0) kept.push_back(d);
  pseudo_solver_.compute(submatrix(sub.K, kept, kept));
  if (pseudo_solver_.info() != Eigen::Success)
    throw std::runtime_error("generalized-inverse factorization failed");
}

Vector SubdomainOperators::schur_primal_apply(const Vector& u_b) const {
  Vector out = k_bb_ * u_b;
  if (!interior_.empty()) out -= k_ib_.transpose() * interior_solver_.solve(k_ib_ * u_b);
  return out;
}

const Matrix& SubdomainOperators::schur_primal_dense() const {
  if (!schur_dense_ready_) {
    schur_dense_ = Matrix(k_bb_);
    if (!interior_.empty())
      schur_dense_ -= Matrix(k_ib_).transpose() * interior_solver_.solve(Matrix(k_ib_));
    schur_dense_ready_ = true;
  }
  return schur_dense_;
}

Vector SubdomainOperators::pseudo_solve(const Vector& rhs) const {
  const int nk = n_ - static_cast<int>(fixed_.size());
  Vector reduced(nk);
  for (int d = 0; d < n_; ++d)
    if (reduced_index_[d] >= 0) reduced[reduced_index_[d]] = rhs[d];
  Vector sol = pseudo_solver_.solve(reduced);
  Vector out = Vector::Zero(n_);
  for (int d = 0; d < n_; ++d)
    if (reduced_index_[d] >= 0) out[d] = sol[reduced_index_[d]];
  return out;
}

Vector SubdomainOperators::schur_dual_apply(const Vector& lambda_b,
                                            bool check_admissibility) const {
  if (check_admissibility && kernel_dim() > 0) {
    const double defect = (kernel_b_.transpose() * lambda_b).norm();
    if (defect > 1e-10 * std::max(lambda_b.norm(), 1e-300)) {
      std::ostringstream msg;
      msg << "inadmissible boundary effort: zero-energy defect " << defect;
      throw std::runtime_error(msg.str());
    }
  }
  Vector rhs = Vector::Zero(n_);
  for (size_t i = 0; i < boundary_.size(); ++i) rhs[boundary_[i]] = lambda_b[static_cast<int>(i)];
  Vector u = pseudo_solve(rhs);
  Vector out(static_cast<int>(boundary_.size()));
  for (size_t i = 0; i < boundary_.size(); ++i) out[static_cast<int>(i)] = u[boundary_[i]];
  return out;
}

Vector SubdomainOperators::complete_interior(const Vector& u_b, bool with_load) const {
  if (interior_.empty()) return Vector(0);
  Vector rhs = -(k_ib_ * u_b);
  if (with_load) rhs += subvector(sub_->f, interior_);
  return interior_solver_.solve(rhs);
}

Vector SubdomainOperators::lumped_apply(const Vector& u_b) const { return k_bb_ * u_b; }

Vector SubdomainOperators::superlumped_apply(const Vector& u_b) const {
  return kbb_diag_.cwiseProduct(u_b);
}

SplitOperators::SplitOperators(const Subdomain& sub, const std::vector<int>& boundary_dofs,
                               const std::vector<bool>& constrained_slot)
    : sub_(&sub) {
  const int n = sub.num_dofs();
  const int nb = static_cast<int>(boundary_dofs.size());
  std::vector<bool> is_p(n, false), is_b(n, false);
  for (int i = 0; i < nb; ++i) {
    is_b[boundary_dofs[i]] = true;
    if (constrained_slot[i]) {
      is_p[boundary_dofs[i]] = true;
      p_slots_.push_back(i);
      p_dofs_.push_back(boundary_dofs[i]);
    } else {
      d_slots_.push_back(i);
    }
  }
  std::vector<int> solve_pos(n, -1);
  for (int d = 0; d < n; ++d)
    if (!is_p[d]) {
      solve_pos[d] = static_cast<int>(solve_dofs_.size());
      solve_dofs_.push_back(d);
    }
  for (int i : d_slots_) d_pos_.push_back(solve_pos[boundary_dofs[i]]);

  k_ss_ = submatrix(sub.K, solve_dofs_, solve_dofs_);
  k_ps_ = submatrix(sub.K, p_dofs_, solve_dofs_);
  k_pp_ = Matrix(submatrix(sub.K, p_dofs_, p_dofs_));
  f_s_ = subvector(sub.f, solve_dofs_);
  f_p_ = subvector(sub.f, p_dofs_);

  Matrix kernel_full = geometric_kernel(sub, p_dofs_);
  kernel_ = Matrix(static_cast<int>(solve_dofs_.size()), kernel_full.cols());
  for (size_t i = 0; i < solve_dofs_.size(); ++i)
    kernel_.row(static_cast<int>(i)) = kernel_full.row(solve_dofs_[i]);

  // anchor dofs for the generalized inverse: internal only
  std::vector<int> allowed, all;
  for (size_t i = 0; i < solve_dofs_.size(); ++i) {
    all.push_back(static_cast<int>(i));
    if (!is_b[solve_dofs_[i]]) allowed.push_back(static_cast<int>(i));
  }
  fixed_ = pick_fixed_dofs(kernel_, allowed, &all);
  reduced_index_.assign(solve_dofs_.size(), -1);
  int idx = 0;
  std::vector<int> kept;
  for (size_t i = 0; i < solve_dofs_.size(); ++i)
    if (!std::binary_search(fixed_.begin(), fixed_.end(), static_cast<int>(i))) {
      reduced_index_[i] = idx++;
      kept.push_back(static_cast<int>(i));
    }
  SparseMatrix k_red = submatrix(k_ss_, kept, kept);
  solver_.compute(k_red);
  if (solver_.info() != Eigen::Success)
    throw std::runtime_error("clamped-stiffness factorization failed");
}

Vector SplitOperators::pseudo_solve_side(const Vector& rhs) const {
  const int ns = static_cast<int>(solve_dofs_.size());
  Vector reduced(ns - static_cast<int>(fixed_.size()));
  for (int i = 0; i < ns; ++i)
    if (reduced_index_[i] >= 0) reduced[reduced_index_[i]] = rhs[i];
  Vector sol = solver_.solve(reduced);
  Vector out = Vector::Zero(ns);
  for (int i = 0; i < ns; ++i)
    if (reduced_index_[i] >= 0) out[i] = sol[reduced_index_[i]];
  return out;
}

Vector SplitOperators::scatter_d(const Vector& lambda_d) const {
  Vector out = Vector::Zero(static_cast<int>(solve_dofs_.size()));
  for (size_t i = 0; i < d_pos_.size(); ++i) out[d_pos_[i]] = lambda_d[static_cast<int>(i)];
  return out;
}

Vector SplitOperators::gather_d(const Vector& y) const {
  Vector out(static_cast<int>(d_pos_.size()));
  for (size_t i = 0; i < d_pos_.size(); ++i) out[static_cast<int>(i)] = y[d_pos_[i]];
  return out;
}

Vector SplitOperators::clamp_reaction(const Vector& y) const {
  if (num_p() == 0) return Vector(0);
  return k_ps_ * y;
}

Vector SplitOperators::couple_from_p(const Vector& u_p) const {
  if (num_p() == 0) return Vector::Zero(static_cast<int>(solve_dofs_.size()));
  return k_ps_.transpose() * u_p;
}

void SplitOperators::apply(const Vector& u_p, const Vector& lambda_d, Vector& lambda_p,
                           Vector& u_d) const {
  Vector rhs = scatter_d(lambda_d);
  if (num_p() > 0) rhs -= k_ps_.transpose() * u_p;
  Vector y = pseudo_solve_side(rhs);
  lambda_p = num_p() > 0 ? Vector(k_pp_ * u_p + k_ps_ * y) : Vector(0);
  u_d = gather_d(y);
}

Matrix SplitOperators::condensed_pp() const {
  if (kernel_dim() > 0)
    throw std::runtime_error("condensed stiffness requested on a singular clamped block");
  Matrix rhs = Matrix(k_ps_).transpose();
  Matrix sol(rhs.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); ++c) sol.col(c) = pseudo_solve_side(rhs.col(c));
  return k_pp_ - Matrix(k_ps_) * sol;
}

Vector SplitOperators::condensed_p_load() const {
  if (num_p() == 0) return Vector(0);
  return f_p_ - k_ps_ * pseudo_solve_side(f_s_);
}

Vector SplitOperators::condensed_d_load() const {
  Vector y = pseudo_solve_side(f_s_);
  Vector out(static_cast<int>(d_pos_.size()));
  for (size_t i = 0; i < d_pos_.size(); ++i) out[static_cast<int>(i)] = y[d_pos_[i]];
  return out;
}

Matrix SplitOperators::kernel_d_rows() const {
  Matrix out(static_cast<int>(d_pos_.size()), kernel_.cols());
  for (size_t i = 0; i < d_pos_.size(); ++i) out.row(static_cast<int>(i)) = kernel_.row(d_pos_[i]);
  return out;
}

Matrix SplitOperators::reaction_modes() const {
  if (num_p() == 0) return Matrix(0, kernel_.cols());
  return Matrix(k_ps_) * kernel_;
}

Vector SplitOperators::solve_side_load() const { return f_s_; }

double SplitOperators::kernel_load(int col) const { return kernel_.col(col).dot(f_s_); }

LocalOperators LocalOperators::build(const DecomposedProblem& problem,
                                     const InterfaceTopology& topo) {
  LocalOperators ops;
  for (int s = 0; s < problem.num_subdomains(); ++s)
    ops.sub.emplace_back(problem.subdomains[s], topo.boundary_dofs[s]);
  return ops;
}

int LocalOperators::total_kernel_dim() const {
  int total = 0;
  for (const auto& s : sub) total += s.kernel_dim();
  return total;
}

Matrix strip_schur(const Subdomain& sub, const std::vector<int>& boundary_dofs,
                   int layers) {
  if (layers < 1) throw std::invalid_argument("strip width must be >= 1");
  const int n = sub.num_dofs();
  std::vector<std::pair<double, double>> bcoords;
  for (int d : boundary_dofs) bcoords.push_back({sub.dof_x[d], sub.dof_y[d]});

  std::vector<int> keep;
  std::vector<bool> is_boundary(n, false);
  for (int d : boundary_dofs) is_boundary[d] = true;
  for (int d = 0; d < n; ++d) {
    double dist = std::numeric_limits<double>::max();
    for (auto& [bx, by] : bcoords)
      dist = std::min(dist, std::max(std::abs(sub.dof_x[d] - bx), std::abs(sub.dof_y[d] - by)));
    if (dist <= layers + 1e-9) keep.push_back(d);
  }

  std::vector<int> strip_b, strip_i;
  for (int d : keep) (is_boundary[d] ? strip_b : strip_i).push_back(d);
  Matrix s = Matrix(submatrix(sub.K, strip_b, strip_b));
  if (!strip_i.empty()) {
    SparseMatrix k_ii = submatrix(sub.K, strip_i, strip_i);
    SparseMatrix k_ib = submatrix(sub.K, strip_i, strip_b);
    Eigen::SimplicialLDLT<SparseMatrix> solver(k_ii);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("strip condensation failed");
    s -= Matrix(k_ib).transpose() * solver.solve(Matrix(k_ib));
  }
  return s;
}

}  // namespace ddlab
