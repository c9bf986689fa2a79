#include "expnet/linear_program.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace expnet {

bool Polytope::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != num_vars) return false;
  if ((x.array() < -tol).any()) return false;
  for (const auto& row : rows) {
    double lhs = 0.0;
    for (const auto& t : row.terms) lhs += t.coeff * x(t.var);
    if (lhs > row.rhs + tol) return false;
  }
  return true;
}

LpSolution maximize_linear(const Polytope& polytope, const Eigen::VectorXd& c) {
  const int n = polytope.num_vars;
  const int m = static_cast<int>(polytope.rows.size());
  if (c.size() != n) throw std::invalid_argument("objective size mismatch");
  for (const auto& row : polytope.rows)
    if (row.rhs < 0.0) throw std::invalid_argument("simplex requires non-negative right-hand sides");

  // Tableau columns: structural 0..n-1, slack n..n+m-1, rhs at n+m.
  const int cols = n + m + 1;
  Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, cols);
  for (int i = 0; i < m; ++i) {
    for (const auto& t : polytope.rows[i].terms) tab(i, t.var) += t.coeff;
    tab(i, n + i) = 1.0;
    tab(i, cols - 1) = polytope.rows[i].rhs;
  }
  tab.row(m).head(n) = -c.transpose();
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double cost_tol = 1e-11 * scale;
  constexpr double kPivotTol = 1e-11;
  int degenerate_run = 0;
  int pivots = 0;
  const int max_pivots = 50 * (n + m) + 1000;

  while (true) {
    const bool bland = degenerate_run > 50;
    int enter = -1;
    double best = -cost_tol;
    for (int j = 0; j < n + m; ++j) {
      const double rc = tab(m, j);
      if (rc < -cost_tol) {
        if (bland) {
          enter = j;
          break;
        }
        if (rc < best) {
          best = rc;
          enter = j;
        }
      }
    }
    if (enter < 0) break;

    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const double a = tab(i, enter);
      if (a <= kPivotTol) continue;
      const double r = tab(i, cols - 1) / a;
      if (r < ratio - 1e-13 || (r <= ratio + 1e-13 && leave >= 0 && basis[i] < basis[leave])) {
        ratio = r;
        leave = i;
      }
    }
    if (leave < 0) throw std::runtime_error("linear program is unbounded");
    degenerate_run = ratio <= 1e-13 ? degenerate_run + 1 : 0;

    tab.row(leave) /= tab(leave, enter);
    for (int i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = tab(i, enter);
      if (f != 0.0) tab.row(i) -= f * tab.row(leave);
    }
    basis[leave] = enter;
    if (++pivots > max_pivots) throw std::runtime_error("simplex pivot limit exceeded");
  }

  LpSolution sol;
  sol.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) sol.x(basis[i]) = std::max(0.0, tab(i, cols - 1));
  sol.objective = c.dot(sol.x);
  sol.pivots = pivots;
  return sol;
}

Eigen::VectorXd minimize_separable_qp(const Polytope& polytope, const Eigen::VectorXd& h,
                                      const Eigen::VectorXd& g, const QpOptions& options) {
  using SpMat = Eigen::SparseMatrix<double>;
  const int n = polytope.num_vars;
  if (h.size() != n || g.size() != n) throw std::invalid_argument("qp size mismatch");
  if ((h.array() < 0.0).any()) throw std::invalid_argument("qp hessian must be non-negative");

  // Rows: polytope rows, then -x <= 0.
  const int m = static_cast<int>(polytope.rows.size()) + n;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd b(m);
  int r = 0;
  for (const auto& row : polytope.rows) {
    for (const auto& t : row.terms) trips.emplace_back(r, t.var, t.coeff);
    b(r++) = row.rhs;
  }
  for (int j = 0; j < n; ++j) {
    trips.emplace_back(r, j, -1.0);
    b(r++) = 0.0;
  }
  SpMat A(m, n);
  A.setFromTriplets(trips.begin(), trips.end());
  const SpMat At = A.transpose();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = b.cwiseMax(1.0);
  Eigen::VectorXd z = Eigen::VectorXd::Ones(m);
  const double bscale = 1.0 + b.cwiseAbs().maxCoeff();
  const double gscale = 1.0 + g.cwiseAbs().maxCoeff();

  // The normal equations lose accuracy as complementarity closes on
  // degenerate problems; the best iterate seen is kept for that case.
  Eigen::VectorXd best = x;
  double best_error = std::numeric_limits<double>::infinity();
  int best_iteration = 0;
  auto fallback = [&](const char* why) {
    if (best_error <= options.acceptable) return best;
    throw std::runtime_error(std::string("qp: ") + why);
  };

  Eigen::SimplicialLDLT<SpMat> solver;
  auto step_to_boundary = [](const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
    return alpha;
  };

  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd rd = h.cwiseProduct(x) + g + At * z;
    const Eigen::VectorXd rp = A * x + s - b;
    const double mu = s.dot(z) / m;
    const double error = std::max({rd.lpNorm<Eigen::Infinity>() / gscale, rp.lpNorm<Eigen::Infinity>() / bscale,
                                   mu / (gscale * bscale)});
    if (error <= options.tolerance) return x;
    if (error < best_error) {
      best_error = error;
      best = x;
      best_iteration = it;
    } else if (it - best_iteration >= 8) {
      return fallback("interior point stalled");
    }

    const Eigen::VectorXd d = z.cwiseQuotient(s);
    SpMat K = At * d.asDiagonal() * A;
    for (int j = 0; j < n; ++j) K.coeffRef(j, j) += h(j) + 1e-14;
    solver.compute(K);
    if (solver.info() != Eigen::Success) return fallback("factorization failed");

    auto solve_direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& ds,
                               Eigen::VectorXd& dz) {
      const Eigen::VectorXd t = (rc - z.cwiseProduct(rp)).cwiseQuotient(s);
      dx = solver.solve(-rd + At * t);
      ds = -rp - A * dx;
      dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dx, ds, dz;
    solve_direction(s.cwiseProduct(z), dx, ds, dz);
    double alpha = std::min(step_to_boundary(s, ds), step_to_boundary(z, dz));
    const double mu_aff = (s + alpha * ds).dot(z + alpha * dz) / m;
    const double sigma = std::pow(mu_aff / mu, 3);

    Eigen::VectorXd rc = s.cwiseProduct(z) + ds.cwiseProduct(dz);
    rc.array() -= sigma * mu;
    solve_direction(rc, dx, ds, dz);
    alpha = std::min(1.0, 0.995 * std::min(step_to_boundary(s, ds), step_to_boundary(z, dz)));
    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    if (!x.allFinite() || !s.allFinite() || !z.allFinite()) return fallback("numerical breakdown");
  }
  return fallback("interior point did not converge");
}

}  // namespace expnet
