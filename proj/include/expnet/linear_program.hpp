#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace expnet {

struct LinearTerm {
  int var = 0;
  double coeff = 0.0;
};

// sum(terms) <= rhs
struct Inequality {
  std::vector<LinearTerm> terms;
  double rhs = 0.0;
};

// {x >= 0 : every row holds}. Right-hand sides are required to be >= 0, so the
// origin is always a vertex; every polytope built by this library has that form.
struct Polytope {
  int num_vars = 0;
  std::vector<Inequality> rows;
  std::vector<std::string> var_names;

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const;
};

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  int pivots = 0;
};

// Exact maximisation of c.x over the polytope with a dense-tableau primal
// simplex started from the slack basis. Pivoting is Dantzig's rule with a
// switch to Bland's rule after a run of degenerate pivots, so the returned
// vertex is a deterministic function of (polytope, c).
LpSolution maximize_linear(const Polytope& polytope, const Eigen::VectorXd& c);

// Errors are the scaled KKT residuals: dual / (1 + |g|), primal / (1 + |b|)
// and complementarity / both scales.
struct QpOptions {
  double tolerance = 1e-12;   // stop when the error falls below this
  double acceptable = 1e-7;    // best iterate returned if progress stalls below this
  int max_iterations = 200;
};

// Minimises 0.5 x' diag(h) x + g.x over the polytope (h >= 0) with a
// Mehrotra predictor-corrector interior point method.
Eigen::VectorXd minimize_separable_qp(const Polytope& polytope, const Eigen::VectorXd& h,
                                      const Eigen::VectorXd& g, const QpOptions& options = {});

}  // namespace expnet
