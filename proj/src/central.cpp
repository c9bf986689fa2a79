#include "expnet/central.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "expnet/linear_program.hpp"
#include "expnet/rng.hpp"

namespace expnet {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Eigen::VectorXd padded(const LinearizedFeasibleSet& lp, const Eigen::VectorXd& head) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(lp.polytope.num_vars);
  out.head(lp.num_rates) = head;
  return out;
}

// Per-learner totals sum_s lambda_s^l, floored.
Eigen::VectorXd learner_totals(const Instance& inst, const RateVector& rates, double floor) {
  Eigen::VectorXd tot(inst.num_learners());
  for (int l = 0; l < inst.num_learners(); ++l)
    tot(l) = std::max(inst.learner_rates(rates, l).sum(), floor * inst.num_sources());
  return tot;
}

}  // namespace

EstimatorParams iteration_estimator(const EstimatorParams& base, int k) {
  EstimatorParams p = base;
  p.seed = splitmix64(base.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1)));
  return p;
}

double default_pga_step(const Instance& inst) {
  double peak = 0.0;
  for (int g = 0; g < inst.num_groups(); ++g) peak = std::max(peak, inst.group_rate(g));
  return 0.02 * peak;
}

Eigen::VectorXd lp_direction(const Instance& inst, const LinearizedFeasibleSet& lp,
                             const Eigen::VectorXd& gradient) {
  if (gradient.size() != inst.total_paths()) throw std::invalid_argument("gradient has wrong dimension");
  if (!gradient.allFinite()) throw std::invalid_argument("gradient is not finite");
  const LpSolution sol = maximize_linear(lp.polytope, padded(lp, gradient));
  return sol.x.head(lp.num_rates);
}

Eigen::VectorXd lp_direction(const Instance& inst, const Eigen::VectorXd& gradient) {
  return lp_direction(inst, lp_linearize(inst), gradient);
}

Eigen::VectorXd project_onto_D(const Instance& inst, const LinearizedFeasibleSet& lp, const Eigen::VectorXd& y) {
  if (y.size() != inst.total_paths()) throw std::invalid_argument("point has wrong dimension");
  Eigen::VectorXd h = Eigen::VectorXd::Zero(lp.polytope.num_vars);
  h.head(lp.num_rates).setOnes();
  const Eigen::VectorXd x = minimize_separable_qp(lp.polytope, h, -padded(lp, y));
  return shrink_to_feasible(inst, x.head(lp.num_rates));
}

Eigen::VectorXd project_onto_D(const Instance& inst, const Eigen::VectorXd& y) {
  return project_onto_D(inst, lp_linearize(inst), y);
}

SolveResult fw_solve(const Instance& inst, const OuterOptions& options) {
  if (options.iterations < 1) throw std::invalid_argument("K must be positive");
  const auto lp = lp_linearize(inst);
  const double delta = 1.0 / options.iterations;
  SolveResult res;
  res.rates = RateVector::Zero(inst.total_paths());
  double eta = 0.0;
  for (int k = 0; k < options.iterations && eta < 1.0; ++k) {
    const auto start = std::chrono::steady_clock::now();
    const auto grad = estimate_gradient(inst, res.rates, iteration_estimator(options.estimator, k));
    const Eigen::VectorXd v = lp_direction(inst, lp, grad.g);
    const double gamma = k + 1 == options.iterations ? 1.0 - eta : std::min(delta, 1.0 - eta);
    res.rates += gamma * v;
    eta += gamma;
    res.trace.iterations.push_back({k, gamma, res.rates, v, grad.g.norm(), seconds_since(start)});
  }
  res.trace.eta = eta;
  return res;
}

SolveResult pga_solve(const Instance& inst, const OuterOptions& options) {
  if (options.iterations < 1) throw std::invalid_argument("K must be positive");
  const double gamma = options.step_size > 0.0 ? options.step_size : default_pga_step(inst);
  const auto lp = lp_linearize(inst);
  SolveResult res;
  res.rates = RateVector::Zero(inst.total_paths());
  for (int k = 0; k < options.iterations; ++k) {
    const auto start = std::chrono::steady_clock::now();
    const auto grad = estimate_gradient(inst, res.rates, iteration_estimator(options.estimator, k));
    const Eigen::VectorXd target = res.rates + gamma * grad.g;
    res.rates = project_onto_D(inst, lp, target);
    res.trace.iterations.push_back({k, gamma, res.rates, target, grad.g.norm(), seconds_since(start)});
  }
  return res;
}

RateVector maxtp_solve(const Instance& inst) {
  return lp_direction(inst, Eigen::VectorXd::Ones(inst.total_paths()));
}

double throughput(const Instance& inst, const RateVector& rates) {
  double total = 0.0;
  for (int l = 0; l < inst.num_learners(); ++l) total += inst.learner_rates(rates, l).sum();
  return total;
}

double maxfair_objective(const Instance& inst, const RateVector& rates, double floor) {
  return -learner_totals(inst, rates, floor).cwiseInverse().sum();
}

RateVector maxfair_solve(const Instance& inst, const MaxFairOptions& options) {
  const int P = inst.total_paths();
  const auto lp = lp_linearize(inst);
  auto floored = [&](RateVector x) { return x.cwiseMax(options.floor); };
  auto gradient = [&](const RateVector& x) {
    const Eigen::VectorXd tot = learner_totals(inst, x, options.floor);
    Eigen::VectorXd g(P);
    for (int p = 0; p < P; ++p) g(p) = 1.0 / (tot(inst.path(p).learner) * tot(inst.path(p).learner));
    return g;
  };
  double peak = options.floor;
  for (int g = 0; g < inst.num_groups(); ++g) peak = std::max(peak, inst.group_rate(g));

  // Start from the largest uniform allocation in D.
  RateVector x = floored(shrink_to_feasible(inst, RateVector::Constant(P, peak)));
  double fx = maxfair_objective(inst, x, options.floor);
  Eigen::VectorXd g = gradient(x);
  // Trial steps never move further than a few multiples of the largest rate.
  auto step_cap = [&](const Eigen::VectorXd& grad) { return 4.0 * peak / std::max(grad.lpNorm<Eigen::Infinity>(), 1e-300); };
  double t = step_cap(g);
  for (int it = 0; it < options.max_iterations; ++it) {
    t = std::min(2.0 * t, step_cap(g));
    RateVector next;
    double fnext = 0.0;
    for (int back = 0;; ++back) {
      next = floored(project_onto_D(inst, lp, x + t * g));
      fnext = maxfair_objective(inst, next, options.floor);
      if (fnext >= fx + 1e-4 * g.dot(next - x) || back > 60) break;
      t *= 0.5;
    }
    const double step = (next - x).norm();
    if (fnext < fx) return x;  // no ascent left at machine precision
    x = next;
    fx = fnext;
    if (step < options.tolerance) return x;
    g = gradient(x);
  }
  throw std::runtime_error("maxfair: projected gradient did not converge");
}

}  // namespace expnet
