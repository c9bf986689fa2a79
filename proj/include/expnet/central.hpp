#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "expnet/gradient.hpp"
#include "expnet/instance.hpp"

namespace expnet {

struct IterationRecord {
  int k = 0;
  double gamma = 0.0;
  Eigen::VectorXd rates;      // lambda(k+1)
  Eigen::VectorXd direction;  // v(k) for Frank-Wolfe, the projection target for PGA
  double gradient_norm = 0.0;
  double wall_seconds = 0.0;
};

struct SolverTrace {
  std::vector<IterationRecord> iterations;
  double eta = 0.0;  // sum of Frank-Wolfe steps
};

struct SolveResult {
  RateVector rates;
  SolverTrace trace;
};

struct OuterOptions {
  int iterations = 50;          // K
  EstimatorParams estimator;    // seed is remixed with k at every iteration
  double step_size = -1.0;      // PGA gamma; <= 0 selects 0.02 * max_{s,t} lambda_{s,t}
};

// Estimator parameters for outer iteration k: same settings, a seed keyed by k.
EstimatorParams iteration_estimator(const EstimatorParams& base, int k);

// Default PGA step 0.02 * max_{s,t} lambda_{s,t}.
double default_pga_step(const Instance& inst);

// argmax_{v in D} <v, gradient> by exact simplex over the linearised set.
Eigen::VectorXd lp_direction(const Instance& inst, const LinearizedFeasibleSet& lp, const Eigen::VectorXd& gradient);
Eigen::VectorXd lp_direction(const Instance& inst, const Eigen::VectorXd& gradient);

// Euclidean projection onto D. The QP is solved over the linearised set, then
// negatives are clamped and the point is scaled into D exactly.
Eigen::VectorXd project_onto_D(const Instance& inst, const LinearizedFeasibleSet& lp, const Eigen::VectorXd& y);
Eigen::VectorXd project_onto_D(const Instance& inst, const Eigen::VectorXd& y);

// Frank-Wolfe variant: lambda(0) = 0, gamma_k = min(1/K, 1 - eta).
SolveResult fw_solve(const Instance& inst, const OuterOptions& options);

// Projected gradient ascent: lambda <- Pi_D(lambda + gamma * grad).
SolveResult pga_solve(const Instance& inst, const OuterOptions& options);

// Maximises total incoming rate sum_l sum_s lambda_s^l over D.
RateVector maxtp_solve(const Instance& inst);

struct MaxFairOptions {
  double floor = 1e-6;
  double tolerance = 1e-6;
  int max_iterations = 5000;
};

// alpha = 2 fairness: maximises -sum_l 1 / sum_s lambda_s^l by projected
// gradient with Armijo backtracking; every rate is floored at options.floor.
RateVector maxfair_solve(const Instance& inst, const MaxFairOptions& options = {});

double maxfair_objective(const Instance& inst, const RateVector& rates, double floor = 1e-6);
double throughput(const Instance& inst, const RateVector& rates);

}  // namespace expnet
