#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "expnet/instance.hpp"

namespace expnet {

struct EstimatorParams {
  int n1 = 50;            // arrival draws
  int n2 = 50;            // feature draws per arrival draw
  int n_prime = -1;       // truncation level; < 0 selects truncation_level()
  std::uint64_t seed = 1;
  bool coupled = true;    // reuse one feature draw for both terms of each difference
  int batches = 10;       // replicate batches over arrival draws for the stderr
};

struct GradientEstimate {
  Eigen::VectorXd g;          // one entry per path
  Eigen::VectorXd std_error;  // per-coordinate standard error
  int n_prime = 0;
};

// n' = max(ceil(2 max_{l,s} lambda_s^l T), 10).
int truncation_level(const Instance& inst, const RateVector& rates);

// Truncated sampled gradient. For the path from source s to learner l:
//   g = T sum_{n=0}^{n'} P[n_s^l = n] Delta(n),
// where Delta(n) averages G(n_s = n + 1) - G(n_s = n) over arrival draws of
// the other sources and feature draws. Coordinates depend only on (s, l).
GradientEstimate estimate_gradient(const Instance& inst, const RateVector& rates,
                                   const EstimatorParams& params);

struct LearnerGradient {
  Eigen::VectorXd g;          // one entry per source
  Eigen::VectorXd std_error;
};

// The coordinates owned by one learner, computed from its incoming rates
// lambda_s^l alone. estimate_gradient() assembles these per path.
LearnerGradient learner_gradient(const Instance& inst, int learner, const Eigen::VectorXd& incoming,
                                 const EstimatorParams& params, int n_prime);

// max(ceil(2 max_s lambda_s^l T), 10) from one learner's incoming rates.
int learner_truncation_level(const Instance& inst, const Eigen::VectorXd& incoming);

// E[log(1 + c chi2_n)] by adaptive quadrature (0 for n = 0).
double expected_log1p_chi2(int n, double c);

// Exact single-source, scalar-feature gradient
//   T sum_n P[Poisson(rate T) = n] (E_{n+1} - E_n),
// with E_n = E[log(1 + c chi2_n)], c = prior_var * source_var / noise_var,
// summed until the Poisson tail is below 1e-16.
double oracle_gradient_1d(double rate, double horizon, double prior_var, double source_var,
                          double noise_var);

// The same sum truncated after n = n_prime.
double oracle_head_1d(double rate, double horizon, double prior_var, double source_var, double noise_var,
                      int n_prime);

}  // namespace expnet
