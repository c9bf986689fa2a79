#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "expnet/instance.hpp"
#include "expnet/rng.hpp"

namespace expnet {

// Posterior information of one learner in prior-whitened coordinates:
// M = I + sum z z' / sigma^2 with z = Sigma_0^{1/2} x, so that
// log det M = log det(information * Sigma_0). Holds the lower Cholesky factor
// and updates it in O(d^2) per observation.
class InfoMatrix {
 public:
  explicit InfoMatrix(int dimension);

  int dimension() const { return static_cast<int>(chol_.rows()); }
  double log_det() const { return log_det_; }

  // Adds z z' / noise_var and returns the increase of log det, which equals
  // log(1 + z' M^{-1} z / noise_var).
  double add(const Eigen::Ref<const Eigen::VectorXd>& z, double noise_var);
  // Same value as add() without changing the factor.
  double peek_gain(const Eigen::Ref<const Eigen::VectorXd>& z, double noise_var) const;

  void reset();
  const Eigen::MatrixXd& cholesky() const { return chol_; }
  Eigen::MatrixXd dense() const;

 private:
  Eigen::MatrixXd chol_;
  Eigen::VectorXd work_;
  double log_det_ = 0.0;
};

// Features received by one learner, one d x n_s block per source (columns are
// samples, in arrival order).
struct SampleBatch {
  std::vector<Eigen::MatrixXd> features;

  int count(int source) const { return static_cast<int>(features[source].cols()); }
};

// G = log det(I + sum_s sum_i z z' / sigma_s^2), z = Sigma_0^{1/2} x, assembled
// densely. Zero for an empty batch.
double g_value(const Eigen::VectorXd& prior_cov, const SampleBatch& batch,
               const std::vector<double>& noise_var);

// Sylvester rank-one form: returns log(1 + z' M^{-1} z / sigma^2) for the
// whitened feature z and inserts it into info.
double marginal_gain(InfoMatrix& info, const Eigen::VectorXd& z, double noise_var);

Eigen::VectorXd whiten(const Eigen::VectorXd& prior_cov, const Eigen::VectorXd& x);

// Draws n_s ~ Poisson(rate_s T) and x ~ N(0, Sigma_s) for one learner.
SampleBatch sample_batch(const Instance& inst, int learner, const Eigen::VectorXd& rates, Stream& rng);

// Lazily extended sequence of i.i.d. standard normal d-vectors scaled by
// `scale`. Sample i is the same no matter how many samples are requested, so
// two evaluations sharing a key see nested feature sets.
class FeatureSequence {
 public:
  FeatureSequence(std::uint64_t key, Eigen::VectorXd scale);
  // Makes at least n samples available; returns the d x (>= n) block.
  const Eigen::MatrixXd& ensure(int n);
  int available() const { return count_; }

 private:
  Stream rng_;
  std::normal_distribution<double> normal_;
  Eigen::VectorXd scale_;
  Eigen::MatrixXd samples_;
  int count_ = 0;
};

// Per-(learner, source) whitened feature scale sqrt(diag(Sigma_0^l) * diag(Sigma_s)).
Eigen::VectorXd whitened_scale(const Instance& inst, int learner, int source);

struct UtilityEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  // One entry per arrival draw j: sum over learners of the mean over feature
  // draws. Entries with equal seed and j share random numbers across rate
  // vectors, so paired differences cancel most of the noise.
  std::vector<double> samples;
};

// U(lambda) = sum_l E[G^l] by N1 arrival draws x N2 feature draws. Arrival
// counts use inverse-CDF sampling from uniforms keyed by (seed, l, j, s), so
// counts are coupled monotonically across rate vectors.
UtilityEstimate utility_mc(const Instance& inst, const RateVector& rates, int n1, int n2,
                           std::uint64_t seed);

// Mean and standard error of the paired differences a.samples - b.samples.
std::pair<double, double> paired_difference(const UtilityEstimate& a, const UtilityEstimate& b);

// beta_hat = (X' W X + Sigma_0^{-1})^{-1} (X' W y + Sigma_0^{-1} beta_0), solved
// in whitened form so a singular prior covariance is allowed. Columns of
// features are samples; noise_var holds one variance per column.
Eigen::VectorXd map_estimate(const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_cov,
                             const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                             const Eigen::VectorXd& noise_var);

// (1/|L|) sum_l E ||beta_hat^l - beta^l|| / ||beta^l||, averaged over
// reps_model ground-truth draws beta^l ~ N(beta_0^l, Sigma_0^l) and reps_data
// data draws per model. Draws with ||beta^l|| = 0 are skipped.
double estimation_error(const Instance& inst, const RateVector& rates, int reps_data, int reps_model,
                        std::uint64_t seed);

}  // namespace expnet
