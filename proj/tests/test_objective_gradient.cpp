#include <cmath>
#include <random>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"

#include "expnet/gradient.hpp"
#include "expnet/objective.hpp"
#include "expnet/rng.hpp"
#include "fixtures.hpp"

using namespace expnet;

namespace {

// E[log(1 + c chi2_n)] by composite Simpson in s = sqrt(x).
double simpson_log1p_chi2(int n, double c) {
  if (n == 0) return 0.0;
  const double upper = 40.0;
  const int m = 40000;
  const double h = upper / m;
  const double log_norm = n / 2.0 * std::log(2.0) + boost::math::lgamma(n / 2.0);
  auto f = [&](double s) {
    if (s == 0.0) return 0.0;
    return 2.0 * std::exp((n - 1) * std::log(s) - s * s / 2.0 - log_norm) * std::log1p(c * s * s);
  };
  double acc = f(0.0) + f(upper);
  for (int i = 1; i < m; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return acc * h / 3.0;
}

// Exact U(rate) = sum_n P[n] E_n for the scalar single-source problem.
double exact_scalar_utility(double mean, double c) {
  double u = 0.0;
  for (int n = 0; n < 80; ++n) u += poisson_pmf(n, mean) * simpson_log1p_chi2(n, c);
  return u;
}

}  // namespace

TEST_CASE("log det telescopes over rank-one insertions") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 12;
    const int n = 1 + trial * 2;
    Eigen::VectorXd prior(d);
    for (int i = 0; i < d; ++i) prior(i) = u(rng);
    SampleBatch batch;
    batch.features.push_back(Eigen::MatrixXd(d, n));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < n; ++j) batch.features[0](i, j) = z(rng);
    const double noise = u(rng);

    // Oracle: log det(Sigma0^{-1} + X X'/s2) + log det Sigma0 by LU.
    Eigen::MatrixXd info = prior.cwiseInverse().asDiagonal();
    info += batch.features[0] * batch.features[0].transpose() / noise;
    const double oracle = std::log(info.partialPivLu().determinant()) + prior.array().log().sum();

    InfoMatrix m(d);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd w = whiten(prior, batch.features[0].col(j));
      const double peek = m.peek_gain(w, noise);
      const double gain = marginal_gain(m, w, noise);
      CHECK(peek == doctest::Approx(gain).epsilon(1e-12));
      sum += gain;
    }
    CHECK(g_value(prior, batch, {noise}) == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(sum == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(m.log_det() == doctest::Approx(sum).epsilon(1e-12));
  }
  SampleBatch empty;
  empty.features.push_back(Eigen::MatrixXd(3, 0));
  CHECK(g_value(Eigen::VectorXd::Ones(3), empty, {1.0}) == 0.0);
  InfoMatrix m(2);
  CHECK_THROWS(m.add(Eigen::VectorXd::Ones(2), 0.0));
}

TEST_CASE("feature sequences are prefix-consistent") {
  FeatureSequence a(42, Eigen::VectorXd::Ones(3));
  FeatureSequence b(42, Eigen::VectorXd::Ones(3));
  const Eigen::MatrixXd first = a.ensure(2).leftCols(2);
  a.ensure(10);
  b.ensure(10);
  CHECK(a.ensure(10).leftCols(2) == first);
  CHECK(a.ensure(10).leftCols(10) == b.ensure(10).leftCols(10));
}

TEST_CASE("chi-square log expectation matches closed forms and quadrature") {
  for (double c : {0.05, 0.5, 3.0, 20.0}) {
    const double closed = std::exp(1.0 / (2 * c)) * boost::math::expint(1, 1.0 / (2 * c));
    CHECK(expected_log1p_chi2(2, c) == doctest::Approx(closed).epsilon(1e-9));
    for (int n : {1, 3, 7, 25}) CHECK(expected_log1p_chi2(n, c) == doctest::Approx(simpson_log1p_chi2(n, c)).epsilon(1e-7));
  }
  CHECK(expected_log1p_chi2(0, 1.0) == 0.0);
}

TEST_CASE("scalar utility estimate agrees with the exact Poisson mixture") {
  const double prior = 1.5, source = 2.0, noise = 0.7, rate = 2.5;
  const Instance inst = fixtures::scalar_toy(rate, 1.0, prior, source, noise);
  const double c = prior * source / noise;
  const RateVector r = RateVector::Constant(1, 1.2);
  const auto est = utility_mc(inst, r, 2000, 20, 9);
  CHECK(std::abs(est.mean - exact_scalar_utility(1.2, c)) < 4.0 * est.std_error);
  CHECK(utility_mc(inst, RateVector::Zero(1), 10, 10, 1).mean == 0.0);
  const auto again = utility_mc(inst, r, 2000, 20, 9);
  CHECK(again.mean == est.mean);
}

TEST_CASE("exact scalar gradient is the derivative of the exact utility") {
  const double prior = 0.8, source = 1.3, noise = 0.6, c = prior * source / noise;
  for (double mean : {0.5, 1.0, 3.0}) {
    const double h = 1e-4;
    const double fd = (exact_scalar_utility(mean + h, c) - exact_scalar_utility(mean - h, c)) / (2 * h);
    CHECK(oracle_gradient_1d(mean, 1.0, prior, source, noise) == doctest::Approx(fd).epsilon(1e-6));
    // Horizon scales the mean and multiplies the derivative.
    CHECK(oracle_gradient_1d(mean / 2.0, 2.0, prior, source, noise) == doctest::Approx(2.0 * fd).epsilon(1e-6));
    const int np = 10;
    const double head = oracle_head_1d(mean, 1.0, prior, source, noise, np);
    CHECK(head <= oracle_gradient_1d(mean, 1.0, prior, source, noise));
  }
}

TEST_CASE("truncation level follows max(ceil(2 lambda T), 10)") {
  const Instance inst = fixtures::scalar_toy(20.0, 1.5, 1.0, 1.0, 1.0);
  CHECK(truncation_level(inst, RateVector::Constant(1, 2.0)) == 10);
  CHECK(truncation_level(inst, RateVector::Constant(1, 7.1)) == 22);
}

TEST_CASE("gradient estimate tracks the exact gradient on the scalar family") {
  const double prior = 1.0, source = 1.0, noise = 0.5;
  const Instance inst = fixtures::scalar_toy(10.0, 1.0, prior, source, noise);
  EstimatorParams p;
  p.n1 = 100;
  p.n2 = 100;
  p.seed = 4;
  const auto est = estimate_gradient(inst, RateVector::Constant(1, 1.0), p);
  const double exact = oracle_gradient_1d(1.0, 1.0, prior, source, noise);
  CHECK(std::abs(est.g(0) - exact) < 4.0 * est.std_error(0) + 1e-3);
  CHECK(est.n_prime == 10);
  p.coupled = false;
  const auto loose = estimate_gradient(inst, RateVector::Constant(1, 1.0), p);
  CHECK(std::abs(loose.g(0) - exact) < 4.0 * loose.std_error(0) + 1e-3);
}

TEST_CASE("learner-local gradient coordinates match the assembled gradient") {
  const auto st = fixtures::random_stats(3, 2, 2, 1, 6);
  const Instance inst = fixtures::star_toy(st, 2, 2, 1, 100.0);
  RateVector r(inst.total_paths());
  for (int p = 0; p < r.size(); ++p) r(p) = 0.5 + p;
  EstimatorParams params;
  params.n1 = 20;
  params.n2 = 10;
  const auto full = estimate_gradient(inst, r, params);
  for (int l = 0; l < inst.num_learners(); ++l) {
    const Eigen::VectorXd incoming = inst.learner_rates(r, l);
    const auto local = learner_gradient(inst, l, incoming, params, truncation_level(inst, r));
    for (int s = 0; s < inst.num_sources(); ++s) CHECK(local.g(s) == full.g(inst.learner_path(l, s)));
  }
  for (int p = 0; p < r.size(); ++p) CHECK(full.g(p) > 0.0);
}

TEST_CASE("MAP estimate equals the closed-form posterior mean") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z(0.0, 1.0);
  const int d = 4, n = 9;
  Eigen::VectorXd prior_mean(d), prior_cov(d), labels(n), noise(n);
  Eigen::MatrixXd x(d, n);
  for (int i = 0; i < d; ++i) {
    prior_mean(i) = z(rng);
    prior_cov(i) = 0.5 + std::abs(z(rng));
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) x(i, j) = z(rng);
    labels(j) = z(rng);
    noise(j) = 0.3 + std::abs(z(rng));
  }
  const Eigen::MatrixXd w = noise.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd p0 = prior_cov.cwiseInverse().asDiagonal();
  const Eigen::VectorXd oracle = (x * w * x.transpose() + p0).inverse() * (x * w * labels + p0 * prior_mean);
  CHECK((map_estimate(prior_mean, prior_cov, x, labels, noise) - oracle).norm() < 1e-10);
  // A zero prior variance pins the coordinate to the prior mean.
  prior_cov(0) = 0.0;
  CHECK(map_estimate(prior_mean, prior_cov, x, labels, noise)(0) == doctest::Approx(prior_mean(0)));
}

TEST_CASE("estimation error shrinks with rate and is seeded") {
  const auto st = fixtures::random_stats(3, 2, 2, 1, 2);
  const Instance inst = fixtures::star_toy(st, 2, 2, 1, 100.0);
  const RateVector lo = RateVector::Constant(inst.total_paths(), 0.2);
  const RateVector hi = RateVector::Constant(inst.total_paths(), 5.0);
  const double e_lo = estimation_error(inst, lo, 200, 5, 3);
  const double e_hi = estimation_error(inst, hi, 200, 5, 3);
  CHECK(e_hi < e_lo);
  CHECK(estimation_error(inst, hi, 200, 5, 3) == e_hi);
}
