#include "expnet/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "expnet/objective.hpp"
#include "expnet/rng.hpp"

namespace expnet {

namespace {

// Index that separates the second feature world of the uncoupled variant.
constexpr std::uint64_t kCoupledWorld = 0;
constexpr std::uint64_t kSecondWorld = 1;

int draw_count(double mean, std::uint64_t key) {
  Stream rng(key);
  return poisson_inverse_cdf(mean, uniform01(rng));
}

// Per-coordinate mean and batch-means standard error over arrival draws.
void summarize(const std::vector<double>& per_draw, int batches, double& mean, double& se) {
  const int n = static_cast<int>(per_draw.size());
  mean = 0.0;
  for (double v : per_draw) mean += v;
  mean /= n;
  const int b = std::min(batches, n);
  if (b < 2) {
    se = 0.0;
    return;
  }
  std::vector<double> sums(b, 0.0);
  std::vector<int> sizes(b, 0);
  for (int j = 0; j < n; ++j) {
    const int k = static_cast<int>(static_cast<long>(j) * b / n);
    sums[k] += per_draw[j];
    ++sizes[k];
  }
  double bm = 0.0;
  for (int k = 0; k < b; ++k) bm += sums[k] / sizes[k];
  bm /= b;
  double var = 0.0;
  for (int k = 0; k < b; ++k) {
    const double dev = sums[k] / sizes[k] - bm;
    var += dev * dev;
  }
  se = std::sqrt(var / (b - 1) / b);
}

}  // namespace

int truncation_level(const Instance& inst, const RateVector& rates) {
  int level = 10;
  for (int l = 0; l < inst.num_learners(); ++l)
    level = std::max(level, learner_truncation_level(inst, inst.learner_rates(rates, l)));
  return level;
}

LearnerGradient learner_gradient(const Instance& inst, int learner, const Eigen::VectorXd& incoming,
                                 const EstimatorParams& params, int n_prime) {
  if (params.n1 < 1 || params.n2 < 1) throw std::invalid_argument("sample counts must be positive");
  if (n_prime < 0) throw std::invalid_argument("truncation level must be non-negative");
  const int S = inst.num_sources(), l = learner, np = n_prime;
  if (incoming.size() != S) throw std::invalid_argument("one incoming rate per source expected");
  const double T = inst.horizon();
  const Eigen::VectorXd lam = incoming.cwiseMax(0.0);

  InfoMatrix info(inst.dimension());
  std::vector<int> counts(S);
  std::vector<std::vector<double>> per_draw(S, std::vector<double>(params.n1, 0.0));
  std::vector<std::vector<double>> pmf(S, std::vector<double>(np + 1));
  std::vector<Eigen::VectorXd> scales(S);
  std::vector<double> noise(S);
  for (int s = 0; s < S; ++s) {
    scales[s] = whitened_scale(inst, l, s);
    noise[s] = inst.noise_var(l, s);
    for (int n = 0; n <= np; ++n) pmf[s][n] = poisson_pmf(n, lam(s) * T);
  }
  auto world = [&](std::uint64_t variant, int s, int j, int k) {
    return FeatureSequence(stream_key(params.seed, StreamTag::kGradientFeatures,
                                      {variant, std::uint64_t(l), std::uint64_t(s), std::uint64_t(j),
                                       std::uint64_t(k)}),
                           scales[s]);
  };
  for (int j = 0; j < params.n1; ++j) {
    for (int s = 0; s < S; ++s)
      counts[s] = draw_count(lam(s) * T, stream_key(params.seed, StreamTag::kGradientArrivals,
                                                    {std::uint64_t(l), std::uint64_t(j), std::uint64_t(s)}));
    for (int k = 0; k < params.n2; ++k) {
      std::vector<FeatureSequence> feats;
      feats.reserve(S);
      for (int s = 0; s < S; ++s) {
        feats.push_back(world(kCoupledWorld, s, j, k));
        feats.back().ensure(std::max(counts[s], np + 1));
      }
      for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        if (params.coupled) {
          // Delta(n) is the marginal gain of the (n+1)-th sample of s on top
          // of the other sources' samples and the first n samples of s.
          info.reset();
          for (int o = 0; o < S; ++o) {
            if (o == s) continue;
            const Eigen::MatrixXd& z = feats[o].ensure(counts[o]);
            for (int i = 0; i < counts[o]; ++i) info.add(z.col(i), noise[o]);
          }
          const Eigen::MatrixXd& zs = feats[s].ensure(np + 1);
          for (int n = 0; n <= np; ++n) acc += pmf[s][n] * info.add(zs.col(n), noise[s]);
        } else {
          // Both terms evaluated on independent feature draws.
          auto g_at = [&](std::uint64_t variant, int n_s) {
            info.reset();
            for (int o = 0; o < S; ++o) {
              const int n = o == s ? n_s : counts[o];
              if (n == 0) continue;
              FeatureSequence seq = world(variant, o, j, k);
              const Eigen::MatrixXd& z = seq.ensure(n);
              for (int i = 0; i < n; ++i) info.add(z.col(i), noise[o]);
            }
            return info.log_det();
          };
          for (int n = 0; n <= np; ++n) acc += pmf[s][n] * (g_at(kCoupledWorld, n + 1) - g_at(kSecondWorld, n));
        }
        per_draw[s][j] += T * acc / params.n2;
      }
    }
  }
  LearnerGradient out;
  out.g.resize(S);
  out.std_error.resize(S);
  for (int s = 0; s < S; ++s) summarize(per_draw[s], params.batches, out.g(s), out.std_error(s));
  return out;
}

int learner_truncation_level(const Instance& inst, const Eigen::VectorXd& incoming) {
  const double peak = incoming.size() > 0 ? incoming.maxCoeff() * inst.horizon() : 0.0;
  return std::max(static_cast<int>(std::ceil(2.0 * peak)), 10);
}

GradientEstimate estimate_gradient(const Instance& inst, const RateVector& rates,
                                   const EstimatorParams& params) {
  if (rates.size() != inst.total_paths()) throw std::invalid_argument("rate vector has wrong dimension");
  GradientEstimate out;
  out.n_prime = params.n_prime >= 0 ? params.n_prime : truncation_level(inst, rates);
  out.g = Eigen::VectorXd::Zero(inst.total_paths());
  out.std_error = Eigen::VectorXd::Zero(inst.total_paths());
  for (int l = 0; l < inst.num_learners(); ++l) {
    const auto lg = learner_gradient(inst, l, inst.learner_rates(rates, l), params, out.n_prime);
    for (int s = 0; s < inst.num_sources(); ++s) {
      const int p = inst.learner_path(l, s);
      out.g(p) = lg.g(s);
      out.std_error(p) = lg.std_error(s);
    }
  }
  return out;
}

double expected_log1p_chi2(int n, double c) {
  if (n < 0 || c < 0.0) throw std::invalid_argument("expected_log1p_chi2: need n >= 0 and c >= 0");
  if (n == 0 || c == 0.0) return 0.0;
  // Substituting x = u^2 gives a smooth integrand on (0, inf) for every n >= 1.
  const double half = 0.5 * n;
  const double log_norm = std::log(2.0) - half * std::log(2.0) - std::lgamma(half);
  auto integrand = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double density = std::exp(log_norm + (n - 1) * std::log(u) - 0.5 * u * u);
    return density * std::log1p(c * u * u);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
}

namespace {

double oracle_sum(double rate, double horizon, double prior_var, double source_var, double noise_var,
                  int n_last) {
  if (rate < 0.0 || horizon <= 0.0 || prior_var < 0.0 || source_var < 0.0 || noise_var <= 0.0)
    throw std::invalid_argument("oracle: parameters out of range");
  const double c = prior_var * source_var / noise_var;
  const double mean = rate * horizon;
  double total = 0.0;
  double prev = expected_log1p_chi2(0, c);
  for (int n = 0; n <= n_last; ++n) {
    const double next = expected_log1p_chi2(n + 1, c);
    total += poisson_pmf(n, mean) * (next - prev);
    prev = next;
  }
  return horizon * total;
}

}  // namespace

double oracle_gradient_1d(double rate, double horizon, double prior_var, double source_var,
                          double noise_var) {
  const double mean = std::max(0.0, rate * horizon);
  int n_last = static_cast<int>(std::ceil(mean + 20.0 * std::sqrt(mean) + 40.0));
  while (poisson_upper_tail(n_last + 1, mean) > 1e-16) n_last += 10;
  return oracle_sum(rate, horizon, prior_var, source_var, noise_var, n_last);
}

double oracle_head_1d(double rate, double horizon, double prior_var, double source_var, double noise_var,
                      int n_prime) {
  if (n_prime < 0) throw std::invalid_argument("oracle: n_prime must be non-negative");
  return oracle_sum(rate, horizon, prior_var, source_var, noise_var, n_prime);
}

}  // namespace expnet
