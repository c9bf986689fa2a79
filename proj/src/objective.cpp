#include "expnet/objective.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace expnet {

namespace {

// Purpose indices keep the utility and estimation-error streams disjoint.
constexpr std::uint64_t kUtilityPurpose = 0;
constexpr std::uint64_t kErrorPurpose = 1;

int draw_count(double mean, std::uint64_t key) {
  Stream rng(key);
  return poisson_inverse_cdf(mean, uniform01(rng));
}

double mean_and_stderr(const std::vector<double>& xs, double& stderr_out) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  stderr_out = xs.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
  return mean;
}

}  // namespace

InfoMatrix::InfoMatrix(int dimension) {
  if (dimension < 1) throw std::invalid_argument("InfoMatrix dimension must be positive");
  chol_ = Eigen::MatrixXd::Identity(dimension, dimension);
  work_.resize(dimension);
}

void InfoMatrix::reset() {
  chol_.setIdentity();
  log_det_ = 0.0;
}

double InfoMatrix::add(const Eigen::Ref<const Eigen::VectorXd>& z, double noise_var) {
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
  const int d = dimension();
  const double inv_sigma = 1.0 / std::sqrt(noise_var);
  for (int i = 0; i < d; ++i) work_(i) = z(i) * inv_sigma;
  double gain = 0.0;
  double* x = work_.data();
  for (int k = 0; k < d; ++k) {
    if (x[k] == 0.0) continue;
    double* col = chol_.col(k).data();
    const double lkk = col[k];
    const double t = x[k] / lkk;
    const double r = std::hypot(lkk, x[k]);
    const double c = r / lkk;
    col[k] = r;
    gain += std::log1p(t * t);
    for (int i = k + 1; i < d; ++i) {
      const double li = (col[i] + t * x[i]) / c;
      x[i] = c * x[i] - t * li;
      col[i] = li;
    }
  }
  log_det_ += gain;
  return gain;
}

double InfoMatrix::peek_gain(const Eigen::Ref<const Eigen::VectorXd>& z, double noise_var) const {
  if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
  const Eigen::VectorXd w = chol_.triangularView<Eigen::Lower>().solve(z);
  return std::log1p(w.squaredNorm() / noise_var);
}

Eigen::MatrixXd InfoMatrix::dense() const {
  const Eigen::MatrixXd l = chol_.triangularView<Eigen::Lower>();
  return l * l.transpose();
}

Eigen::VectorXd whiten(const Eigen::VectorXd& prior_cov, const Eigen::VectorXd& x) {
  return prior_cov.cwiseSqrt().cwiseProduct(x);
}

double g_value(const Eigen::VectorXd& prior_cov, const SampleBatch& batch,
               const std::vector<double>& noise_var) {
  if ((prior_cov.array() < 0.0).any()) throw std::invalid_argument("prior covariance is not PSD");
  if (noise_var.size() != batch.features.size()) throw std::invalid_argument("one noise variance per source");
  const int d = static_cast<int>(prior_cov.size());
  const Eigen::VectorXd root = prior_cov.cwiseSqrt();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
  for (std::size_t s = 0; s < batch.features.size(); ++s) {
    if (batch.features[s].cols() == 0) continue;
    if (batch.features[s].rows() != d) throw std::invalid_argument("feature dimension mismatch");
    const Eigen::MatrixXd z = root.asDiagonal() * batch.features[s];
    m.selfadjointView<Eigen::Lower>().rankUpdate(z, 1.0 / noise_var[s]);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(m.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw std::runtime_error("information matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double marginal_gain(InfoMatrix& info, const Eigen::VectorXd& z, double noise_var) {
  return info.add(z, noise_var);
}

SampleBatch sample_batch(const Instance& inst, int learner, const Eigen::VectorXd& rates, Stream& rng) {
  const int S = inst.num_sources(), d = inst.dimension();
  if (rates.size() != S) throw std::invalid_argument("one rate per source expected");
  SampleBatch batch;
  batch.features.resize(S);
  std::normal_distribution<double> normal;
  for (int s = 0; s < S; ++s) {
    const int n = poisson_inverse_cdf(std::max(0.0, rates(s)) * inst.horizon(), uniform01(rng));
    const Eigen::VectorXd scale = inst.config().source_cov[s].cwiseSqrt();
    batch.features[s].resize(d, n);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < d; ++r) batch.features[s](r, i) = scale(r) * normal(rng);
  }
  (void)learner;
  return batch;
}

FeatureSequence::FeatureSequence(std::uint64_t key, Eigen::VectorXd scale)
    : rng_(key), scale_(std::move(scale)), samples_(scale_.size(), 0) {}

const Eigen::MatrixXd& FeatureSequence::ensure(int n) {
  if (n <= count_) return samples_;
  const int d = static_cast<int>(scale_.size());
  const int grow = std::max<int>(n, 2 * static_cast<int>(samples_.cols()));
  samples_.conservativeResize(d, grow);
  for (int i = count_; i < grow; ++i)
    for (int r = 0; r < d; ++r) samples_(r, i) = scale_(r) * normal_(rng_);
  count_ = grow;
  return samples_;
}

Eigen::VectorXd whitened_scale(const Instance& inst, int learner, int source) {
  return inst.config().prior_cov[learner].cwiseProduct(inst.config().source_cov[source]).cwiseSqrt();
}

UtilityEstimate utility_mc(const Instance& inst, const RateVector& rates, int n1, int n2,
                           std::uint64_t seed) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("sample counts must be positive");
  const int S = inst.num_sources(), L = inst.num_learners();
  UtilityEstimate out;
  out.samples.assign(n1, 0.0);
  InfoMatrix info(inst.dimension());
  std::vector<int> counts(S);
  for (int l = 0; l < L; ++l) {
    const Eigen::VectorXd lam = inst.learner_rates(rates, l);
    std::vector<Eigen::VectorXd> scales(S);
    std::vector<double> noise(S);
    for (int s = 0; s < S; ++s) {
      scales[s] = whitened_scale(inst, l, s);
      noise[s] = inst.noise_var(l, s);
    }
    for (int j = 0; j < n1; ++j) {
      int total = 0;
      for (int s = 0; s < S; ++s) {
        counts[s] = draw_count(std::max(0.0, lam(s)) * inst.horizon(),
                               stream_key(seed, StreamTag::kArrivals, {kUtilityPurpose, std::uint64_t(l),
                                                                       std::uint64_t(j), std::uint64_t(s)}));
        total += counts[s];
      }
      if (total == 0) continue;
      double acc = 0.0;
      for (int k = 0; k < n2; ++k) {
        info.reset();
        for (int s = 0; s < S; ++s) {
          if (counts[s] == 0) continue;
          FeatureSequence seq(stream_key(seed, StreamTag::kFeatures,
                                         {kUtilityPurpose, std::uint64_t(l), std::uint64_t(s),
                                          std::uint64_t(j), std::uint64_t(k)}),
                              scales[s]);
          const Eigen::MatrixXd& z = seq.ensure(counts[s]);
          for (int i = 0; i < counts[s]; ++i) info.add(z.col(i), noise[s]);
        }
        acc += info.log_det();
      }
      out.samples[j] += acc / n2;
    }
  }
  out.mean = mean_and_stderr(out.samples, out.std_error);
  return out;
}

std::pair<double, double> paired_difference(const UtilityEstimate& a, const UtilityEstimate& b) {
  if (a.samples.size() != b.samples.size() || a.samples.empty())
    throw std::invalid_argument("paired estimates need equal, non-empty sample vectors");
  std::vector<double> diff(a.samples.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = a.samples[j] - b.samples[j];
  double se = 0.0;
  const double mean = mean_and_stderr(diff, se);
  return {mean, se};
}

Eigen::VectorXd map_estimate(const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_cov,
                             const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                             const Eigen::VectorXd& noise_var) {
  const Eigen::Index d = prior_mean.size(), n = features.cols();
  if (prior_cov.size() != d || (n > 0 && features.rows() != d) || labels.size() != n || noise_var.size() != n)
    throw std::invalid_argument("map_estimate: inconsistent dimensions");
  if ((prior_cov.array() < 0.0).any()) throw std::invalid_argument("prior covariance is not PSD");
  if (n == 0) return prior_mean;
  // beta = beta_0 + R delta with R = Sigma_0^{1/2}, Z = R X:
  // (I + Z W Z') delta = Z W (y - X' beta_0).
  const Eigen::VectorXd root = prior_cov.cwiseSqrt();
  const Eigen::MatrixXd z = root.asDiagonal() * features;
  const Eigen::VectorXd w = noise_var.cwiseInverse();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
  m.noalias() += z * w.asDiagonal() * z.transpose();
  const Eigen::VectorXd resid = labels - features.transpose() * prior_mean;
  const Eigen::VectorXd rhs = z * w.cwiseProduct(resid);
  const Eigen::VectorXd delta = m.llt().solve(rhs);
  return prior_mean + root.cwiseProduct(delta);
}

double estimation_error(const Instance& inst, const RateVector& rates, int reps_data, int reps_model,
                        std::uint64_t seed) {
  if (reps_data < 1 || reps_model < 1) throw std::invalid_argument("repetition counts must be positive");
  const int S = inst.num_sources(), L = inst.num_learners(), d = inst.dimension();
  const auto& cfg = inst.config();
  double total = 0.0;
  long used = 0;
  for (int m = 0; m < reps_model; ++m) {
    for (int l = 0; l < L; ++l) {
      Stream truth_rng = make_stream(seed, StreamTag::kGroundTruth, {std::uint64_t(m), std::uint64_t(l)});
      std::normal_distribution<double> normal;
      Eigen::VectorXd beta(d);
      for (int r = 0; r < d; ++r) beta(r) = cfg.prior_mean[l](r) + std::sqrt(cfg.prior_cov[l](r)) * normal(truth_rng);
      const double norm = beta.norm();
      if (norm == 0.0) continue;
      const Eigen::VectorXd lam = inst.learner_rates(rates, l);
      for (int rep = 0; rep < reps_data; ++rep) {
        std::vector<int> counts(S);
        int n = 0;
        for (int s = 0; s < S; ++s) {
          counts[s] = draw_count(std::max(0.0, lam(s)) * inst.horizon(),
                                 stream_key(seed, StreamTag::kArrivals,
                                            {kErrorPurpose, std::uint64_t(m), std::uint64_t(l),
                                             std::uint64_t(rep), std::uint64_t(s)}));
          n += counts[s];
        }
        Eigen::MatrixXd x(d, n);
        Eigen::VectorXd y(n), noise(n);
        Stream noise_rng = make_stream(seed, StreamTag::kNoise,
                                       {std::uint64_t(m), std::uint64_t(l), std::uint64_t(rep)});
        std::normal_distribution<double> noise_normal;
        int col = 0;
        for (int s = 0; s < S; ++s) {
          if (counts[s] == 0) continue;
          FeatureSequence seq(stream_key(seed, StreamTag::kFeatures,
                                         {kErrorPurpose, std::uint64_t(m), std::uint64_t(l),
                                          std::uint64_t(rep), std::uint64_t(s)}),
                              cfg.source_cov[s].cwiseSqrt());
          const Eigen::MatrixXd& feats = seq.ensure(counts[s]);
          const double var = inst.noise_var(l, s);
          for (int i = 0; i < counts[s]; ++i, ++col) {
            x.col(col) = feats.col(i);
            noise(col) = var;
            y(col) = feats.col(i).dot(beta) + std::sqrt(var) * noise_normal(noise_rng);
          }
        }
        const Eigen::VectorXd est = map_estimate(cfg.prior_mean[l], cfg.prior_cov[l], x, y, noise);
        total += (est - beta).norm() / norm;
        ++used;
      }
    }
  }
  return used > 0 ? total / static_cast<double>(used) : 0.0;
}

}  // namespace expnet
