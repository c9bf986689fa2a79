#include "expnet/rng.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/poisson.hpp>

namespace expnet {

std::uint64_t stream_key(std::uint64_t seed, StreamTag tag,
                         std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  for (std::uint64_t i : indices) h = splitmix64(h ^ (i + 0x632be59bd9b4e019ULL));
  return h;
}

int poisson_inverse_cdf(double mean, double u) {
  if (!(mean > 0.0)) return 0;
  if (mean > 200.0) {
    // exp(-mean) underflows the recurrence; defer to the library quantile.
    using Policy = boost::math::policies::policy<
        boost::math::policies::discrete_quantile<
            boost::math::policies::integer_round_up>>;
    boost::math::poisson_distribution<double, Policy> dist(mean);
    if (u <= 0.0) return 0;
    return static_cast<int>(boost::math::quantile(dist, u));
  }
  double p = std::exp(-mean);
  double cdf = p;
  int k = 0;
  while (u >= cdf) {
    ++k;
    p *= mean / k;
    cdf += p;
    if (p == 0.0 && k > mean) break;
  }
  return k;
}

double poisson_pmf(int n, double mean) {
  if (n < 0) return 0.0;
  if (mean <= 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
}

double poisson_upper_tail(int n, double mean) {
  if (n <= 0) return 1.0;
  if (mean <= 0.0) return 0.0;
  boost::math::poisson_distribution<double> dist(mean);
  return boost::math::cdf(boost::math::complement(dist, n - 1));
}

}  // namespace expnet
