#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "expnet/instance.hpp"
#include "expnet/topology.hpp"

namespace fixtures {

struct ToyStats {
  int dimension = 3;
  double horizon = 1.0;
  std::vector<double> rates;
  std::vector<double> noise;
  std::vector<Eigen::VectorXd> source_cov;
  std::vector<Eigen::VectorXd> prior_cov;
};

inline expnet::Instance assemble(expnet::Graph graph, expnet::Placement placement, const ToyStats& st) {
  expnet::PathSet paths = expnet::route(graph, placement);
  expnet::ProblemConfig cfg;
  cfg.dimension = st.dimension;
  cfg.horizon = st.horizon;
  cfg.source_rate = st.rates;
  cfg.noise_var = st.noise;
  cfg.source_cov = st.source_cov;
  cfg.prior_cov = st.prior_cov;
  for (std::size_t l = 0; l < st.prior_cov.size(); ++l) cfg.prior_mean.push_back(Eigen::VectorXd::Zero(st.dimension));
  return expnet::build_instance(std::move(graph), std::move(placement), std::move(paths), std::move(cfg));
}

// Random diagonal statistics in the benchmark ranges, drawn
// with the standard library so tests do not depend on the library's streams.
inline ToyStats random_stats(int d, int sources, int learners, int types, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ToyStats st;
  st.dimension = d;
  for (int g = 0; g < sources * types; ++g) {
    st.rates.push_back(5.0 + 3.0 * u(rng));
    st.noise.push_back(0.5 + 0.5 * u(rng));
  }
  for (int s = 0; s < sources; ++s) {
    Eigen::VectorXd c(d);
    for (int i = 0; i < d; ++i) c(i) = u(rng) < 0.5 ? 0.01 * u(rng) : 10.0 + 10.0 * u(rng);
    st.source_cov.push_back(c);
  }
  for (int l = 0; l < learners; ++l) {
    Eigen::VectorXd c(d);
    for (int i = 0; i < d; ++i) c(i) = u(rng) < 0.5 ? 0.01 * u(rng) : 1.0 + u(rng);
    st.prior_cov.push_back(c);
  }
  return st;
}

// Sources 0..S-1 feed a hub; the hub feeds learners. Every edge has the given
// capacity. Learner types are assigned round-robin.
inline expnet::Instance star_toy(const ToyStats& st, int sources, int learners, int types, double capacity) {
  const int hub = sources;
  expnet::Graph g(sources + 1 + learners);
  expnet::Placement pl;
  pl.num_types = types;
  for (int s = 0; s < sources; ++s) {
    g.add_edge(s, hub, capacity);
    pl.sources.push_back(s);
  }
  for (int l = 0; l < learners; ++l) {
    g.add_edge(hub, hub + 1 + l, capacity);
    pl.learners.push_back(hub + 1 + l);
    pl.learner_type.push_back(l % types);
  }
  return assemble(std::move(g), std::move(pl), st);
}

// One source, one learner, one edge; scalar features.
inline expnet::Instance scalar_toy(double rate, double horizon, double prior_var, double source_var, double noise_var,
                                   double capacity = 1e6) {
  ToyStats st;
  st.dimension = 1;
  st.horizon = horizon;
  st.rates = {rate};
  st.noise = {noise_var};
  st.source_cov = {Eigen::VectorXd::Constant(1, source_var)};
  st.prior_cov = {Eigen::VectorXd::Constant(1, prior_var)};
  return star_toy(st, 1, 1, 1, capacity);
}

}  // namespace fixtures
