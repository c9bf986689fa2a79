#include "expnet/instance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace expnet {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

Instance::Instance(Graph graph, Placement placement, PathSet paths, ProblemConfig config)
    : graph_(std::move(graph)),
      placement_(std::move(placement)),
      paths_(std::move(paths)),
      config_(std::move(config)) {
  const int S = num_sources(), L = num_learners(), T = num_types(), d = config_.dimension;
  require(d >= 1, "dimension must be positive");
  require(config_.horizon > 0.0, "horizon must be positive");
  require(static_cast<int>(paths_.group_paths.size()) == S * T, "path groups do not match sources x types");
  require(static_cast<int>(config_.source_rate.size()) == S * T, "source_rate needs one entry per (source,type)");
  require(static_cast<int>(config_.noise_var.size()) == S * T, "noise_var needs one entry per (source,type)");
  require(static_cast<int>(config_.source_cov.size()) == S, "source_cov needs one entry per source");
  require(static_cast<int>(config_.prior_mean.size()) == L, "prior_mean needs one entry per learner");
  require(static_cast<int>(config_.prior_cov.size()) == L, "prior_cov needs one entry per learner");
  for (double r : config_.source_rate) require(r >= 0.0, "source rates must be non-negative");
  for (double v : config_.noise_var) require(v > 0.0, "noise variances must be positive");
  for (const auto& c : config_.source_cov)
    require(c.size() == d && (c.array() >= 0.0).all(), "source covariance must be a non-negative d-vector");
  for (const auto& c : config_.prior_cov)
    require(c.size() == d && (c.array() >= 0.0).all(), "prior covariance must be a non-negative d-vector");
  for (const auto& m : config_.prior_mean) require(m.size() == d, "prior mean must be a d-vector");

  capacity_.resize(graph_.num_edges());
  for (EdgeId e = 0; e < graph_.num_edges(); ++e) capacity_[e] = graph_.capacity(e);

  // Validate routes and index them per edge.
  std::vector<std::map<int, std::vector<int>>> by_edge(graph_.num_edges());
  learner_paths_.assign(L, std::vector<int>(S, -1));
  for (int p = 0; p < total_paths(); ++p) {
    const Path& path = paths_.paths[p];
    require(path.source >= 0 && path.source < S, "path references an absent source");
    require(path.learner >= 0 && path.learner < L, "path references an absent learner");
    require(path.type == placement_.learner_type[path.learner], "path type differs from its learner's type");
    require(path.nodes.size() >= 2 && path.edges.size() + 1 == path.nodes.size(), "malformed path");
    require(path.nodes.front() == placement_.sources[path.source], "path does not start at its source");
    require(path.nodes.back() == placement_.learners[path.learner], "path does not end at its learner");
    for (std::size_t i = 0; i < path.edges.size(); ++i) {
      const EdgeId e = path.edges[i];
      require(e >= 0 && e < graph_.num_edges(), "path references an absent edge");
      require(graph_.edge(e).from == path.nodes[i] && graph_.edge(e).to == path.nodes[i + 1],
              "path edge does not connect consecutive nodes");
      by_edge[e][group_id(path.source, path.type, T)].push_back(p);
    }
    require(learner_paths_[path.learner][path.source] < 0, "two paths from one source to the same learner");
    learner_paths_[path.learner][path.source] = p;
  }
  for (int g = 0; g < num_groups(); ++g)
    for (int p : paths_.group_paths[g])
      require(p >= 0 && p < total_paths() && path_group(p) == g, "group lists a foreign path");
  for (int l = 0; l < L; ++l)
    for (int s = 0; s < S; ++s) require(learner_paths_[l][s] >= 0, "learner lacks a path from some source");

  edge_groups_.resize(graph_.num_edges());
  for (EdgeId e = 0; e < graph_.num_edges(); ++e)
    for (auto& [g, members] : by_edge[e]) edge_groups_[e].push_back(EdgeGroup{g, std::move(members)});
}

Instance build_instance(Graph graph, Placement placement, PathSet paths, ProblemConfig config) {
  return Instance(std::move(graph), std::move(placement), std::move(paths), std::move(config));
}

double Instance::noise_var(int learner, int source) const {
  return config_.noise_var[group_id(source, placement_.learner_type[learner], num_types())];
}

Eigen::VectorXd Instance::learner_rates(const RateVector& rates, int learner) const {
  Eigen::VectorXd out(num_sources());
  for (int s = 0; s < num_sources(); ++s) out(s) = rates(learner_paths_[learner][s]);
  return out;
}

double theta_norm(const std::vector<double>& values, double theta) {
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, std::abs(v));
  if (peak == 0.0 || std::isinf(theta)) return peak;
  double acc = 0.0;
  for (double v : values) acc += std::pow(std::abs(v) / peak, theta);
  return peak * std::pow(acc, 1.0 / theta);
}

ConstraintLhs constraint_lhs(const Instance& inst, const RateVector& rates, bool relaxed, double theta) {
  if (rates.size() != inst.total_paths()) throw std::invalid_argument("rate vector has wrong dimension");
  const double power = relaxed ? theta : std::numeric_limits<double>::infinity();
  ConstraintLhs lhs;
  lhs.edge.assign(inst.num_edges(), 0.0);
  lhs.source.assign(inst.num_groups(), 0.0);
  std::vector<double> buf;
  for (EdgeId e = 0; e < inst.num_edges(); ++e) {
    for (const auto& eg : inst.edge_groups(e)) {
      buf.clear();
      for (int p : eg.paths) buf.push_back(std::max(0.0, rates(p)));
      lhs.edge[e] += theta_norm(buf, power);
    }
  }
  for (int g = 0; g < inst.num_groups(); ++g) {
    buf.clear();
    for (int p : inst.group_paths(g)) buf.push_back(std::max(0.0, rates(p)));
    lhs.source[g] = theta_norm(buf, power);
  }
  return lhs;
}

std::vector<double> residuals(const Instance& inst, const RateVector& rates, bool relaxed, double theta) {
  const ConstraintLhs lhs = constraint_lhs(inst, rates, relaxed, theta);
  std::vector<double> out;
  out.reserve(inst.num_constraints());
  for (EdgeId e = 0; e < inst.num_edges(); ++e) out.push_back(std::max(0.0, lhs.edge[e] - inst.capacity(e)));
  for (int g = 0; g < inst.num_groups(); ++g) out.push_back(std::max(0.0, lhs.source[g] - inst.group_rate(g)));
  for (int p = 0; p < inst.total_paths(); ++p) out.push_back(std::max(0.0, -rates(p)));
  return out;
}

double infeasibility(const Instance& inst, const RateVector& rates) {
  const auto res = residuals(inst, rates);
  if (res.empty()) return 0.0;
  double total = 0.0;
  for (double r : res) total += r;
  return total / static_cast<double>(res.size());
}

RateVector shrink_to_feasible(const Instance& inst, const RateVector& rates) {
  RateVector out = rates.cwiseMax(0.0);
  const ConstraintLhs lhs = constraint_lhs(inst, out);
  double factor = 1.0;
  for (EdgeId e = 0; e < inst.num_edges(); ++e)
    if (lhs.edge[e] > inst.capacity(e)) factor = std::min(factor, inst.capacity(e) / lhs.edge[e]);
  for (int g = 0; g < inst.num_groups(); ++g)
    if (lhs.source[g] > inst.group_rate(g)) factor = std::min(factor, inst.group_rate(g) / lhs.source[g]);
  if (factor < 1.0) {
    out *= factor;
    // Guard against the product rounding one ulp above a bound.
    for (int k = 0; k < 4 && !std::all_of(residuals(inst, out).begin(), residuals(inst, out).end(),
                                          [](double r) { return r == 0.0; });
         ++k)
      out *= 1.0 - 1e-15;
  }
  return out;
}

LinearizedFeasibleSet lp_linearize(const Instance& inst) {
  LinearizedFeasibleSet lp;
  const int P = inst.total_paths();
  lp.num_rates = P;
  auto& poly = lp.polytope;
  poly.var_names.reserve(P);
  for (int p = 0; p < P; ++p) poly.var_names.push_back("lambda[" + std::to_string(p) + "]");
  int next = P;
  for (EdgeId e = 0; e < inst.num_edges(); ++e) {
    const auto& groups = inst.edge_groups(e);
    if (groups.empty()) continue;
    Inequality cap;
    cap.rhs = inst.capacity(e);
    for (const auto& eg : groups) {
      const int aux = next++;
      poly.var_names.push_back("m[e" + std::to_string(e) + ",g" + std::to_string(eg.group) + "]");
      ++lp.num_edge_aux;
      for (int p : eg.paths) poly.rows.push_back(Inequality{{{p, 1.0}, {aux, -1.0}}, 0.0});
      cap.terms.push_back({aux, 1.0});
    }
    poly.rows.push_back(std::move(cap));
  }
  for (int g = 0; g < inst.num_groups(); ++g) {
    if (inst.group_paths(g).empty()) continue;
    const int aux = next++;
    poly.var_names.push_back("m'[g" + std::to_string(g) + "]");
    ++lp.num_source_aux;
    for (int p : inst.group_paths(g)) poly.rows.push_back(Inequality{{{p, 1.0}, {aux, -1.0}}, 0.0});
    poly.rows.push_back(Inequality{{{aux, 1.0}}, inst.group_rate(g)});
  }
  poly.num_vars = next;
  return lp;
}

}  // namespace expnet
