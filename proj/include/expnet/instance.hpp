#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "expnet/linear_program.hpp"
#include "expnet/topology.hpp"

namespace expnet {

// The decision vector lambda = [lambda_{s,t}^p], indexed like PathSet::paths.
using RateVector = Eigen::VectorXd;

// Statistical side of a problem. Covariances are diagonal and stored as their
// diagonals.
struct ProblemConfig {
  int dimension = 1;
  double horizon = 1.0;                      // T
  std::vector<double> source_rate;           // lambda_{s,t}, per (s,t) group
  std::vector<double> noise_var;             // sigma^2_{s,t}, per (s,t) group
  std::vector<Eigen::VectorXd> source_cov;   // diag Sigma_s, per source
  std::vector<Eigen::VectorXd> prior_mean;   // beta_0^l, per learner
  std::vector<Eigen::VectorXd> prior_cov;    // diag Sigma_0^l, per learner
};

// One entry per (s,t) family that has at least one path through an edge.
struct EdgeGroup {
  int group = 0;
  std::vector<int> paths;
};

// Immutable problem: topology, placement, routes and statistics, plus the
// per-edge index of (s,t,p) triples traversing each edge.
class Instance {
 public:
  Instance(Graph graph, Placement placement, PathSet paths, ProblemConfig config);

  const Graph& graph() const { return graph_; }
  const Placement& placement() const { return placement_; }
  const PathSet& paths() const { return paths_; }
  const ProblemConfig& config() const { return config_; }

  int dimension() const { return config_.dimension; }
  double horizon() const { return config_.horizon; }
  int num_sources() const { return placement_.num_sources(); }
  int num_learners() const { return placement_.num_learners(); }
  int num_types() const { return placement_.num_types; }
  int num_groups() const { return static_cast<int>(paths_.group_paths.size()); }
  int num_edges() const { return graph_.num_edges(); }
  int total_paths() const { return paths_.total_paths(); }

  const Path& path(int p) const { return paths_.paths[p]; }
  int path_group(int p) const { return group_id(path(p).source, path(p).type, num_types()); }
  const std::vector<int>& group_paths(int g) const { return paths_.group_paths[g]; }
  double group_rate(int g) const { return config_.source_rate[g]; }
  double capacity(EdgeId e) const { return capacity_[e]; }
  const std::vector<EdgeGroup>& edge_groups(EdgeId e) const { return edge_groups_[e]; }

  // Path from source s to learner l (each learner has exactly one per source).
  int learner_path(int learner, int source) const { return learner_paths_[learner][source]; }
  double noise_var(int learner, int source) const;
  // lambda_s^l for every source s.
  Eigen::VectorXd learner_rates(const RateVector& rates, int learner) const;

  // Number of constraints: one per edge, one per (s,t) group, one per coordinate.
  int num_constraints() const { return num_edges() + num_groups() + total_paths(); }

 private:
  Graph graph_;
  Placement placement_;
  PathSet paths_;
  ProblemConfig config_;
  std::vector<double> capacity_;
  std::vector<std::vector<EdgeGroup>> edge_groups_;
  std::vector<std::vector<int>> learner_paths_;
};

Instance build_instance(Graph graph, Placement placement, PathSet paths, ProblemConfig config);

// Norm ||x||_theta evaluated without overflow; ||x||_inf when theta is +inf.
double theta_norm(const std::vector<double>& values, double theta);

struct ConstraintLhs {
  std::vector<double> edge;    // per edge
  std::vector<double> source;  // per (s,t) group
};

// Left-hand sides of the capacity and source constraints. Exact mode uses the
// multicast max over paths; relaxed mode replaces it with the l_theta norm.
ConstraintLhs constraint_lhs(const Instance& inst, const RateVector& rates, bool relaxed = false,
                             double theta = 10.0);

// max(0, lhs - rhs) per constraint, ordered edges, groups, coordinates.
std::vector<double> residuals(const Instance& inst, const RateVector& rates, bool relaxed = false,
                              double theta = 10.0);

// Mean absolute violation over all constraints (0 if there are none).
double infeasibility(const Instance& inst, const RateVector& rates);

// Clamps negatives to zero and scales down until every exact constraint
// holds. Valid because the feasible set is down-closed and every constraint
// is positively homogeneous in the rates.
RateVector shrink_to_feasible(const Instance& inst, const RateVector& rates);

// Linear description of the feasible set. Variables: the P_TOT rates, then one
// auxiliary m_{g}^e per EdgeGroup (m >= lambda^p for p in the group through e,
// sum_g m_g^e <= mu^e), then one m'_g per (s,t) group (m' >= lambda^p,
// m' <= lambda_{s,t}).
struct LinearizedFeasibleSet {
  Polytope polytope;
  int num_rates = 0;
  int num_edge_aux = 0;
  int num_source_aux = 0;
};

LinearizedFeasibleSet lp_linearize(const Instance& inst);

}  // namespace expnet
