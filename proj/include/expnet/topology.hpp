#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace expnet {

using NodeId = int;
using EdgeId = int;

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  // Unset when an edge list omits the capacity; filled by assign_capacities.
  std::optional<double> capacity;
};

// Directed graph over nodes 0..num_nodes()-1. No self-loops, no duplicate
// edges, capacities non-negative.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int num_nodes);

  int num_nodes() const { return num_nodes_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  EdgeId add_edge(NodeId from, NodeId to, std::optional<double> capacity = {});
  // Adds u->v and v->u.
  void add_undirected(NodeId u, NodeId v);

  const Edge& edge(EdgeId e) const { return edges_.at(e); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::optional<EdgeId> find_edge(NodeId from, NodeId to) const;
  bool has_edge(NodeId from, NodeId to) const { return find_edge(from, to).has_value(); }

  // Out-neighbours in ascending node order.
  const std::vector<NodeId>& successors(NodeId u) const { return out_.at(u); }
  const std::vector<NodeId>& predecessors(NodeId u) const { return in_.at(u); }

  double capacity(EdgeId e) const;
  bool all_capacities_set() const;
  void set_capacity(EdgeId e, double capacity);

 private:
  static std::uint64_t key(NodeId u, NodeId v) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(v);
  }

  int num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<std::vector<NodeId>> in_;
  std::unordered_map<std::uint64_t, EdgeId> index_;
};

enum class TopologyKind { kErdosRenyi, kBalancedTree, kHypercube, kStar, kGrid, kSmallWorld, kFile };

TopologyKind parse_topology_kind(std::string_view name);
std::string to_string(TopologyKind kind);

struct GeneratorParams {
  int nodes = 0;              // er, star, sw (rounded to a square lattice)
  int undirected_edges = -1;  // er: exact undirected edge count; -1 derives it from probability
  double edge_probability = 0.105;
  int branching = 4;          // bt
  int depth = 4;              // bt
  int dimension = 7;          // hc
  int rows = 10;              // grid
  int cols = 10;              // grid
  int long_range_links = 1;   // sw: long-range contacts per node
  double clustering_exponent = 2.0;  // sw: P(link u,v) ~ dist(u,v)^-r
  std::pair<double, double> capacity_range{5.0, 10.0};
};

// Deterministic in (kind, params, seed). Undirected structure is emitted as
// antiparallel directed edge pairs. Capacities are drawn u.a.r. from
// params.capacity_range, independently per directed edge.
Graph generate(TopologyKind kind, const GeneratorParams& params, std::uint64_t seed);

// Lines "u v [capacity]"; '#' starts a comment. Node count is max id + 1.
Graph load_edge_list(std::string_view text);
Graph load_edge_list_file(const std::string& path);
std::string to_edge_list(const Graph& graph);

// Fills every unset capacity u.a.r. from range.
void assign_capacities(Graph& graph, std::pair<double, double> range, std::uint64_t seed);

struct Placement {
  std::vector<NodeId> sources;
  std::vector<NodeId> learners;
  std::vector<int> learner_type;  // parallel to learners
  int num_types = 1;

  int num_sources() const { return static_cast<int>(sources.size()); }
  int num_learners() const { return static_cast<int>(learners.size()); }
};

struct Path {
  int source = 0;   // index into Placement::sources
  int type = 0;
  int learner = 0;  // index into Placement::learners
  std::vector<NodeId> nodes;
  std::vector<EdgeId> edges;
};

// Paths are grouped by (source, type); group id = source * num_types + type.
struct PathSet {
  std::vector<Path> paths;
  std::vector<std::vector<int>> group_paths;

  int total_paths() const { return static_cast<int>(paths.size()); }
};

inline int group_id(int source, int type, int num_types) { return source * num_types + type; }

// Hop-count shortest path; among equal-length paths the lexicographically
// smallest node sequence wins. nullopt if unreachable.
std::optional<std::vector<NodeId>> shortest_path(const Graph& graph, NodeId from, NodeId to);

// Routes one path from every source to every learner of each type.
PathSet route(const Graph& graph, const Placement& placement);

// Draws sources and learners u.a.r. without replacement, assigns learner
// types round-robin then shuffles them, and routes.
std::pair<Placement, PathSet> place_and_route(const Graph& graph, int num_sources,
                                              int num_learners, int num_types,
                                              std::uint64_t seed);

}  // namespace expnet
