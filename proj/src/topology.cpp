#include "expnet/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "expnet/rng.hpp"

namespace expnet {

Graph::Graph(int num_nodes) : num_nodes_(num_nodes), out_(num_nodes), in_(num_nodes) {
  if (num_nodes < 0) throw std::invalid_argument("negative node count");
}

EdgeId Graph::add_edge(NodeId from, NodeId to, std::optional<double> capacity) {
  if (from < 0 || to < 0 || from >= num_nodes_ || to >= num_nodes_)
    throw std::invalid_argument("edge endpoint out of range");
  if (from == to) throw std::invalid_argument("self-loop " + std::to_string(from));
  if (capacity && !(*capacity >= 0.0)) throw std::invalid_argument("negative capacity");
  if (index_.count(key(from, to)))
    throw std::invalid_argument("duplicate edge " + std::to_string(from) + "->" + std::to_string(to));
  const EdgeId id = num_edges();
  edges_.push_back(Edge{from, to, capacity});
  index_.emplace(key(from, to), id);
  auto& succ = out_[from];
  succ.insert(std::upper_bound(succ.begin(), succ.end(), to), to);
  auto& pred = in_[to];
  pred.insert(std::upper_bound(pred.begin(), pred.end(), from), from);
  return id;
}

void Graph::add_undirected(NodeId u, NodeId v) {
  add_edge(u, v);
  add_edge(v, u);
}

std::optional<EdgeId> Graph::find_edge(NodeId from, NodeId to) const {
  auto it = index_.find(key(from, to));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Graph::capacity(EdgeId e) const {
  const auto& cap = edges_.at(e).capacity;
  if (!cap) throw std::logic_error("capacity of edge " + std::to_string(e) + " is unset");
  return *cap;
}

bool Graph::all_capacities_set() const {
  return std::all_of(edges_.begin(), edges_.end(), [](const Edge& e) { return e.capacity.has_value(); });
}

void Graph::set_capacity(EdgeId e, double capacity) {
  if (!(capacity >= 0.0)) throw std::invalid_argument("negative capacity");
  edges_.at(e).capacity = capacity;
}

TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "er") return TopologyKind::kErdosRenyi;
  if (name == "bt") return TopologyKind::kBalancedTree;
  if (name == "hc") return TopologyKind::kHypercube;
  if (name == "star") return TopologyKind::kStar;
  if (name == "grid") return TopologyKind::kGrid;
  if (name == "sw") return TopologyKind::kSmallWorld;
  if (name == "file") return TopologyKind::kFile;
  throw std::invalid_argument("unknown topology kind '" + std::string(name) + "'");
}

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::kErdosRenyi: return "er";
    case TopologyKind::kBalancedTree: return "bt";
    case TopologyKind::kHypercube: return "hc";
    case TopologyKind::kStar: return "star";
    case TopologyKind::kGrid: return "grid";
    case TopologyKind::kSmallWorld: return "sw";
    case TopologyKind::kFile: return "file";
  }
  return "?";
}

namespace {

bool weakly_connected(const Graph& g) {
  if (g.num_nodes() == 0) return false;
  std::vector<char> seen(g.num_nodes(), 0);
  std::deque<NodeId> queue{0};
  seen[0] = 1;
  int count = 1;
  while (!queue.empty()) {
    NodeId u = queue.front();
    queue.pop_front();
    for (const auto* adj : {&g.successors(u), &g.predecessors(u)}) {
      for (NodeId v : *adj) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          queue.push_back(v);
        }
      }
    }
  }
  return count == g.num_nodes();
}

Graph erdos_renyi(const GeneratorParams& p, std::uint64_t seed) {
  if (p.nodes < 2) throw std::invalid_argument("er needs at least 2 nodes");
  const long long max_edges = static_cast<long long>(p.nodes) * (p.nodes - 1) / 2;
  if (p.undirected_edges > max_edges) throw std::invalid_argument("er edge count exceeds complete graph");
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Stream rng = make_stream(seed, StreamTag::kTopology, {attempt});
    Graph g(p.nodes);
    if (p.undirected_edges >= 0) {
      // G(n, m): sample m distinct pairs.
      std::vector<std::pair<int, int>> pairs;
      pairs.reserve(max_edges);
      for (int u = 0; u < p.nodes; ++u)
        for (int v = u + 1; v < p.nodes; ++v) pairs.emplace_back(u, v);
      std::shuffle(pairs.begin(), pairs.end(), rng);
      pairs.resize(p.undirected_edges);
      std::sort(pairs.begin(), pairs.end());
      for (auto [u, v] : pairs) g.add_undirected(u, v);
    } else {
      for (int u = 0; u < p.nodes; ++u)
        for (int v = u + 1; v < p.nodes; ++v)
          if (uniform01(rng) < p.edge_probability) g.add_undirected(u, v);
    }
    if (weakly_connected(g)) return g;
  }
  throw std::runtime_error("er: no connected sample in 1000 attempts; raise the edge count");
}

Graph balanced_tree(const GeneratorParams& p) {
  if (p.branching < 1 || p.depth < 0) throw std::invalid_argument("bt needs branching >= 1, depth >= 0");
  long long nodes = 1, level = 1;
  for (int i = 0; i < p.depth; ++i) {
    level *= p.branching;
    nodes += level;
  }
  if (nodes > 10'000'000) throw std::invalid_argument("bt too large");
  Graph g(static_cast<int>(nodes));
  for (int child = 1; child < nodes; ++child) g.add_undirected((child - 1) / p.branching, child);
  return g;
}

Graph hypercube(const GeneratorParams& p) {
  int dim = p.dimension;
  if (p.nodes > 0) {
    dim = 0;
    while ((1 << dim) < p.nodes) ++dim;
    if ((1 << dim) != p.nodes) throw std::invalid_argument("hc node count must be a power of two");
  }
  if (dim < 1 || dim > 24) throw std::invalid_argument("hc dimension out of range");
  Graph g(1 << dim);
  for (int u = 0; u < (1 << dim); ++u)
    for (int b = 0; b < dim; ++b) {
      int v = u ^ (1 << b);
      if (u < v) g.add_undirected(u, v);
    }
  return g;
}

Graph star(const GeneratorParams& p) {
  if (p.nodes < 2) throw std::invalid_argument("star needs at least 2 nodes");
  Graph g(p.nodes);
  for (int leaf = 1; leaf < p.nodes; ++leaf) g.add_undirected(0, leaf);
  return g;
}

void lattice(Graph& g, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      int u = r * cols + c;
      if (c + 1 < cols) g.add_undirected(u, u + 1);
      if (r + 1 < rows) g.add_undirected(u, u + cols);
    }
}

std::pair<int, int> grid_shape(const GeneratorParams& p, const char* kind) {
  if (p.nodes > 0) {
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(p.nodes))));
    if (side * side != p.nodes) throw std::invalid_argument(std::string(kind) + " node count must be a perfect square");
    return {side, side};
  }
  if (p.rows < 1 || p.cols < 1) throw std::invalid_argument(std::string(kind) + " needs positive rows and cols");
  return {p.rows, p.cols};
}

Graph grid(const GeneratorParams& p) {
  auto [rows, cols] = grid_shape(p, "grid");
  Graph g(rows * cols);
  lattice(g, rows, cols);
  return g;
}

// Kleinberg navigable small world: 2-d lattice plus long-range contacts drawn
// with probability proportional to lattice distance^-r.
Graph small_world(const GeneratorParams& p, std::uint64_t seed) {
  auto [rows, cols] = grid_shape(p, "sw");
  const int n = rows * cols;
  if (n < 2) throw std::invalid_argument("sw needs at least 2 nodes");
  Graph g(n);
  lattice(g, rows, cols);
  Stream rng = make_stream(seed, StreamTag::kTopology);
  std::vector<double> weight(n);
  for (int u = 0; u < n; ++u) {
    const int ur = u / cols, uc = u % cols;
    for (int v = 0; v < n; ++v) {
      int dist = std::abs(v / cols - ur) + std::abs(v % cols - uc);
      weight[v] = v == u ? 0.0 : std::pow(static_cast<double>(dist), -p.clustering_exponent);
    }
    std::discrete_distribution<int> pick(weight.begin(), weight.end());
    for (int k = 0; k < p.long_range_links; ++k) {
      int v = pick(rng);
      if (!g.has_edge(u, v)) g.add_undirected(u, v);
    }
  }
  return g;
}

}  // namespace

void assign_capacities(Graph& graph, std::pair<double, double> range, std::uint64_t seed) {
  if (range.first < 0.0 || range.second < range.first) throw std::invalid_argument("bad capacity range");
  for (EdgeId e = 0; e < graph.num_edges(); ++e) {
    if (graph.edge(e).capacity) continue;
    Stream rng = make_stream(seed, StreamTag::kCapacity, {static_cast<std::uint64_t>(e)});
    graph.set_capacity(e, range.first == range.second ? range.first : uniform(rng, range.first, range.second));
  }
}

Graph generate(TopologyKind kind, const GeneratorParams& params, std::uint64_t seed) {
  Graph g;
  switch (kind) {
    case TopologyKind::kErdosRenyi: g = erdos_renyi(params, seed); break;
    case TopologyKind::kBalancedTree: g = balanced_tree(params); break;
    case TopologyKind::kHypercube: g = hypercube(params); break;
    case TopologyKind::kStar: g = star(params); break;
    case TopologyKind::kGrid: g = grid(params); break;
    case TopologyKind::kSmallWorld: g = small_world(params, seed); break;
    case TopologyKind::kFile: throw std::invalid_argument("file topologies are loaded, not generated");
  }
  if (g.num_nodes() == 0) throw std::invalid_argument("degenerate topology with 0 nodes");
  assign_capacities(g, params.capacity_range, seed);
  return g;
}

Graph load_edge_list(std::string_view text) {
  struct Row {
    NodeId u, v;
    std::optional<double> cap;
  };
  std::vector<Row> rows;
  NodeId max_id = -1;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": " + why);
    };
    if (tok.size() < 2 || tok.size() > 3) fail("expected 'u v [capacity]'");
    auto parse_node = [&](const std::string& s) {
      NodeId id = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
      if (ec != std::errc() || ptr != s.data() + s.size() || id < 0) fail("bad node id '" + s + "'");
      return id;
    };
    Row row{parse_node(tok[0]), parse_node(tok[1]), std::nullopt};
    if (tok.size() == 3) {
      const std::string& s = tok[2];
      double cap = 0.0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), cap);
      if (ec != std::errc() || ptr != s.data() + s.size()) fail("bad capacity '" + s + "'");
      if (!(cap >= 0.0)) fail("negative capacity");
      row.cap = cap;
    }
    if (row.u == row.v) fail("self-loop at node " + std::to_string(row.u));
    max_id = std::max({max_id, row.u, row.v});
    rows.push_back(row);
  }
  Graph g(max_id + 1);
  for (const auto& r : rows) g.add_edge(r.u, r.v, r.cap);
  return g;
}

Graph load_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_edge_list(buf.str());
}

std::string to_edge_list(const Graph& graph) {
  std::ostringstream out;
  out.precision(17);
  out << "# " << graph.num_nodes() << " nodes, " << graph.num_edges() << " directed edges\n";
  for (const auto& e : graph.edges()) {
    out << e.from << ' ' << e.to;
    if (e.capacity) out << ' ' << *e.capacity;
    out << '\n';
  }
  return out.str();
}

std::optional<std::vector<NodeId>> shortest_path(const Graph& graph, NodeId from, NodeId to) {
  // Reverse BFS gives hop distance to `to`; walking forward through the
  // smallest-id successor that reduces the distance yields the
  // lexicographically smallest shortest path.
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> dist(graph.num_nodes(), kInf);
  std::deque<NodeId> queue{to};
  dist[to] = 0;
  while (!queue.empty()) {
    NodeId v = queue.front();
    queue.pop_front();
    for (NodeId u : graph.predecessors(v)) {
      if (dist[u] == kInf) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  if (dist[from] == kInf) return std::nullopt;
  std::vector<NodeId> path{from};
  NodeId cur = from;
  while (cur != to) {
    for (NodeId next : graph.successors(cur)) {
      if (dist[next] == dist[cur] - 1) {
        cur = next;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

PathSet route(const Graph& graph, const Placement& placement) {
  if (placement.learner_type.size() != placement.learners.size())
    throw std::invalid_argument("learner_type size mismatch");
  for (int t : placement.learner_type)
    if (t < 0 || t >= placement.num_types) throw std::invalid_argument("learner type out of range");
  PathSet set;
  set.group_paths.resize(static_cast<std::size_t>(placement.num_sources()) * placement.num_types);
  for (int s = 0; s < placement.num_sources(); ++s) {
    for (int t = 0; t < placement.num_types; ++t) {
      for (int l = 0; l < placement.num_learners(); ++l) {
        if (placement.learner_type[l] != t) continue;
        auto nodes = shortest_path(graph, placement.sources[s], placement.learners[l]);
        if (!nodes)
          throw std::runtime_error("learner node " + std::to_string(placement.learners[l]) +
                                   " unreachable from source node " + std::to_string(placement.sources[s]));
        Path p;
        p.source = s;
        p.type = t;
        p.learner = l;
        p.nodes = std::move(*nodes);
        for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) p.edges.push_back(*graph.find_edge(p.nodes[i], p.nodes[i + 1]));
        set.group_paths[group_id(s, t, placement.num_types)].push_back(set.total_paths());
        set.paths.push_back(std::move(p));
      }
    }
  }
  return set;
}

std::pair<Placement, PathSet> place_and_route(const Graph& graph, int num_sources, int num_learners,
                                              int num_types, std::uint64_t seed) {
  if (num_sources < 1 || num_learners < 1 || num_types < 1)
    throw std::invalid_argument("need at least one source, learner and type");
  if (num_sources + num_learners > graph.num_nodes())
    throw std::invalid_argument("more sources and learners than nodes");
  Stream rng = make_stream(seed, StreamTag::kPlacement);
  std::vector<NodeId> nodes(graph.num_nodes());
  std::iota(nodes.begin(), nodes.end(), 0);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  Placement pl;
  pl.num_types = num_types;
  pl.sources.assign(nodes.begin(), nodes.begin() + num_sources);
  pl.learners.assign(nodes.begin() + num_sources, nodes.begin() + num_sources + num_learners);
  pl.learner_type.resize(num_learners);
  for (int l = 0; l < num_learners; ++l) pl.learner_type[l] = l % num_types;
  std::shuffle(pl.learner_type.begin(), pl.learner_type.end(), rng);
  PathSet paths = route(graph, pl);
  return {std::move(pl), std::move(paths)};
}

}  // namespace expnet
