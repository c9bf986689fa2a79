#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "expnet/experiments.hpp"
#include "expnet/topology.hpp"

namespace {

// "var=v1,v2,..." -> (var, values)
std::pair<expnet::SweepVar, std::vector<double>> parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw CLI::ValidationError("--sweep", "expected var=v1,v2,...");
  const auto var = expnet::parse_sweep_var(text.substr(0, eq));
  std::vector<double> values;
  std::stringstream ss(text.substr(eq + 1));
  for (std::string item; std::getline(ss, item, ',');) values.push_back(std::stod(item));
  if (values.empty()) throw CLI::ValidationError("--sweep", "no sweep values");
  return {var, values};
}

int run(const std::string& config, const std::string& sweep, const std::string& out, const std::string& trace_path) {
  auto spec = expnet::load_experiment_spec(config);
  if (!sweep.empty()) std::tie(spec.sweep, spec.sweep_values) = parse_sweep(sweep);
  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path);
    if (!trace) throw std::runtime_error("cannot write '" + trace_path + "'");
  }
  const auto result = expnet::run_experiment(spec, out, &std::cerr, trace_path.empty() ? nullptr : &trace);
  if (out.empty()) std::cout << expnet::emit_csv(result.rows);
  for (const auto& f : result.failures) std::cerr << "failed cell: " << f << '\n';
  return result.failures.empty() ? 0 : 2;
}

int topo(const std::string& kind_name, int nodes, std::uint64_t seed, const std::string& out) {
  const auto kind = expnet::parse_topology_kind(kind_name);
  if (kind == expnet::TopologyKind::kFile) throw std::invalid_argument("topo generates synthetic kinds only");
  expnet::GeneratorParams params;
  switch (kind) {
    case expnet::TopologyKind::kBalancedTree: params.depth = nodes; break;
    case expnet::TopologyKind::kHypercube: params.dimension = nodes; break;
    case expnet::TopologyKind::kGrid: params.rows = params.cols = nodes; break;
    default: params.nodes = nodes; break;
  }
  const auto text = expnet::to_edge_list(expnet::generate(kind, params, seed));
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write '" + out + "'");
    f << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experimental-design rate allocation over multicast networks"};
  app.require_subcommand(1);

  std::string config, sweep, out, trace;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment grid and write CSV results");
  run_cmd->add_option("--config", config, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--sweep", sweep, "Override sweep as var=v1,v2,...");
  run_cmd->add_option("--out", out, "CSV output (resumes if it exists); stdout if omitted");
  run_cmd->add_option("--trace", trace, "Per-round CSV trace of distributed solvers");

  std::string kind = "er", topo_out;
  int nodes = 100;
  std::uint64_t seed = 1;
  auto* topo_cmd = app.add_subcommand("topo", "Generate a topology as an edge list");
  topo_cmd->add_option("--kind", kind, "er, bt, hc, star, grid, sw");
  topo_cmd->add_option("--nodes", nodes, "Node count (depth for bt, dimension for hc, side for grid)");
  topo_cmd->add_option("--seed", seed, "Generator seed");
  topo_cmd->add_option("--out", topo_out, "Output file; stdout if omitted");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(config, sweep, out, trace);
    if (*topo_cmd) return topo(kind, nodes, seed, topo_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
