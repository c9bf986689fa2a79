#include "expnet/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

#include "expnet/objective.hpp"
#include "expnet/rng.hpp"

namespace expnet {

namespace {

using Json = nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string data_path(const std::string& name) { return std::string(EXPNET_DATA_DIR) + "/" + name + ".edges"; }

InstanceSpec backbone(const std::string& name, int nodes_hint) {
  InstanceSpec s;
  s.name = name;
  s.kind = TopologyKind::kFile;
  s.edge_file = data_path(name);
  s.generator.nodes = nodes_hint;
  s.cap_range = {5.0, 8.0};
  s.num_sources = 3;
  s.num_learners = 3;
  s.num_types = 2;
  return s;
}

InstanceSpec synthetic(const std::string& name, TopologyKind kind) {
  InstanceSpec s;
  s.name = name;
  s.kind = kind;
  s.cap_range = {5.0, 10.0};
  s.generator.capacity_range = s.cap_range;
  s.num_sources = 10;
  s.num_learners = 5;
  s.num_types = 3;
  return s;
}

Range json_range(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("ranges are two-element arrays");
  return {j[0].get<double>(), j[1].get<double>()};
}

Range draw_class_range(Stream& rng, double probability, Range lo, Range hi, bool& is_hi) {
  is_hi = uniform01(rng) < probability;
  return is_hi ? hi : lo;
}

double draw(Stream& rng, Range r) { return r.first == r.second ? r.first : uniform(rng, r.first, r.second); }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

using CellKey = std::tuple<std::string, std::string, double, std::uint64_t>;

CellKey key_of(const ExperimentRow& r) { return {r.solver, r.sweep_var, r.sweep_value, r.seed}; }

}  // namespace

InstanceSpec sec6_row(std::string_view name) {
  const std::string n(name);
  if (n == "er") {
    auto s = synthetic(n, TopologyKind::kErdosRenyi);
    s.generator.nodes = 100;
    s.generator.undirected_edges = 521;
    return s;
  }
  if (n == "bt") {
    auto s = synthetic(n, TopologyKind::kBalancedTree);
    s.generator.branching = 4;
    s.generator.depth = 4;
    return s;
  }
  if (n == "hc") {
    auto s = synthetic(n, TopologyKind::kHypercube);
    s.generator.dimension = 7;
    return s;
  }
  if (n == "star") {
    auto s = synthetic(n, TopologyKind::kStar);
    s.generator.nodes = 100;
    return s;
  }
  if (n == "grid") {
    auto s = synthetic(n, TopologyKind::kGrid);
    s.generator.rows = s.generator.cols = 10;
    return s;
  }
  if (n == "sw") {
    auto s = synthetic(n, TopologyKind::kSmallWorld);
    s.generator.nodes = 100;
    return s;
  }
  if (n == "geant") return backbone(n, 22);
  if (n == "abilene") return backbone(n, 9);
  if (n == "dtelekom") return backbone(n, 68);
  throw std::invalid_argument("unknown topology row '" + n + "'");
}

InstanceSpec desk_row(std::string_view name) {
  InstanceSpec s = sec6_row(name);
  s.dimension = 10;
  s.num_sources = 3;
  s.num_learners = 3;
  s.num_types = 2;
  const std::string n(name);
  if (n == "er") {
    s.generator.nodes = 20;
    s.generator.undirected_edges = 40;
  } else if (n == "bt") {
    s.generator.branching = 2;
    s.generator.depth = 3;
  } else if (n == "hc") {
    s.generator.dimension = 4;
  } else if (n == "star") {
    s.generator.nodes = 20;
  } else if (n == "grid") {
    s.generator.rows = s.generator.cols = 5;
  } else if (n == "sw") {
    s.generator.nodes = 25;
  } else if (n == "dtelekom") {
    throw std::invalid_argument("dtelekom exceeds the desk-scale node budget");
  }
  s.name = "desk-" + n;
  return s;
}

std::vector<std::string> row_names() { return {"er", "bt", "hc", "star", "grid", "sw", "geant", "abilene", "dtelekom"}; }

Instance build_sec6_instance(const InstanceSpec& spec, std::uint64_t seed) {
  if (spec.dimension < 1) throw std::invalid_argument("dimension must be positive");
  const std::uint64_t topo_seed = spec.topology_seed.value_or(seed);
  Graph graph;
  if (spec.kind == TopologyKind::kFile) {
    graph = load_edge_list_file(spec.edge_file);
    assign_capacities(graph, spec.cap_range, topo_seed);
  } else {
    GeneratorParams gen = spec.generator;
    gen.capacity_range = spec.cap_range;
    graph = generate(spec.kind, gen, topo_seed);
  }
  auto [placement, paths] = place_and_route(graph, spec.num_sources, spec.num_learners, spec.num_types, seed);

  const int S = spec.num_sources, L = spec.num_learners, T = spec.num_types, d = spec.dimension;
  ProblemConfig cfg;
  cfg.dimension = d;
  cfg.horizon = spec.horizon;
  for (int g = 0; g < S * T; ++g) {
    Stream rate_rng = make_stream(seed, StreamTag::kStatistics, {0, std::uint64_t(g)});
    cfg.source_rate.push_back(draw(rate_rng, spec.rate_range));
    Stream noise_rng = make_stream(seed, StreamTag::kStatistics, {1, std::uint64_t(g)});
    cfg.noise_var.push_back(draw(noise_rng, spec.noise_range));
  }
  for (int s = 0; s < S; ++s) {
    Stream rng = make_stream(seed, StreamTag::kStatistics, {2, std::uint64_t(s)});
    Eigen::VectorXd cov(d);
    for (int i = 0; i < d; ++i) {
      bool poor = false;
      const Range r = draw_class_range(rng, spec.class_probability, spec.wellknown_var_range, spec.poorknown_var_range, poor);
      cov(i) = draw(rng, r);
    }
    cfg.source_cov.push_back(cov);
  }
  for (int l = 0; l < L; ++l) {
    Stream rng = make_stream(seed, StreamTag::kStatistics, {3, std::uint64_t(l)});
    Eigen::VectorXd cov(d), mean(d);
    for (int i = 0; i < d; ++i) {
      bool indifferent = false;
      const Range r = draw_class_range(rng, spec.class_probability, spec.prior_lo_range, spec.prior_hi_range, indifferent);
      cov(i) = draw(rng, r);
      mean(i) = indifferent ? 0.0 : 1.0;
    }
    cfg.prior_cov.push_back(cov);
    cfg.prior_mean.push_back(mean);
  }
  return build_instance(std::move(graph), std::move(placement), std::move(paths), std::move(cfg));
}

SweepVar parse_sweep_var(std::string_view name) {
  if (name.empty() || name == "none") return SweepVar::kNone;
  if (name == "stepsize") return SweepVar::kStepsize;
  if (name == "source_rate") return SweepVar::kSourceRate;
  if (name == "num_sources") return SweepVar::kNumSources;
  if (name == "num_learners") return SweepVar::kNumLearners;
  throw std::invalid_argument("unknown sweep variable '" + std::string(name) + "'");
}

std::string to_string(SweepVar var) {
  switch (var) {
    case SweepVar::kNone: return "none";
    case SweepVar::kStepsize: return "stepsize";
    case SweepVar::kSourceRate: return "source_rate";
    case SweepVar::kNumSources: return "num_sources";
    case SweepVar::kNumLearners: return "num_learners";
  }
  return "none";
}

void apply_sweep(SweepVar var, double value, InstanceSpec& instance, SolverSettings& solver) {
  switch (var) {
    case SweepVar::kNone: break;
    case SweepVar::kStepsize: solver.steps = {value, value, value, value}; break;
    case SweepVar::kSourceRate: instance.rate_range = {value, value}; break;
    case SweepVar::kNumSources: instance.num_sources = static_cast<int>(std::lround(value)); break;
    case SweepVar::kNumLearners: instance.num_learners = static_cast<int>(std::lround(value)); break;
  }
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
  const Json j = Json::parse(json_text);
  ExperimentSpec spec;
  const Json topo = j.value("topology", Json::object());
  const std::string profile = j.value("profile", std::string("full"));
  if (profile != "full" && profile != "desk") throw std::invalid_argument("profile must be 'full' or 'desk'");
  const std::string kind = topo.value("kind", std::string("geant"));
  const auto rows = row_names();
  if (std::find(rows.begin(), rows.end(), kind) != rows.end()) {
    spec.instance = profile == "desk" ? desk_row(kind) : sec6_row(kind);
  } else if (kind == "file") {
    spec.instance = sec6_row("geant");
    spec.instance.name = "file";
    spec.instance.edge_file = topo.at("file").get<std::string>();
  } else {
    throw std::invalid_argument("unknown topology kind '" + kind + "'");
  }
  auto& inst = spec.instance;
  if (topo.contains("size")) {
    const int size = topo["size"].get<int>();
    switch (inst.kind) {
      case TopologyKind::kBalancedTree: inst.generator.depth = size; break;
      case TopologyKind::kHypercube: inst.generator.dimension = size; break;
      case TopologyKind::kGrid: inst.generator.rows = inst.generator.cols = size; break;
      case TopologyKind::kErdosRenyi:
        inst.generator.nodes = size;
        inst.generator.undirected_edges = topo.value("edges", -1);
        break;
      default: inst.generator.nodes = size; break;
    }
  }
  if (topo.contains("file")) inst.edge_file = topo["file"].get<std::string>();
  if (topo.contains("seed")) inst.topology_seed = topo["seed"].get<std::uint64_t>();

  const Json place = j.value("placement", Json::object());
  inst.num_sources = place.value("num_sources", inst.num_sources);
  inst.num_learners = place.value("num_learners", inst.num_learners);
  inst.num_types = place.value("num_types", inst.num_types);

  const Json stats = j.value("stats", Json::object());
  inst.dimension = stats.value("d", inst.dimension);
  inst.horizon = stats.value("T", inst.horizon);
  if (stats.contains("rate_range")) inst.rate_range = json_range(stats["rate_range"]);
  if (stats.contains("cap_range")) inst.cap_range = json_range(stats["cap_range"]);
  if (stats.contains("noise_range")) inst.noise_range = json_range(stats["noise_range"]);
  if (stats.contains("wellknown_var_range")) inst.wellknown_var_range = json_range(stats["wellknown_var_range"]);
  if (stats.contains("poorknown_var_range")) inst.poorknown_var_range = json_range(stats["poorknown_var_range"]);
  if (stats.contains("prior_lo_range")) inst.prior_lo_range = json_range(stats["prior_lo_range"]);
  if (stats.contains("prior_hi_range")) inst.prior_hi_range = json_range(stats["prior_hi_range"]);
  inst.class_probability = stats.value("class_probability", inst.class_probability);

  const Json solver = j.value("solver", Json::object());
  if (solver.contains("names")) spec.solvers = solver["names"].get<std::vector<std::string>>();
  auto& ss = spec.solver;
  ss.iterations = solver.value("K", ss.iterations);
  ss.n1 = solver.value("N1", ss.n1);
  ss.n2 = solver.value("N2", ss.n2);
  ss.theta = solver.value("theta", ss.theta);
  ss.rounds = solver.value("rounds", ss.rounds);
  ss.pga_step = solver.value("pga_step", ss.pga_step);
  if (solver.contains("stepsize")) {
    const double v = solver["stepsize"].get<double>();
    ss.steps = {v, v, v, v};
  }
  ss.steps.m = solver.value("m", ss.steps.m);
  ss.steps.k = solver.value("k", ss.steps.k);
  ss.steps.h = solver.value("h", ss.steps.h);
  ss.steps.w = solver.value("w", ss.steps.w);

  const Json metrics = j.value("metrics", Json::object());
  auto& ms = spec.metrics;
  ms.utility_n1 = metrics.value("N1", ms.utility_n1);
  ms.utility_n2 = metrics.value("N2", ms.utility_n2);
  ms.error_reps_data = metrics.value("reps_data", ms.error_reps_data);
  ms.error_reps_model = metrics.value("reps_model", ms.error_reps_model);
  ms.estimation_error = metrics.value("estimation_error", ms.estimation_error);
  if (profile == "desk" && !metrics.contains("reps_data")) {
    ms.error_reps_data = 250;
    ms.error_reps_model = 2;
  }

  const Json sweep = j.value("sweep", Json::object());
  spec.sweep = parse_sweep_var(sweep.value("var", std::string("none")));
  if (sweep.contains("values")) spec.sweep_values = sweep["values"].get<std::vector<double>>();
  if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (spec.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (spec.sweep_values.empty()) throw std::invalid_argument("at least one sweep value is required");
  for (std::size_t i = 1; i < spec.sweep_values.size(); ++i)
    if (!(spec.sweep_values[i] > spec.sweep_values[i - 1]))
      throw std::invalid_argument("sweep values must be strictly increasing");
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_spec(buf.str());
}

SolverOutcome run_solver(const Instance& inst, const std::string& solver, const SolverSettings& settings,
                         std::uint64_t seed, std::ostream* trace) {
  OuterOptions outer;
  outer.iterations = settings.iterations;
  outer.estimator.n1 = settings.n1;
  outer.estimator.n2 = settings.n2;
  outer.estimator.seed = seed;
  outer.step_size = settings.pga_step;
  PdOptions pd;
  pd.theta = settings.theta;
  pd.rounds = settings.rounds;
  pd.steps = settings.steps;
  const DistributedOptions dist{outer, pd, true};

  SolverOutcome out;
  if (solver == "fw") {
    out.rates = fw_solve(inst, outer).rates;
  } else if (solver == "pga") {
    out.rates = pga_solve(inst, outer).rates;
  } else if (solver == "maxtp") {
    out.rates = maxtp_solve(inst);
  } else if (solver == "maxfair") {
    out.rates = maxfair_solve(inst);
  } else if (solver == "dfw" || solver == "dpga" || solver == "dmaxtp" || solver == "dmaxfair") {
    DistributedResult res;
    if (solver == "dfw") res = dfw_solve(inst, dist, trace);
    if (solver == "dpga") res = dpga_solve(inst, dist, trace);
    if (solver == "dmaxtp") res = dmax_solve(inst, MaxObjective::kThroughput, pd, trace);
    if (solver == "dmaxfair") res = dmax_solve(inst, MaxObjective::kFair, pd, trace);
    if (!res.report.clean()) throw std::runtime_error(solver + ": locality audit recorded non-adjacent reads");
    out.rates = res.rates;
    out.report = res.report;
  } else {
    throw std::invalid_argument("unknown solver '" + solver + "'");
  }
  return out;
}

bool ExperimentRow::operator==(const ExperimentRow& o) const {
  return solver == o.solver && sweep_var == o.sweep_var && same(sweep_value, o.sweep_value) && seed == o.seed &&
         same(utility, o.utility) && same(utility_stderr, o.utility_stderr) && same(infeasibility, o.infeasibility) &&
         same(est_error, o.est_error) && same(runtime_s, o.runtime_s);
}

std::string csv_header() {
  return "solver,sweep_var,sweep_value,seed,utility,utility_stderr,infeasibility,est_error,runtime_s";
}

std::string to_csv_line(const ExperimentRow& r) {
  if (r.solver.find_first_of(",\n") != std::string::npos || r.sweep_var.find_first_of(",\n") != std::string::npos)
    throw std::invalid_argument("CSV fields must not contain commas or newlines");
  return r.solver + ',' + r.sweep_var + ',' + format_double(r.sweep_value) + ',' + std::to_string(r.seed) + ',' +
         format_double(r.utility) + ',' + format_double(r.utility_stderr) + ',' + format_double(r.infeasibility) +
         ',' + format_double(r.est_error) + ',' + format_double(r.runtime_s);
}

std::string emit_csv(const std::vector<ExperimentRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += to_csv_line(r) + "\n";
  return out;
}

std::vector<ExperimentRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw std::invalid_argument("CSV header mismatch");
  std::vector<ExperimentRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": expected 9 fields");
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0')
        throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": bad number '" + s + "'");
      return v;
    };
    ExperimentRow r;
    r.solver = f[0];
    r.sweep_var = f[1];
    r.sweep_value = num(f[2]);
    r.seed = std::stoull(f[3]);
    r.utility = num(f[4]);
    r.utility_stderr = num(f[5]);
    r.infeasibility = num(f[6]);
    r.est_error = num(f[7]);
    r.runtime_s = num(f[8]);
    rows.push_back(r);
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& csv_path, std::ostream* log,
                                std::ostream* trace) {
  ExperimentResult result;
  std::map<CellKey, ExperimentRow> done;
  if (!csv_path.empty()) {
    std::ifstream existing(csv_path);
    if (existing) {
      std::stringstream buf;
      buf << existing.rdbuf();
      if (!buf.str().empty())
        for (const auto& r : parse_csv(buf.str())) done.emplace(key_of(r), r);
    }
  }
  std::ofstream out;
  if (!csv_path.empty()) {
    const bool fresh = done.empty();
    out.open(csv_path, fresh ? std::ios::trunc : std::ios::app);
    if (!out) throw std::runtime_error("cannot write '" + csv_path + "'");
    if (fresh) out << csv_header() << '\n' << std::flush;
  }

  const std::string var = to_string(spec.sweep);
  for (double value : spec.sweep_values) {
    for (std::uint64_t seed : spec.seeds) {
      InstanceSpec ispec = spec.instance;
      SolverSettings settings = spec.solver;
      apply_sweep(spec.sweep, value, ispec, settings);
      std::optional<Instance> inst;
      std::string build_error;
      try {
        inst.emplace(build_sec6_instance(ispec, seed));
      } catch (const std::exception& e) {
        build_error = e.what();
      }
      const std::uint64_t metric_seed = stream_key(seed, StreamTag::kGroundTruth, {0xe7a1u});
      for (const auto& solver : spec.solvers) {
        ExperimentRow row{solver, var, value, seed, kNaN, kNaN, kNaN, kNaN, kNaN};
        if (auto it = done.find(key_of(row)); it != done.end()) {
          result.rows.push_back(it->second);
          continue;
        }
        const auto start = std::chrono::steady_clock::now();
        try {
          if (!inst) throw std::runtime_error("instance construction failed: " + build_error);
          const SolverOutcome outcome = run_solver(*inst, solver, settings, seed, trace);
          row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          const auto u = utility_mc(*inst, outcome.rates, spec.metrics.utility_n1, spec.metrics.utility_n2, metric_seed);
          row.utility = u.mean;
          row.utility_stderr = u.std_error;
          row.infeasibility = infeasibility(*inst, outcome.rates);
          if (spec.metrics.estimation_error)
            row.est_error = estimation_error(*inst, outcome.rates, spec.metrics.error_reps_data,
                                             spec.metrics.error_reps_model, metric_seed);
        } catch (const std::exception& e) {
          result.failures.push_back(solver + " " + var + "=" + format_double(value) + " seed=" +
                                    std::to_string(seed) + ": " + e.what());
          if (log) *log << "FAILED " << result.failures.back() << '\n';
        }
        if (log)
          *log << solver << ' ' << var << '=' << value << " seed=" << seed << " utility=" << row.utility
               << " infeasibility=" << row.infeasibility << " runtime=" << row.runtime_s << "s\n";
        if (out.is_open()) out << to_csv_line(row) << '\n' << std::flush;
        result.rows.push_back(row);
      }
    }
  }
  return result;
}

}  // namespace expnet
