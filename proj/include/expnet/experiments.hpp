#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "expnet/central.hpp"
#include "expnet/distributed.hpp"
#include "expnet/instance.hpp"
#include "expnet/topology.hpp"

namespace expnet {

using Range = std::pair<double, double>;

// Everything needed to build one seeded benchmark instance. Feature classes are drawn per (source, index) and prior classes
// per (learner, index), each class with class_probability.
struct InstanceSpec {
  std::string name = "custom";
  TopologyKind kind = TopologyKind::kErdosRenyi;
  GeneratorParams generator;
  std::string edge_file;                 // kind == kFile
  std::optional<std::uint64_t> topology_seed;  // fixed network across cells if set
  int num_sources = 3;
  int num_learners = 3;
  int num_types = 2;
  int dimension = 100;
  double horizon = 1.0;
  Range rate_range{5.0, 8.0};
  Range cap_range{5.0, 10.0};
  Range noise_range{0.5, 1.0};           // noise variances
  Range wellknown_var_range{0.0, 0.01};
  Range poorknown_var_range{10.0, 20.0};
  Range prior_lo_range{0.0, 0.01};       // interested features, prior mean 1
  Range prior_hi_range{1.0, 2.0};        // indifferent features, prior mean 0
  double class_probability = 0.5;
};

// Benchmark rows: er, bt, hc, star, grid, sw, geant, abilene,
// dtelekom. Backbone rows read data/<name>.edges.
InstanceSpec sec6_row(std::string_view name);
// Desk-scale variant: d = 10, at most 30 nodes, 3 sources, 3 learners, 2 types.
InstanceSpec desk_row(std::string_view name);
std::vector<std::string> row_names();

Instance build_sec6_instance(const InstanceSpec& spec, std::uint64_t seed);

struct SolverSettings {
  int iterations = 50;
  int n1 = 50;
  int n2 = 50;
  double theta = 10.0;
  int rounds = 1000;
  PdStepsizes steps;
  double pga_step = -1.0;  // <= 0 selects the default
};

struct MetricSettings {
  int utility_n1 = 100;
  int utility_n2 = 100;
  int error_reps_data = 2500;
  int error_reps_model = 20;
  bool estimation_error = true;
};

enum class SweepVar { kNone, kStepsize, kSourceRate, kNumSources, kNumLearners };
SweepVar parse_sweep_var(std::string_view name);
std::string to_string(SweepVar var);

struct ExperimentSpec {
  InstanceSpec instance;
  std::vector<std::string> solvers{"fw", "pga", "maxtp", "maxfair", "dfw", "dpga", "dmaxtp", "dmaxfair"};
  SweepVar sweep = SweepVar::kNone;
  std::vector<double> sweep_values{0.0};
  std::vector<std::uint64_t> seeds{1};
  SolverSettings solver;
  MetricSettings metrics;
};

// Parses the JSON configuration (see README for keys).
ExperimentSpec parse_experiment_spec(const std::string& json_text);
ExperimentSpec load_experiment_spec(const std::string& path);

// Applies one sweep value to a copy of the instance/solver settings.
void apply_sweep(SweepVar var, double value, InstanceSpec& instance, SolverSettings& solver);

struct SolverOutcome {
  RateVector rates;
  DistributedReport report;  // zero for centralised solvers
};

// Solver names: fw, pga, maxtp, maxfair, dfw, dpga, dmaxtp, dmaxfair.
SolverOutcome run_solver(const Instance& inst, const std::string& solver, const SolverSettings& settings,
                         std::uint64_t seed, std::ostream* trace = nullptr);

struct ExperimentRow {
  std::string solver;
  std::string sweep_var;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  double utility = 0.0;
  double utility_stderr = 0.0;
  double infeasibility = 0.0;
  double est_error = 0.0;
  double runtime_s = 0.0;

  bool operator==(const ExperimentRow& o) const;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::vector<std::string> failures;  // one message per failed cell
};

std::string csv_header();
std::string to_csv_line(const ExperimentRow& row);
std::string emit_csv(const std::vector<ExperimentRow>& rows);
std::vector<ExperimentRow> parse_csv(const std::string& text);

// Runs every solver x sweep value x seed cell. When csv_path names an
// existing file, cells already present there are kept and skipped; new rows
// are appended as they finish. A failing cell is reported in `failures`, its
// row carries NaN metrics, and the run continues.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& csv_path = "",
                                std::ostream* log = nullptr, std::ostream* trace = nullptr);

}  // namespace expnet
