#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "expnet/central.hpp"
#include "expnet/gradient.hpp"
#include "expnet/instance.hpp"

namespace expnet {

enum class EntityKind { kSource, kEdge, kLearner };

struct Entity {
  EntityKind kind = EntityKind::kSource;
  int id = 0;

  bool operator==(const Entity& o) const { return kind == o.kind && id == o.id; }
};

std::string to_string(const Entity& entity);

enum class Variable {
  kRate,          // lambda^p, data plane, source -> edges/learner
  kPrimal,        // v^p, data plane, source -> edges/learner
  kGradient,      // gradient coordinate, control, learner -> source
  kEdgeReport,    // (q_e, (v^e_{s,t})^{1/theta}, e^{g_e} or g_e), control, edge -> source
  kEdgeShare,     // mu^e / #families through e, control, edge -> source
  kEdgeCapacity,  // mu^e, control, edge -> source
  kLearnerMarginal,  // d f / d v^p computed at the learner, control, learner -> source
};

std::string to_string(Variable variable);

struct Message {
  Entity from;
  Entity to;
  int path = 0;
  Variable variable = Variable::kPrimal;
  std::array<double, 3> payload{};
};

// Records every cross-entity read. A read is local when the reader owns the
// datum or reads a message whose sender lies on the same path as the reader.
class LocalityAudit {
 public:
  explicit LocalityAudit(const Instance& inst);

  bool adjacent(const Entity& a, const Entity& b, int path) const;
  void record(const Entity& reader, const Message& message);
  void record_own(const Entity& reader) { ++reads_; (void)reader; }

  long reads() const { return reads_; }
  long violations() const { return static_cast<long>(violations_.size()); }
  const std::vector<std::string>& violation_log() const { return violations_; }
  bool clean() const { return violations_.empty(); }

 private:
  const Instance* inst_;
  std::vector<std::vector<char>> path_has_edge_;
  long reads_ = 0;
  std::vector<std::string> violations_;
};

// In-process message transport. Delivery is refused (std::logic_error) for
// sender/receiver pairs that do not share the message's path; reading a
// message goes through the audit.
class Router {
 public:
  Router(const Instance& inst, LocalityAudit& audit);

  void send(const Message& message);
  // Messages addressed to `to` since the last clear(), in send order.
  const std::vector<Message>& inbox(const Entity& to) const;
  // Audited read of a received message.
  const std::array<double, 3>& read(const Entity& reader, const Message& message);
  void clear();
  long sent() const { return sent_; }

 private:
  std::size_t slot(const Entity& e) const;

  const Instance* inst_;
  LocalityAudit* audit_;
  std::vector<std::vector<Message>> boxes_;
  long sent_ = 0;
};

// Optional per-round CSV with header "round,entity,variable,value".
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream* out);
  bool enabled() const { return out_ != nullptr; }
  void write(long round, const Entity& entity, const std::string& variable, double value);

 private:
  std::ostream* out_;
};

struct PdStepsizes {
  double m = 0.01;  // primal
  double k = 0.01;  // edge duals q
  double h = 0.01;  // source duals r
  double w = 0.01;  // non-negativity duals u
};

struct PdOptions {
  double theta = 10.0;
  int rounds = 1000;
  PdStepsizes steps;
  double init = 1e-6;  // v(0); positive so (v^p)^{theta-1} ratios are defined
};

// Primal and dual state of the inner problem, indexed by path, edge and
// (source, type) family.
struct PdState {
  Eigen::VectorXd v;
  Eigen::VectorXd q;
  Eigen::VectorXd r;
  Eigen::VectorXd u;

  static PdState initial(const Instance& inst, double init);
};

enum class DualForm {
  kExpPenalty,  // duals on e^{g} - 1 <= 0
  kStandard,    // duals on g <= 0
};

// Objective of the inner problem as seen by sources.
enum class InnerObjective {
  kLinear,     // <v, c>, c delivered to sources beforehand
  kProximal,   // -0.5 ||v - y||^2, y held by sources
  kFair,       // -sum_l 1 / sum_s v_s^l, marginals computed by learners each round
};

struct PdContext {
  Router* router = nullptr;
  LocalityAudit* audit = nullptr;
  TraceWriter* trace = nullptr;
  long round_offset = 0;
};

struct PdProblem {
  DualForm duals = DualForm::kExpPenalty;
  InnerObjective objective = InnerObjective::kLinear;
  Eigen::VectorXd coefficients;  // c for kLinear, y for kProximal, unused for kFair
  double fair_floor = 1e-6;
  // Optional per-path box [0, upper] that sources project v onto after each
  // primal step (standard duals only). Empty for none.
  Eigen::VectorXd upper;
};

// Runs options.rounds synchronous rounds of the primal-dual dynamics, each
// with the schedule: data-plane v propagation, edge aggregates, control
// collection, edge dual update, source updates. Throws std::overflow_error if
// an exponent leaves the representable range.
void pd_run(const Instance& inst, const PdProblem& problem, const PdOptions& options, PdState& state,
            PdContext& ctx);

struct DistributedReport {
  long reads = 0;
  long violations = 0;
  long messages = 0;
  bool clean() const { return violations == 0; }
};

// Distributed direction finding: the gradient is delivered to
// sources, then the exp-penalty dynamics run from v = init. Returns v.
Eigen::VectorXd pd_inner(const Instance& inst, const Eigen::VectorXd& gradient, const PdOptions& options,
                         DistributedReport* report = nullptr, std::ostream* trace = nullptr);

struct DistributedOptions {
  OuterOptions outer;
  PdOptions pd;
  bool warm_start_duals = true;
};

struct DistributedResult {
  RateVector rates;
  SolverTrace trace;
  DistributedReport report;
};

// Distributed Frank-Wolfe: learners estimate their gradient coordinates from
// their incoming rates, the inner primal-dual finds v, and each source applies
// lambda^p += gamma max(v^p, 0).
DistributedResult dfw_solve(const Instance& inst, const DistributedOptions& options,
                            std::ostream* trace = nullptr);

// Distributed PGA: the projection of lambda + gamma g onto the relaxed set is
// computed by standard primal-dual dynamics warm-started at lambda(k).
DistributedResult dpga_solve(const Instance& inst, const DistributedOptions& options,
                             std::ostream* trace = nullptr);

enum class MaxObjective { kThroughput, kFair };

// Distributed baselines: throughput on the exp-penalty engine, alpha = 2
// fairness on the standard engine started from the local fair share.
DistributedResult dmax_solve(const Instance& inst, MaxObjective objective, const PdOptions& options,
                             std::ostream* trace = nullptr);

}  // namespace expnet
