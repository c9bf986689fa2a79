#include "expnet/distributed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace expnet {

namespace {

constexpr double kMaxExponent = 700.0;

double checked_exp(double x) {
  if (!(x <= kMaxExponent)) throw std::overflow_error("primal-dual: exponent overflow (stepsize too large?)");
  return std::exp(x);
}

Entity source_of(const Instance& inst, int p) { return {EntityKind::kSource, inst.path(p).source}; }
Entity learner_of(const Instance& inst, int p) { return {EntityKind::kLearner, inst.path(p).learner}; }
Entity edge_entity(EdgeId e) { return {EntityKind::kEdge, e}; }

// sign(v) (|v| / norm)^{theta-1}, the derivative of a theta-norm term with
// respect to one member; bounded by 1 because norm >= |v|.
double norm_ratio(double v, double norm, double theta) {
  if (norm <= 0.0 || v == 0.0) return 0.0;
  const double ratio = std::pow(std::min(1.0, std::abs(v) / norm), theta - 1.0);
  return v > 0.0 ? ratio : -ratio;
}

// Slot of family `group` in the edge's family list.
int family_slot(const Instance& inst, EdgeId e, int group) {
  const auto& groups = inst.edge_groups(e);
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].group == group) return static_cast<int>(i);
  throw std::logic_error("path family does not traverse this edge");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string to_string(const Entity& entity) {
  switch (entity.kind) {
    case EntityKind::kSource: return "source:" + std::to_string(entity.id);
    case EntityKind::kEdge: return "edge:" + std::to_string(entity.id);
    case EntityKind::kLearner: return "learner:" + std::to_string(entity.id);
  }
  return "unknown";
}

std::string to_string(Variable variable) {
  switch (variable) {
    case Variable::kRate: return "rate";
    case Variable::kPrimal: return "v";
    case Variable::kGradient: return "gradient";
    case Variable::kEdgeReport: return "edge_report";
    case Variable::kEdgeShare: return "edge_share";
    case Variable::kEdgeCapacity: return "edge_capacity";
    case Variable::kLearnerMarginal: return "learner_marginal";
  }
  return "unknown";
}

LocalityAudit::LocalityAudit(const Instance& inst) : inst_(&inst) {
  path_has_edge_.assign(inst.total_paths(), std::vector<char>(inst.num_edges(), 0));
  for (int p = 0; p < inst.total_paths(); ++p)
    for (EdgeId e : inst.path(p).edges) path_has_edge_[p][e] = 1;
}

bool LocalityAudit::adjacent(const Entity& a, const Entity& b, int path) const {
  if (path < 0 || path >= inst_->total_paths()) return false;
  const Path& p = inst_->path(path);
  auto on_path = [&](const Entity& x) {
    switch (x.kind) {
      case EntityKind::kSource: return x.id == p.source;
      case EntityKind::kLearner: return x.id == p.learner;
      case EntityKind::kEdge: return x.id >= 0 && x.id < inst_->num_edges() && path_has_edge_[path][x.id] != 0;
    }
    return false;
  };
  return on_path(a) && on_path(b);
}

void LocalityAudit::record(const Entity& reader, const Message& message) {
  ++reads_;
  if (!(message.to == reader) || !adjacent(message.from, reader, message.path))
    violations_.push_back(to_string(reader) + " read " + to_string(message.variable) + " from " +
                          to_string(message.from) + " via path " + std::to_string(message.path));
}

Router::Router(const Instance& inst, LocalityAudit& audit)
    : inst_(&inst),
      audit_(&audit),
      boxes_(inst.num_sources() + inst.num_edges() + inst.num_learners()) {}

std::size_t Router::slot(const Entity& e) const {
  switch (e.kind) {
    case EntityKind::kSource: return e.id;
    case EntityKind::kEdge: return inst_->num_sources() + e.id;
    case EntityKind::kLearner: return inst_->num_sources() + inst_->num_edges() + e.id;
  }
  throw std::logic_error("unknown entity kind");
}

void Router::send(const Message& message) {
  if (!audit_->adjacent(message.from, message.to, message.path))
    throw std::logic_error("router: " + to_string(message.from) + " and " + to_string(message.to) +
                           " are not on path " + std::to_string(message.path));
  boxes_[slot(message.to)].push_back(message);
  ++sent_;
}

const std::vector<Message>& Router::inbox(const Entity& to) const { return boxes_[slot(to)]; }

const std::array<double, 3>& Router::read(const Entity& reader, const Message& message) {
  audit_->record(reader, message);
  return message.payload;
}

void Router::clear() {
  for (auto& box : boxes_) box.clear();
}

TraceWriter::TraceWriter(std::ostream* out) : out_(out) {
  if (out_) *out_ << "round,entity,variable,value\n";
}

void TraceWriter::write(long round, const Entity& entity, const std::string& variable, double value) {
  if (!out_) return;
  *out_ << round << ',' << to_string(entity) << ',' << variable << ',' << value << '\n';
}

PdState PdState::initial(const Instance& inst, double init) {
  PdState st;
  st.v = Eigen::VectorXd::Constant(inst.total_paths(), init);
  st.q = Eigen::VectorXd::Zero(inst.num_edges());
  st.r = Eigen::VectorXd::Zero(inst.num_groups());
  st.u = Eigen::VectorXd::Zero(inst.total_paths());
  return st;
}

void pd_run(const Instance& inst, const PdProblem& problem, const PdOptions& options, PdState& state,
            PdContext& ctx) {
  const int P = inst.total_paths(), E = inst.num_edges(), G = inst.num_groups();
  const int S = inst.num_sources(), L = inst.num_learners();
  const double theta = options.theta;
  const bool exp_form = problem.duals == DualForm::kExpPenalty;
  if (!(theta >= 1.0)) throw std::invalid_argument("theta must be >= 1");
  if (state.v.size() != P || state.q.size() != E || state.r.size() != G || state.u.size() != P)
    throw std::invalid_argument("primal-dual state has wrong dimensions");
  if (problem.objective != InnerObjective::kFair && problem.coefficients.size() != P)
    throw std::invalid_argument("objective coefficients have wrong dimension");
  const bool boxed = problem.upper.size() > 0;
  if (boxed && (exp_form || problem.upper.size() != P))
    throw std::invalid_argument("primal box requires standard duals and one bound per path");
  Router& router = *ctx.router;

  std::vector<std::vector<std::vector<double>>> members(E);
  for (EdgeId e = 0; e < E; ++e) members[e].resize(inst.edge_groups(e).size());
  std::vector<double> edge_term(E, 0.0);
  std::vector<std::vector<double>> family_norm(E);
  Eigen::VectorXd edge_penalty(P), marginal(P), v_new(P), u_new(P), r_new(G);
  std::vector<double> buf;

  for (int tau = 0; tau < options.rounds; ++tau) {
    router.clear();

    // 1. Data plane: every source pushes v^p along its path.
    for (int p = 0; p < P; ++p) {
      Message msg{source_of(inst, p), {}, p, Variable::kPrimal, {state.v(p), 0.0, 0.0}};
      for (EdgeId e : inst.path(p).edges) {
        msg.to = edge_entity(e);
        router.send(msg);
      }
      if (problem.objective == InnerObjective::kFair) {
        msg.to = learner_of(inst, p);
        router.send(msg);
      }
    }

    // 2. Edges aggregate v^e_{s,t} = sum (v^p)^theta per family.
    for (EdgeId e = 0; e < E; ++e) {
      const Entity me = edge_entity(e);
      for (auto& m : members[e]) m.clear();
      for (const Message& msg : router.inbox(me)) {
        const double v = router.read(me, msg)[0];
        members[e][family_slot(inst, e, inst.path_group(msg.path))].push_back(v);
      }
      family_norm[e].assign(members[e].size(), 0.0);
      double total = 0.0;
      for (std::size_t i = 0; i < members[e].size(); ++i) {
        family_norm[e][i] = theta_norm(members[e][i], theta);
        total += family_norm[e][i];
      }
      const double g = total - inst.capacity(e);
      edge_term[e] = exp_form ? checked_exp(g) : g;
    }

    // 3. Control messages back to sources: q_e(tau), the family norm and the
    //    constraint term; learners report their marginal utility if needed.
    for (EdgeId e = 0; e < E; ++e) {
      const Entity me = edge_entity(e);
      for (const Message& msg : router.inbox(me)) {
        const int slot = family_slot(inst, e, inst.path_group(msg.path));
        router.send({me, source_of(inst, msg.path), msg.path, Variable::kEdgeReport,
                     {state.q(e), family_norm[e][slot], edge_term[e]}});
      }
    }
    if (problem.objective == InnerObjective::kFair) {
      for (int l = 0; l < L; ++l) {
        const Entity me{EntityKind::kLearner, l};
        double total = 0.0;
        for (const Message& msg : router.inbox(me)) total += router.read(me, msg)[0];
        total = std::max(total, problem.fair_floor * S);
        const double grad = 1.0 / (total * total);
        for (const Message& msg : router.inbox(me))
          router.send({me, source_of(inst, msg.path), msg.path, Variable::kLearnerMarginal, {grad, 0.0, 0.0}});
      }
    }

    // 4. Edge duals.
    for (EdgeId e = 0; e < E; ++e) {
      if (inst.edge_groups(e).empty()) continue;
      const double step = exp_form ? edge_term[e] - 1.0 : edge_term[e];
      state.q(e) = std::max(0.0, state.q(e) + options.steps.k * step);
    }

    // 5. Sources: r, u and v from tau-values.
    edge_penalty.setZero();
    marginal.setZero();
    for (int s = 0; s < S; ++s) {
      const Entity me{EntityKind::kSource, s};
      for (const Message& msg : router.inbox(me)) {
        const auto& val = router.read(me, msg);
        if (msg.variable == Variable::kEdgeReport) {
          const double weight = exp_form ? val[2] : 1.0;
          edge_penalty(msg.path) += val[0] * weight * norm_ratio(state.v(msg.path), val[1], theta);
        } else if (msg.variable == Variable::kLearnerMarginal) {
          marginal(msg.path) = val[0];
        }
      }
    }
    for (int g = 0; g < G; ++g) {
      const auto& paths = inst.group_paths(g);
      if (paths.empty()) {
        r_new(g) = state.r(g);
        continue;
      }
      buf.clear();
      for (int p : paths) buf.push_back(state.v(p));
      const double norm = theta_norm(buf, theta);
      const double gap = norm - inst.group_rate(g);
      const double term = exp_form ? checked_exp(gap) : gap;
      r_new(g) = std::max(0.0, state.r(g) + options.steps.h * (exp_form ? term - 1.0 : term));
      const double weight = exp_form ? term : 1.0;
      for (int p : paths) {
        const double v = state.v(p);
        double grad = 0.0;
        switch (problem.objective) {
          case InnerObjective::kLinear: grad = problem.coefficients(p); break;
          case InnerObjective::kProximal: grad = problem.coefficients(p) - v; break;
          case InnerObjective::kFair: grad = marginal(p); break;
        }
        const double barrier = exp_form ? checked_exp(-v) : 1.0;
        v_new(p) = v + options.steps.m * (grad - edge_penalty(p) - state.r(g) * weight * norm_ratio(v, norm, theta) +
                                          state.u(p) * barrier);
        if (boxed) v_new(p) = std::clamp(v_new(p), 0.0, problem.upper(p));
        const double u_step = exp_form ? barrier - 1.0 : -v;
        u_new(p) = std::max(0.0, state.u(p) + options.steps.w * u_step);
      }
    }
    state.v = v_new;
    state.u = u_new;
    state.r = r_new;
    if (!state.v.allFinite()) throw std::overflow_error("primal-dual: primal iterate is not finite");

    if (ctx.trace && ctx.trace->enabled()) {
      const long round = ctx.round_offset + tau;
      for (EdgeId e = 0; e < E; ++e)
        if (!inst.edge_groups(e).empty()) ctx.trace->write(round, edge_entity(e), "q", state.q(e));
      for (int g = 0; g < G; ++g)
        ctx.trace->write(round, {EntityKind::kSource, g / inst.num_types()}, "r[t" +
                         std::to_string(g % inst.num_types()) + "]", state.r(g));
      for (int p = 0; p < P; ++p) {
        ctx.trace->write(round, source_of(inst, p), "v[p" + std::to_string(p) + "]", state.v(p));
        ctx.trace->write(round, source_of(inst, p), "u[p" + std::to_string(p) + "]", state.u(p));
      }
    }
  }
  ctx.round_offset += options.rounds;
}

namespace {

// Shared state of one distributed run.
struct Network {
  explicit Network(const Instance& inst, std::ostream* trace_out)
      : audit(inst), router(inst, audit), trace(trace_out) {
    ctx.router = &router;
    ctx.audit = &audit;
    ctx.trace = &trace;
  }

  DistributedReport report() const { return {audit.reads(), audit.violations(), router.sent()}; }

  LocalityAudit audit;
  Router router;
  TraceWriter trace;
  PdContext ctx;
};

// Sources announce lambda^p downstream; each learner estimates the gradient
// coordinates of its incoming paths from that view alone and sends them back
// upstream. Returns the coordinates as stored by the sources.
Eigen::VectorXd deliver_gradient(const Instance& inst, Network& net, const RateVector& rates,
                                 const EstimatorParams& params) {
  const int P = inst.total_paths(), L = inst.num_learners(), S = inst.num_sources();
  net.router.clear();
  for (int p = 0; p < P; ++p)
    net.router.send({source_of(inst, p), learner_of(inst, p), p, Variable::kRate, {rates(p), 0.0, 0.0}});
  for (int l = 0; l < L; ++l) {
    const Entity me{EntityKind::kLearner, l};
    Eigen::VectorXd incoming = Eigen::VectorXd::Zero(S);
    std::vector<int> path_of(S, -1);
    for (const Message& msg : net.router.inbox(me)) {
      const int s = inst.path(msg.path).source;
      incoming(s) = net.router.read(me, msg)[0];
      path_of[s] = msg.path;
    }
    const auto lg = learner_gradient(inst, l, incoming, params, learner_truncation_level(inst, incoming));
    for (int s = 0; s < S; ++s)
      if (path_of[s] >= 0)
        net.router.send({me, source_of(inst, path_of[s]), path_of[s], Variable::kGradient, {lg.g(s), 0.0, 0.0}});
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(P);
  for (int s = 0; s < S; ++s) {
    const Entity me{EntityKind::kSource, s};
    for (const Message& msg : net.router.inbox(me))
      if (msg.variable == Variable::kGradient) grad(msg.path) = net.router.read(me, msg)[0];
  }
  return grad;
}

// Every path rate is bounded by its family's source rate and by the capacity
// of each edge it crosses. Edges report their capacity upstream; sources take
// the minimum.
Eigen::VectorXd local_upper_bounds(const Instance& inst, Network& net) {
  net.router.clear();
  for (int p = 0; p < inst.total_paths(); ++p)
    for (EdgeId e : inst.path(p).edges)
      net.router.send({edge_entity(e), source_of(inst, p), p, Variable::kEdgeCapacity, {inst.capacity(e), 0.0, 0.0}});
  Eigen::VectorXd upper(inst.total_paths());
  for (int p = 0; p < inst.total_paths(); ++p) upper(p) = inst.group_rate(inst.path_group(p));
  for (int s = 0; s < inst.num_sources(); ++s) {
    const Entity me{EntityKind::kSource, s};
    for (const Message& msg : net.router.inbox(me))
      upper(msg.path) = std::min(upper(msg.path), net.router.read(me, msg)[0]);
  }
  return upper;
}

}  // namespace

Eigen::VectorXd pd_inner(const Instance& inst, const Eigen::VectorXd& gradient, const PdOptions& options,
                         DistributedReport* report, std::ostream* trace) {
  if (gradient.size() != inst.total_paths()) throw std::invalid_argument("gradient has wrong dimension");
  Network net(inst, trace);
  // Learners hand their coordinates to the sources.
  for (int p = 0; p < inst.total_paths(); ++p)
    net.router.send({learner_of(inst, p), source_of(inst, p), p, Variable::kGradient, {gradient(p), 0.0, 0.0}});
  Eigen::VectorXd c = Eigen::VectorXd::Zero(inst.total_paths());
  for (int s = 0; s < inst.num_sources(); ++s) {
    const Entity me{EntityKind::kSource, s};
    for (const Message& msg : net.router.inbox(me)) c(msg.path) = net.router.read(me, msg)[0];
  }
  PdState state = PdState::initial(inst, options.init);
  PdProblem problem{DualForm::kExpPenalty, InnerObjective::kLinear, c, 0.0, {}};
  pd_run(inst, problem, options, state, net.ctx);
  if (report) *report = net.report();
  return state.v;
}

DistributedResult dfw_solve(const Instance& inst, const DistributedOptions& options, std::ostream* trace) {
  const int K = options.outer.iterations;
  if (K < 1) throw std::invalid_argument("K must be positive");
  Network net(inst, trace);
  DistributedResult res;
  res.rates = RateVector::Zero(inst.total_paths());
  PdState state = PdState::initial(inst, options.pd.init);
  const double delta = 1.0 / K;
  double eta = 0.0;
  for (int k = 0; k < K && eta < 1.0; ++k) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXd grad = deliver_gradient(inst, net, res.rates, iteration_estimator(options.outer.estimator, k));
    if (options.warm_start_duals)
      state.v.setConstant(options.pd.init);
    else
      state = PdState::initial(inst, options.pd.init);
    PdProblem problem{DualForm::kExpPenalty, InnerObjective::kLinear, grad, 0.0, {}};
    pd_run(inst, problem, options.pd, state, net.ctx);
    const double gamma = k + 1 == K ? 1.0 - eta : std::min(delta, 1.0 - eta);
    const Eigen::VectorXd v = state.v.cwiseMax(0.0);
    res.rates += gamma * v;
    eta += gamma;
    res.trace.iterations.push_back({k, gamma, res.rates, v, grad.norm(), seconds_since(start)});
  }
  res.trace.eta = eta;
  res.report = net.report();
  return res;
}

DistributedResult dpga_solve(const Instance& inst, const DistributedOptions& options, std::ostream* trace) {
  const int K = options.outer.iterations;
  if (K < 1) throw std::invalid_argument("K must be positive");
  const double gamma = options.outer.step_size > 0.0 ? options.outer.step_size : default_pga_step(inst);
  Network net(inst, trace);
  DistributedResult res;
  res.rates = RateVector::Zero(inst.total_paths());
  PdState state = PdState::initial(inst, options.pd.init);
  const Eigen::VectorXd upper = local_upper_bounds(inst, net);
  for (int k = 0; k < K; ++k) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXd grad = deliver_gradient(inst, net, res.rates, iteration_estimator(options.outer.estimator, k));
    const Eigen::VectorXd target = res.rates + gamma * grad;
    if (!options.warm_start_duals) state = PdState::initial(inst, options.pd.init);
    state.v = res.rates;
    PdProblem problem{DualForm::kStandard, InnerObjective::kProximal, target, 0.0, upper};
    pd_run(inst, problem, options.pd, state, net.ctx);
    res.rates = state.v.cwiseMax(0.0);
    res.trace.iterations.push_back({k, gamma, res.rates, target, grad.norm(), seconds_since(start)});
  }
  res.report = net.report();
  return res;
}

DistributedResult dmax_solve(const Instance& inst, MaxObjective objective, const PdOptions& options,
                             std::ostream* trace) {
  Network net(inst, trace);
  DistributedResult res;
  const int P = inst.total_paths();
  PdState state = PdState::initial(inst, options.init);
  if (objective == MaxObjective::kThroughput) {
    PdProblem problem{DualForm::kExpPenalty, InnerObjective::kLinear, Eigen::VectorXd::Ones(P), 0.0, {}};
    pd_run(inst, problem, options, state, net.ctx);
    res.rates = state.v.cwiseMax(0.0);
  } else {
    // Each edge offers every family through it an equal share of its
    // capacity; a source starts each path at the smallest share it is
    // offered, capped by the source rate. This point lies in D.
    net.router.clear();
    for (EdgeId e = 0; e < inst.num_edges(); ++e) {
      const auto& groups = inst.edge_groups(e);
      if (groups.empty()) continue;
      const double share = inst.capacity(e) / static_cast<double>(groups.size());
      for (const auto& eg : groups)
        for (int p : eg.paths)
          net.router.send({edge_entity(e), source_of(inst, p), p, Variable::kEdgeShare, {share, 0.0, 0.0}});
    }
    for (int p = 0; p < P; ++p) state.v(p) = inst.group_rate(inst.path_group(p));
    for (int s = 0; s < inst.num_sources(); ++s) {
      const Entity me{EntityKind::kSource, s};
      for (const Message& msg : net.router.inbox(me))
        state.v(msg.path) = std::min(state.v(msg.path), net.router.read(me, msg)[0]);
    }
    const double floor = 1e-6;
    const Eigen::VectorXd upper = local_upper_bounds(inst, net);
    state.v = state.v.cwiseMax(floor).cwiseMin(upper);
    PdProblem problem{DualForm::kStandard, InnerObjective::kFair, Eigen::VectorXd(), floor, upper};
    pd_run(inst, problem, options, state, net.ctx);
    res.rates = state.v.cwiseMax(floor).cwiseMin(upper.cwiseMax(floor));
  }
  res.report = net.report();
  return res;
}

}  // namespace expnet
