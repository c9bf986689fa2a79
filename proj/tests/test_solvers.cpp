#include <cmath>
#include <sstream>

#include "doctest.h"

#include "expnet/central.hpp"
#include "expnet/distributed.hpp"
#include "expnet/experiments.hpp"
#include "expnet/objective.hpp"
#include "fixtures.hpp"

using namespace expnet;

namespace {

Instance bottleneck(std::uint64_t seed = 4) {
  fixtures::ToyStats st = fixtures::random_stats(2, 2, 1, 1, seed);
  st.rates = {4.0, 3.0};
  return fixtures::star_toy(st, 2, 1, 1, 5.0);
}

// One source serving two learners of different types through a hub, so both
// families share the source edge. Symmetric in the learners.
Instance symmetric_pair(double capacity) {
  fixtures::ToyStats st = fixtures::random_stats(2, 1, 2, 2, 8);
  st.rates = {6.0, 6.0};
  st.prior_cov[1] = st.prior_cov[0];
  return fixtures::star_toy(st, 1, 2, 2, capacity);
}

OuterOptions quick_outer(int k = 20) {
  OuterOptions o;
  o.iterations = k;
  o.estimator.n1 = 20;
  o.estimator.n2 = 10;
  return o;
}

}  // namespace

TEST_CASE("frank-wolfe steps sum to one and stay in D") {
  const Instance inst = bottleneck();
  const auto res = fw_solve(inst, quick_outer(7));
  CHECK(res.trace.eta == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(res.trace.iterations.size() == 7);
  CHECK(infeasibility(inst, res.rates) < 1e-12);
  double sum = 0.0;
  for (const auto& it : res.trace.iterations) sum += it.gamma;
  CHECK(sum == doctest::Approx(1.0));
  CHECK_THROWS_AS(fw_solve(inst, quick_outer(0)), std::invalid_argument);
}

TEST_CASE("projected gradient ascent stays in D and improves on zero") {
  const Instance inst = bottleneck();
  const auto res = pga_solve(inst, quick_outer(15));
  CHECK(infeasibility(inst, res.rates) == 0.0);
  CHECK(utility_mc(inst, res.rates, 50, 10, 1).mean > utility_mc(inst, RateVector::Zero(2), 50, 10, 1).mean);
  CHECK(default_pga_step(inst) == doctest::Approx(0.08));
}

TEST_CASE("throughput and fairness baselines reach their optima on toys") {
  const Instance inst = bottleneck();
  CHECK(throughput(inst, maxtp_solve(inst)) == doctest::Approx(5.0));
  // Two families share the 4.0 source edge.
  const Instance pair = symmetric_pair(4.0);
  CHECK(throughput(pair, maxtp_solve(pair)) == doctest::Approx(4.0));

  // Fairness on the bottleneck by grid search: -1/(x0 + x1) is maximised by
  // any split of the full capacity, so the objective is -1/5.
  const RateVector fair = maxfair_solve(inst);
  CHECK(maxfair_objective(inst, fair) == doctest::Approx(-1.0 / 5.0).epsilon(1e-4));
  CHECK(infeasibility(inst, fair) < 1e-9);

  // Two symmetric families sharing the 4.0 source edge: equal split.
  const RateVector even = maxfair_solve(pair);
  CHECK(even(0) == doctest::Approx(even(1)).epsilon(1e-4));
}

TEST_CASE("router refuses non-adjacent sends and the audit flags foreign reads") {
  const Instance inst = bottleneck();
  LocalityAudit audit(inst);
  Router router(inst, audit);
  const int p0 = inst.learner_path(0, 0);
  const int p1 = inst.learner_path(0, 1);
  const EdgeId e1 = inst.path(p1).edges.front();  // source 1's first hop
  CHECK_THROWS_AS(router.send({{EntityKind::kSource, 0}, {EntityKind::kEdge, e1}, p0, Variable::kPrimal, {}}),
                  std::logic_error);
  router.send({{EntityKind::kSource, 0}, {EntityKind::kLearner, 0}, p0, Variable::kRate, {1.0, 0.0, 0.0}});
  const Message& msg = router.inbox({EntityKind::kLearner, 0}).front();
  router.read({EntityKind::kLearner, 0}, msg);
  CHECK(audit.clean());
  router.read({EntityKind::kSource, 1}, msg);
  CHECK(audit.violations() == 1);
}

TEST_CASE("primal-dual keeps duals non-negative and is deterministic") {
  const Instance inst = build_sec6_instance(desk_row("abilene"), 3);
  Eigen::VectorXd c(inst.total_paths());
  for (int p = 0; p < c.size(); ++p) c(p) = 0.2 + 0.1 * (p % 4);
  PdOptions opt;
  opt.rounds = 1;
  LocalityAudit audit(inst);
  Router router(inst, audit);
  PdContext ctx{&router, &audit, nullptr, 0};
  PdState state = PdState::initial(inst, opt.init);
  const PdProblem problem{DualForm::kExpPenalty, InnerObjective::kLinear, c, 0.0, {}};
  for (int round = 0; round < 400; ++round) {
    pd_run(inst, problem, opt, state, ctx);
    REQUIRE(state.q.minCoeff() >= 0.0);
    REQUIRE(state.r.minCoeff() >= 0.0);
    REQUIRE(state.u.minCoeff() >= 0.0);
  }
  CHECK(audit.clean());

  PdOptions full;
  full.rounds = 400;
  DistributedReport ra, rb;
  const Eigen::VectorXd a = pd_inner(inst, c, full, &ra);
  const Eigen::VectorXd b = pd_inner(inst, c, full, &rb);
  CHECK(a == b);
  CHECK(ra.clean());
  CHECK(ra.messages == rb.messages);
  // Running rounds one by one or in one batch gives the same iterate.
  PdState once = PdState::initial(inst, full.init);
  LocalityAudit audit2(inst);
  Router router2(inst, audit2);
  PdContext ctx2{&router2, &audit2, nullptr, 0};
  pd_run(inst, problem, full, once, ctx2);
  CHECK(once.v == state.v);
}

TEST_CASE("theta-relaxed constraints over-approximate the multicast load") {
  const Instance inst = build_sec6_instance(desk_row("geant"), 2);
  PdOptions opt;
  const Eigen::VectorXd v = pd_inner(inst, Eigen::VectorXd::Ones(inst.total_paths()), opt);
  const RateVector pos = v.cwiseMax(0.0);
  const auto exact = constraint_lhs(inst, pos);
  const auto relaxed = constraint_lhs(inst, pos, true, opt.theta);
  for (std::size_t e = 0; e < exact.edge.size(); ++e) CHECK(relaxed.edge[e] >= exact.edge[e] - 1e-12);
  for (std::size_t g = 0; g < exact.source.size(); ++g) CHECK(relaxed.source[g] >= exact.source[g] - 1e-12);
}

TEST_CASE("oversized stepsizes surface as overflow errors") {
  const Instance inst = bottleneck();
  PdOptions opt;
  opt.steps = {50.0, 50.0, 50.0, 50.0};
  opt.rounds = 200;
  CHECK_THROWS_AS(pd_inner(inst, Eigen::VectorXd::Constant(2, 100.0), opt), std::overflow_error);
}

TEST_CASE("distributed baselines on toys") {
  PdOptions opt;
  SUBCASE("throughput within 10% of the exact optimum") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const Instance inst = build_sec6_instance(desk_row("abilene"), seed);
      const auto res = dmax_solve(inst, MaxObjective::kThroughput, opt);
      const double central = throughput(inst, maxtp_solve(inst));
      CHECK(std::abs(throughput(inst, res.rates) - central) <= 0.1 * central);
      CHECK(res.report.clean());
    }
  }
  SUBCASE("symmetric learners get equal fair shares") {
    const Instance pair = symmetric_pair(4.0);
    const auto res = dmax_solve(pair, MaxObjective::kFair, opt);
    CHECK(std::abs(res.rates(0) - res.rates(1)) <= 0.05 * std::max(res.rates(0), res.rates(1)));
    CHECK(res.rates(0) > 1.0);
  }
  SUBCASE("zero capacity leaves only the floor") {
    const Instance dead = symmetric_pair(0.0);
    CHECK(dmax_solve(dead, MaxObjective::kFair, opt).rates.maxCoeff() <= 1e-6);
    CHECK(maxfair_solve(dead).maxCoeff() <= 1e-6);
    CHECK(maxtp_solve(dead).maxCoeff() == 0.0);
  }
}

TEST_CASE("distributed outer loops are local, feasible and reproducible") {
  const Instance inst = build_sec6_instance(desk_row("abilene"), 5);
  DistributedOptions opt;
  opt.outer = quick_outer(10);
  opt.pd.rounds = 300;
  std::ostringstream trace;
  const auto a = dfw_solve(inst, opt, &trace);
  const auto b = dfw_solve(inst, opt);
  CHECK(a.rates == b.rates);
  CHECK(a.report.clean());
  CHECK(a.report.messages > 0);
  CHECK(a.trace.eta == doctest::Approx(1.0));
  CHECK(trace.str().rfind("round,entity,variable,value\n", 0) == 0);
  CHECK(trace.str().find("edge") != std::string::npos);

  const auto c = dpga_solve(inst, opt);
  const auto d = dpga_solve(inst, opt);
  CHECK(c.rates == d.rates);
  CHECK(c.report.clean());
  CHECK(c.rates.minCoeff() >= 0.0);
}
