#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "expnet/central.hpp"
#include "expnet/instance.hpp"
#include "expnet/linear_program.hpp"
#include "fixtures.hpp"

using namespace expnet;

namespace {

// Best vertex of {x >= 0, A x <= b} in two dimensions by enumerating all
// pairwise intersections of the boundary lines.
double brute_force_lp_2d(const std::vector<std::array<double, 3>>& rows, double c0, double c1) {
  std::vector<std::array<double, 3>> lines = rows;
  lines.push_back({-1.0, 0.0, 0.0});
  lines.push_back({0.0, -1.0, 0.0});
  double best = -1e300;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const double det = lines[i][0] * lines[j][1] - lines[i][1] * lines[j][0];
      if (std::abs(det) < 1e-12) continue;
      const double x = (lines[i][2] * lines[j][1] - lines[i][1] * lines[j][2]) / det;
      const double y = (lines[i][0] * lines[j][2] - lines[i][2] * lines[j][0]) / det;
      bool ok = true;
      for (const auto& l : lines) ok = ok && l[0] * x + l[1] * y <= l[2] + 1e-9;
      if (ok) best = std::max(best, c0 * x + c1 * y);
    }
  return best;
}

// Euclidean projection onto {x >= 0, sum x <= r} via the sorting algorithm.
Eigen::VectorXd project_capped_simplex(const Eigen::VectorXd& y, double r) {
  Eigen::VectorXd pos = y.cwiseMax(0.0);
  if (pos.sum() <= r) return pos;
  std::vector<double> s(y.data(), y.data() + y.size());
  std::sort(s.rbegin(), s.rend());
  double cum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    cum += s[k];
    const double t = (cum - r) / double(k + 1);
    if (s[k] - t > 0) tau = t;
  }
  return (y.array() - tau).cwiseMax(0.0).matrix();
}

Instance shared_bottleneck() {
  // Two sources through one hub to one learner: the hub->learner edge carries
  // both families; source edges carry one each.
  fixtures::ToyStats st = fixtures::random_stats(2, 2, 1, 1, 4);
  st.rates = {4.0, 3.0};
  return fixtures::star_toy(st, 2, 1, 1, 5.0);
}

}  // namespace

TEST_CASE("theta norm matches the direct formula and approaches the max") {
  const std::vector<double> x{0.5, 2.0, 1.5, 0.0};
  for (double theta : {1.0, 2.0, 10.0, 37.0}) {
    double s = 0.0;
    for (double v : x) s += std::pow(v, theta);
    CHECK(theta_norm(x, theta) == doctest::Approx(std::pow(s, 1.0 / theta)).epsilon(1e-12));
    CHECK(theta_norm(x, theta) >= 2.0);
  }
  CHECK(theta_norm(x, INFINITY) == 2.0);
  CHECK(theta_norm({1e300, 1e300}, 10.0) == doctest::Approx(1e300 * std::pow(2.0, 0.1)));
  CHECK(theta_norm({}, 10.0) == 0.0);
  CHECK(theta_norm(x, 200.0) == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("constraint sides follow multicast max and unicast sum by hand") {
  // One source, two learners of the same type: a multicast family.
  fixtures::ToyStats st = fixtures::random_stats(2, 1, 2, 1, 1);
  st.rates = {6.0};
  const Instance mc = fixtures::star_toy(st, 1, 2, 1, 4.0);
  REQUIRE(mc.total_paths() == 2);
  RateVector r(2);
  r << 3.0, 5.0;
  const auto lhs = constraint_lhs(mc, r);
  CHECK(lhs.edge[0] == 5.0);  // source->hub carries max(3, 5)
  CHECK(lhs.source[0] == 5.0);
  const auto res = residuals(mc, r);
  REQUIRE(int(res.size()) == mc.num_constraints());
  // edge 0 (5 > 4), edge 1 (3 <= 4), edge 2 (5 > 4), source (5 <= 6), coords.
  CHECK(res[0] == doctest::Approx(1.0));
  CHECK(res[1] == 0.0);
  CHECK(res[2] == doctest::Approx(1.0));
  CHECK(res[3] == 0.0);
  CHECK(infeasibility(mc, r) == doctest::Approx(2.0 / mc.num_constraints()));
  RateVector neg(2);
  neg << -1.0, 1.0;
  CHECK(infeasibility(mc, neg) == doctest::Approx(1.0 / mc.num_constraints()));

  const Instance uc = shared_bottleneck();
  RateVector u(2);
  u << 4.0, 3.0;
  const auto ul = constraint_lhs(uc, u);
  CHECK(ul.edge[2] == 7.0);  // hub->learner carries both families
  const auto relaxed = constraint_lhs(uc, u, true, 10.0);
  for (std::size_t e = 0; e < ul.edge.size(); ++e) CHECK(relaxed.edge[e] >= ul.edge[e] - 1e-12);
}

TEST_CASE("shrink_to_feasible lands in D and is idempotent on feasible points") {
  const Instance inst = shared_bottleneck();
  RateVector r(2);
  r << 10.0, -2.0;
  const RateVector s = shrink_to_feasible(inst, r);
  CHECK(infeasibility(inst, s) == 0.0);
  CHECK(s(1) == 0.0);
  RateVector ok(2);
  ok << 1.0, 2.0;
  CHECK(shrink_to_feasible(inst, ok) == ok);
}

TEST_CASE("linearised polytope agrees with exact feasibility") {
  const Instance inst = shared_bottleneck();
  const auto lp = lp_linearize(inst);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int i = 0; i < 200; ++i) {
    RateVector r(2);
    r << u(rng), u(rng);
    const bool exact = infeasibility(inst, r) == 0.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(lp.polytope.num_vars);
    x.head(2) = r;
    // Tightest auxiliary completion: each m is the largest rate it bounds.
    {
      int k = 2;
      for (EdgeId e = 0; e < inst.num_edges(); ++e)
        for (const auto& eg : inst.edge_groups(e)) {
          double m = 0.0;
          for (int p : eg.paths) m = std::max(m, r(p));
          x(k++) = m;
        }
      for (int g = 0; g < inst.num_groups(); ++g) {
        double m = 0.0;
        for (int p : inst.group_paths(g)) m = std::max(m, r(p));
        x(k++) = m;
      }
    }
    CHECK(lp.polytope.contains(x) == exact);
  }
  CHECK(lp.num_rates == 2);
  CHECK(lp.num_edge_aux == 4);
  CHECK(lp.num_source_aux == 2);
}

TEST_CASE("simplex matches vertex enumeration on random 2-D programs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::array<double, 3>> rows;
    Polytope poly;
    poly.num_vars = 2;
    for (int i = 0; i < 4; ++i) {
      const double a = u(rng), b = u(rng), c = 4.0 * u(rng);
      rows.push_back({a, b, c});
      poly.rows.push_back({{{0, a}, {1, b}}, c});
    }
    Eigen::VectorXd c(2);
    c << u(rng) - 1.0, u(rng) - 1.0;
    const auto sol = maximize_linear(poly, c);
    CHECK(sol.objective == doctest::Approx(brute_force_lp_2d(rows, c(0), c(1))).epsilon(1e-9));
    CHECK(poly.contains(sol.x));
  }
  Polytope textbook;
  textbook.num_vars = 2;
  textbook.rows = {{{{0, 1.0}, {1, 2.0}}, 4.0}, {{{0, 3.0}, {1, 1.0}}, 6.0}};
  const auto sol = maximize_linear(textbook, Eigen::Vector2d(1.0, 1.0));
  CHECK(sol.x(0) == doctest::Approx(1.6));
  CHECK(sol.x(1) == doctest::Approx(1.2));
}

TEST_CASE("interior point QP reproduces the capped-simplex projection") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 2.0);
  const int dim = 6;
  Polytope poly;
  poly.num_vars = dim;
  Inequality sum;
  for (int i = 0; i < dim; ++i) sum.terms.push_back({i, 1.0});
  sum.rhs = 3.0;
  poly.rows.push_back(sum);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd y(dim);
    for (int i = 0; i < dim; ++i) y(i) = n(rng);
    const Eigen::VectorXd x = minimize_separable_qp(poly, Eigen::VectorXd::Ones(dim), -y);
    CHECK((x - project_capped_simplex(y, 3.0)).norm() < 1e-7);
  }
}

TEST_CASE("projection onto D is a Euclidean projection on a unicast toy") {
  // One bottleneck edge of capacity 5 and per-family caps 4 and 3: D is
  // {0 <= x0 <= 4, 0 <= x1 <= 3, x0 + x1 <= 5}. Grid search is the oracle.
  const Instance inst = shared_bottleneck();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 8.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector2d y(u(rng), u(rng));
    const Eigen::VectorXd x = project_onto_D(inst, y);
    double best = 1e300;
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 300; ++j) {
        const Eigen::Vector2d z(i * 0.01, j * 0.01);
        if (z.sum() > 5.0 + 1e-12) continue;
        best = std::min(best, (z - y).squaredNorm());
      }
    CHECK((x - y).squaredNorm() <= best + 1e-6);
    CHECK(infeasibility(inst, x) == 0.0);
  }
}
