#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "artic/errors.hpp"
#include "artic/lp.hpp"
#include "../support/lp_oracle.hpp"

using namespace artic;

namespace {

double row_activity(const LinearProgram& lp, std::size_t i, const std::vector<double>& x) {
  double a = 0.0;
  for (const auto& t : lp.constraints[i].terms) a += t.coef * x[t.var];
  return a;
}

void check_certificate(const LinearProgram& lp, const LPSolution& sol) {
  REQUIRE(sol.status == LPStatus::optimal);
  for (std::size_t j = 0; j < lp.variable_count(); ++j) {
    CHECK(sol.values[j] >= lp.lower[j] - 1e-7);
    CHECK(sol.values[j] <= lp.upper[j] + 1e-7);
  }
  for (std::size_t i = 0; i < lp.constraint_count(); ++i) {
    const double a = row_activity(lp, i, sol.values);
    const auto& row = lp.constraints[i];
    const double slack = 1e-7 * (1.0 + std::abs(row.bound));
    if (row.relation != Relation::greater_equal) CHECK(a <= row.bound + slack);
    if (row.relation != Relation::less_equal) CHECK(a >= row.bound - slack);
  }
  CHECK(std::abs(sol.gap) <= 1e-7 * (1.0 + std::abs(sol.objective_value)));
}

}  // namespace

TEST_CASE("single bounded variable") {
  LinearProgram lp;
  lp.add_variable(1.0);
  lp.add_constraint({{0, 1.0}}, Relation::less_equal, 5.0);
  const auto sol = solve_lp(lp);
  check_certificate(lp, sol);
  CHECK(sol.values[0] == doctest::Approx(5.0));
  CHECK(sol.objective_value == doctest::Approx(5.0));
}

TEST_CASE("degenerate optimal face") {
  LinearProgram lp;
  lp.add_variable(1.0);
  lp.add_variable(1.0);
  lp.add_constraint({{0, 1.0}, {1, 1.0}}, Relation::less_equal, 1.0);
  const auto sol = solve_lp(lp);
  check_certificate(lp, sol);
  CHECK(sol.objective_value == doctest::Approx(1.0));
}

TEST_CASE("infeasible and unbounded programs are reported") {
  LinearProgram infeasible;
  infeasible.add_variable(1.0);
  infeasible.add_constraint({{0, 1.0}}, Relation::greater_equal, 3.0);
  infeasible.add_constraint({{0, 1.0}}, Relation::less_equal, 2.0);
  CHECK(solve_lp(infeasible).status == LPStatus::infeasible);

  LinearProgram unbounded;
  unbounded.add_variable(1.0);
  unbounded.add_variable(0.0);
  unbounded.add_constraint({{0, 1.0}, {1, -1.0}}, Relation::less_equal, 1.0);
  CHECK(solve_lp(unbounded).status == LPStatus::unbounded);
}

TEST_CASE("malformed programs are rejected") {
  LinearProgram lp;
  lp.add_variable(1.0);
  lp.add_constraint({{3, 1.0}}, Relation::less_equal, 1.0);
  CHECK_THROWS_AS(solve_lp(lp), ParameterError);
  LinearProgram bad_bounds;
  bad_bounds.add_variable(1.0, 2.0, 1.0);
  CHECK_THROWS_AS(solve_lp(bad_bounds), ParameterError);
}

TEST_CASE("equality rows and negative lower bounds") {
  // max x - y  s.t. x + y = 2, x - 2y >= -4, -3 <= y <= 3
  LinearProgram lp;
  lp.add_variable(1.0, -10.0, 10.0);
  lp.add_variable(-1.0, -3.0, 3.0);
  lp.add_constraint({{0, 1.0}, {1, 1.0}}, Relation::equal, 2.0);
  lp.add_constraint({{0, 1.0}, {1, -2.0}}, Relation::greater_equal, -4.0);
  const auto sol = solve_lp(lp);
  check_certificate(lp, sol);
  CHECK(sol.values[0] == doctest::Approx(5.0));
  CHECK(sol.values[1] == doctest::Approx(-3.0));
}

TEST_CASE("random programs match vertex enumeration") {
  std::mt19937_64 rng(11);
  int feasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const LinearProgram lp = testing::random_small_lp(rng);
    const auto expected = testing::enumerate_vertices(lp);
    const auto sol = solve_lp(lp);
    if (!expected) {
      CHECK(sol.status == LPStatus::infeasible);
      continue;
    }
    ++feasible;
    check_certificate(lp, sol);
    CHECK(sol.objective_value == doctest::Approx(*expected).epsilon(1e-9).scale(1.0));
  }
  CHECK(feasible > 100);
}

TEST_CASE("warm start from a feasible vertex gives the same optimum") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    LinearProgram lp = testing::random_small_lp(rng);
    const auto cold = solve_lp(lp);
    if (cold.status != LPStatus::optimal) continue;
    // Start from the optimum of a different objective over the same region.
    LinearProgram other = lp;
    for (auto& c : other.objective) c = -c;
    const auto start = solve_lp(other);
    LPOptions options;
    options.warm_start = start.values;
    const auto warm = solve_lp(lp, options);
    check_certificate(lp, warm);
    CHECK(warm.objective_value == doctest::Approx(cold.objective_value).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("solve_lp is deterministic") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const LinearProgram lp = testing::random_small_lp(rng, 8, 6);
    const auto a = solve_lp(lp);
    const auto b = solve_lp(lp);
    CHECK(a.status == b.status);
    CHECK(a.values == b.values);
    CHECK(a.objective_value == b.objective_value);
  }
}

TEST_CASE("highly degenerate assignment structure") {
  // Transportation-like program with many ties exercises the anti-cycling path.
  const int n = 8;
  LinearProgram lp;
  for (int i = 0; i < n * n; ++i) lp.add_variable(((i * 7) % 3) * 1.0, 0.0, 1.0);
  for (int r = 0; r < n; ++r) {
    std::vector<LinearTerm> row, col;
    for (int c = 0; c < n; ++c) {
      row.push_back({static_cast<std::uint32_t>(r * n + c), 1.0});
      col.push_back({static_cast<std::uint32_t>(c * n + r), 1.0});
    }
    lp.add_constraint(row, Relation::equal, 1.0);
    lp.add_constraint(col, Relation::equal, 1.0);
  }
  const auto sol = solve_lp(lp);
  check_certificate(lp, sol);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double v = 0.0;
    for (int r = 0; r < n; ++r) v += lp.objective[r * n + perm[r]];
    best = std::max(best, v);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(sol.objective_value == doctest::Approx(best));
}
