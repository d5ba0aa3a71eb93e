#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace artic {

inline constexpr double lp_infinity = std::numeric_limits<double>::infinity();

enum class Relation { less_equal, equal, greater_equal };

struct LinearTerm {
  std::uint32_t var = 0;
  double coef = 0.0;
};

struct Constraint {
  std::vector<LinearTerm> terms;
  Relation relation = Relation::less_equal;
  double bound = 0.0;
};

/// maximize objective . x  subject to constraints and lower <= x <= upper.
/// Lower bounds must be finite; upper bounds may be +infinity.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Constraint> constraints;

  std::size_t variable_count() const { return objective.size(); }
  std::size_t constraint_count() const { return constraints.size(); }

  std::uint32_t add_variable(double objective_coef, double lo = 0.0, double hi = lp_infinity);
  void add_constraint(std::vector<LinearTerm> terms, Relation relation, double bound);
  /// Dense row over all current variables; zero coefficients are dropped.
  void add_dense_constraint(std::span<const double> coefs, Relation relation, double bound);

  /// Throws ParameterError on width mismatches, bad indices, non-finite data or
  /// lower > upper.
  void validate() const;
};

enum class LPStatus { optimal, infeasible, unbounded };

struct LPSolution {
  LPStatus status = LPStatus::infeasible;
  std::vector<double> values;
  double objective_value = 0.0;
  /// Row duals in the maximization sense (sensitivity of the optimum to the
  /// row bound).
  std::vector<double> duals;
  /// Certified primal-dual gap: objective of the dual point minus the primal
  /// objective. Non-negative up to rounding.
  double gap = 0.0;
  double primal_infeasibility = 0.0;
  std::size_t iterations = 0;
};

struct LPOptions {
  /// Feasibility tolerance and relative optimality-gap tolerance.
  double tolerance = 1e-7;
  /// 0 selects a limit proportional to the problem size.
  std::size_t max_iterations = 0;
  /// Optional feasible starting point (one value per variable). A vertex
  /// start lets the solver skip phase 1.
  std::vector<double> warm_start;
};

/// Bounded-variable revised primal simplex. Dantzig pricing with a fallback to
/// Bland's rule during degenerate stalls; the basis is refactorized with a
/// sparse LU and updated in product form in between. Deterministic.
/// Throws SolverFailure if it cannot certify a result within the iteration
/// limit.
LPSolution solve_lp(const LinearProgram& lp, const LPOptions& options);
LPSolution solve_lp(const LinearProgram& lp, double tolerance = 1e-7);

}  // namespace artic
