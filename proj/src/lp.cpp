#include "artic/lp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "artic/errors.hpp"

namespace artic {

std::uint32_t LinearProgram::add_variable(double objective_coef, double lo, double hi) {
  objective.push_back(objective_coef);
  lower.push_back(lo);
  upper.push_back(hi);
  return static_cast<std::uint32_t>(objective.size() - 1);
}

void LinearProgram::add_constraint(std::vector<LinearTerm> terms, Relation relation,
                                   double bound) {
  constraints.push_back({std::move(terms), relation, bound});
}

void LinearProgram::add_dense_constraint(std::span<const double> coefs, Relation relation,
                                         double bound) {
  std::vector<LinearTerm> terms;
  for (std::size_t j = 0; j < coefs.size(); ++j)
    if (coefs[j] != 0.0) terms.push_back({static_cast<std::uint32_t>(j), coefs[j]});
  add_constraint(std::move(terms), relation, bound);
}

void LinearProgram::validate() const {
  const std::size_t n = objective.size();
  if (lower.size() != n || upper.size() != n)
    throw ParameterError("LP bound vectors do not match the objective width");
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(objective[j])) throw ParameterError("LP objective is not finite");
    if (!std::isfinite(lower[j])) throw ParameterError("LP lower bounds must be finite");
    if (std::isnan(upper[j]) || upper[j] == -lp_infinity || upper[j] < lower[j])
      throw ParameterError("LP variable " + std::to_string(j) + " has an empty bound interval");
  }
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const auto& row = constraints[i];
    if (!std::isfinite(row.bound))
      throw ParameterError("LP row " + std::to_string(i) + " has a non-finite bound");
    for (const auto& t : row.terms) {
      if (t.var >= n)
        throw ParameterError("LP row " + std::to_string(i) + " references variable " +
                             std::to_string(t.var) + " beyond the objective width");
      if (!std::isfinite(t.coef))
        throw ParameterError("LP row " + std::to_string(i) + " has a non-finite coefficient");
    }
  }
}

namespace {

enum class VarState : std::uint8_t { basic, at_lower, at_upper };

struct Eta {
  int position;
  double pivot;
  std::vector<std::pair<int, double>> others;  // (row, w_row) for row != position
};

// Standard form: [A  -I  art] (x, s, a) = 0 with bounds on every column; row
// i's slack s_i carries the row relation as bounds.
class Simplex {
 public:
  Simplex(const LinearProgram& lp, const LPOptions& options)
      : lp_(lp),
        n_(lp.variable_count()),
        m_(lp.constraint_count()),
        tol_(options.tolerance) {
    std::vector<std::size_t> counts(n_, 0);
    for (const auto& row : lp.constraints)
      for (const auto& t : row.terms) ++counts[t.var];
    col_start_.assign(n_ + 1, 0);
    for (std::size_t j = 0; j < n_; ++j) col_start_[j + 1] = col_start_[j] + counts[j];
    row_index_.resize(col_start_.back());
    values_.resize(col_start_.back());
    std::vector<std::size_t> fill(col_start_.begin(), col_start_.end() - 1);
    for (std::size_t i = 0; i < m_; ++i)
      for (const auto& t : lp.constraints[i].terms) {
        row_index_[fill[t.var]] = static_cast<int>(i);
        values_[fill[t.var]++] = t.coef;
      }
    // Duplicate (row, var) terms are legal in LinearProgram; they simply add up
    // in the products below.

    lo_.assign(lp.lower.begin(), lp.lower.end());
    up_.assign(lp.upper.begin(), lp.upper.end());
    for (const auto& row : lp.constraints) {
      switch (row.relation) {
        case Relation::less_equal:
          lo_.push_back(-lp_infinity);
          up_.push_back(row.bound);
          break;
        case Relation::greater_equal:
          lo_.push_back(row.bound);
          up_.push_back(lp_infinity);
          break;
        case Relation::equal:
          lo_.push_back(row.bound);
          up_.push_back(row.bound);
          break;
      }
    }
    cost2_.assign(n_ + m_, 0.0);
    double cmax = 1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      cost2_[j] = -lp.objective[j];
      cmax = std::max(cmax, std::abs(cost2_[j]));
    }
    dual_tol_ = 1e-9 * cmax;
    max_iterations_ = options.max_iterations
                          ? options.max_iterations
                          : 50 * (n_ + 2 * m_) + 10000;
  }

  LPSolution run(const std::vector<double>& warm_start) {
    LPSolution out;
    bool started = false;
    if (!warm_start.empty()) {
      if (warm_start.size() != n_) throw ParameterError("LP warm start has the wrong width");
      started = crash(warm_start);
    }
    if (!started) {
      cold_start();
      if (!artificial_rows_.empty()) {
        std::vector<double> phase1(columns(), 0.0);
        for (std::size_t k = 0; k < artificial_rows_.size(); ++k) phase1[n_ + m_ + k] = 1.0;
        const auto status = iterate(phase1, 1.0);
        (void)status;
        double infeas = 0.0;
        for (std::size_t k = 0; k < artificial_rows_.size(); ++k) infeas += x_[n_ + m_ + k];
        double scale = 1.0;
        for (const auto& row : lp_.constraints) scale = std::max(scale, std::abs(row.bound));
        if (infeas > tol_ * scale) {
          out.status = LPStatus::infeasible;
          out.values.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
          out.primal_infeasibility = infeas;
          out.iterations = iterations_;
          return out;
        }
        for (std::size_t k = 0; k < artificial_rows_.size(); ++k) up_[n_ + m_ + k] = 0.0;
      }
    }
    std::vector<double> cost = cost2_;
    cost.resize(columns(), 0.0);

    for (int attempt = 0;; ++attempt) {
      const auto status = iterate(cost, 1.0);
      if (status == Outcome::unbounded) {
        out.status = LPStatus::unbounded;
        out.values.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
        out.objective_value = lp_infinity;
        out.iterations = iterations_;
        return out;
      }
      if (certify(cost, out)) break;
      if (attempt >= 2)
        throw SolverFailure("simplex could not certify optimality (gap " + std::to_string(out.gap) +
                            ", infeasibility " + std::to_string(out.primal_infeasibility) + ")");
      dual_tol_ *= 0.1;
    }
    out.status = LPStatus::optimal;
    out.iterations = iterations_;
    return out;
  }

 private:
  enum class Outcome { optimal, unbounded };

  std::size_t columns() const { return n_ + m_ + artificial_rows_.size(); }

  template <typename F>
  void for_column(std::size_t j, F&& f) const {
    if (j < n_) {
      for (std::size_t k = col_start_[j]; k < col_start_[j + 1]; ++k) f(row_index_[k], values_[k]);
    } else if (j < n_ + m_) {
      f(static_cast<int>(j - n_), -1.0);
    } else {
      const std::size_t k = j - n_ - m_;
      f(artificial_rows_[k], artificial_signs_[k]);
    }
  }

  double column_dot(std::size_t j, const Eigen::VectorXd& y) const {
    double s = 0.0;
    for_column(j, [&](int r, double v) { s += v * y[r]; });
    return s;
  }

  void refactor() {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(m_ * 3);
    for (std::size_t r = 0; r < m_; ++r)
      for_column(head_[r], [&](int row, double v) { trip.emplace_back(row, static_cast<int>(r), v); });
    Eigen::SparseMatrix<double> basis(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    basis.setFromTriplets(trip.begin(), trip.end());
    basis.makeCompressed();
    lu_.analyzePattern(basis);
    lu_.factorize(basis);
    if (lu_.info() != Eigen::Success)
      throw SolverFailure("simplex basis factorization failed: " + lu_.lastErrorMessage());
    etas_.clear();
  }

  Eigen::VectorXd ftran_dense(Eigen::VectorXd rhs) const {
    Eigen::VectorXd w = lu_.solve(rhs);
    for (const auto& eta : etas_) {
      const double zr = w[eta.position] / eta.pivot;
      w[eta.position] = zr;
      if (zr != 0.0)
        for (const auto& [i, wi] : eta.others) w[i] -= wi * zr;
    }
    return w;
  }

  Eigen::VectorXd ftran(std::size_t j) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for_column(j, [&](int r, double v) { rhs[r] += v; });
    return ftran_dense(std::move(rhs));
  }

  Eigen::VectorXd btran(const std::vector<double>& cost) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(m_));
    for (std::size_t r = 0; r < m_; ++r) v[static_cast<Eigen::Index>(r)] = cost[head_[r]];
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = v[it->position];
      for (const auto& [i, wi] : it->others) s -= v[i] * wi;
      v[it->position] = s / it->pivot;
    }
    return lu_.transpose().solve(v);
  }

  void recompute_basics() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t j = 0; j < columns(); ++j) {
      if (state_[j] == VarState::basic || x_[j] == 0.0) continue;
      const double xj = x_[j];
      for_column(j, [&](int r, double v) { rhs[r] -= v * xj; });
    }
    const Eigen::VectorXd xb = ftran_dense(std::move(rhs));
    for (std::size_t r = 0; r < m_; ++r) x_[head_[r]] = xb[static_cast<Eigen::Index>(r)];
  }

  void push_eta(int position, const Eigen::VectorXd& w) {
    Eta eta{position, w[position], {}};
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (i != position && w[i] != 0.0) eta.others.emplace_back(static_cast<int>(i), w[i]);
    etas_.push_back(std::move(eta));
  }

  void set_nonbasic_at(std::size_t j, double value) {
    x_[j] = value;
    state_[j] = (std::isfinite(up_[j]) && value >= up_[j] && lo_[j] != up_[j]) ? VarState::at_upper
                                                                             : VarState::at_lower;
  }

  // Slack basis with structurals at their lower bounds; rows whose activity
  // violates the relation get an artificial column.
  void cold_start() {
    x_.assign(n_ + m_, 0.0);
    state_.assign(n_ + m_, VarState::at_lower);
    for (std::size_t j = 0; j < n_; ++j) x_[j] = lo_[j];
    std::vector<double> activity(m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j)
      if (x_[j] != 0.0)
        for_column(j, [&](int r, double v) { activity[r] += v * x_[j]; });
    head_.assign(m_, 0);
    artificial_rows_.clear();
    artificial_signs_.clear();
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = n_ + i;
      const double a = activity[i];
      if (a >= lo_[s] - tol_ && a <= up_[s] + tol_) {
        x_[s] = std::clamp(a, lo_[s], up_[s]);
        state_[s] = VarState::basic;
        head_[i] = s;
      } else {
        const double b = a < lo_[s] ? lo_[s] : up_[s];
        set_nonbasic_at(s, b);
        artificial_rows_.push_back(static_cast<int>(i));
        artificial_signs_.push_back(b - a > 0 ? 1.0 : -1.0);
        lo_.push_back(0.0);
        up_.push_back(lp_infinity);
        x_.push_back(std::abs(b - a));
        state_.push_back(VarState::basic);
        head_[i] = n_ + m_ + artificial_rows_.size() - 1;
      }
    }
    refactor();
    recompute_basics();
  }

  // Basis from a feasible starting point: interior structurals replace slacks
  // of tight rows. Returns false if the point is infeasible or not a vertex.
  bool crash(const std::vector<double>& start) {
    x_.assign(n_ + m_, 0.0);
    state_.assign(n_ + m_, VarState::at_lower);
    artificial_rows_.clear();
    artificial_signs_.clear();
    lo_.resize(n_ + m_);
    up_.resize(n_ + m_);
    std::vector<std::size_t> interior;
    for (std::size_t j = 0; j < n_; ++j) {
      const double v = start[j];
      if (v < lo_[j] - tol_ || v > up_[j] + tol_) return false;
      if (v <= lo_[j] + 1e-9) {
        set_nonbasic_at(j, lo_[j]);
      } else if (v >= up_[j] - 1e-9) {
        set_nonbasic_at(j, up_[j]);
      } else {
        x_[j] = v;
        interior.push_back(j);
      }
    }
    std::vector<double> activity(m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j)
      if (x_[j] != 0.0)
        for_column(j, [&](int r, double v) { activity[r] += v * x_[j]; });
    head_.resize(m_);
    std::vector<bool> tight(m_, false);
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = n_ + i;
      const double a = activity[i];
      if (a < lo_[s] - tol_ || a > up_[s] + tol_) return false;
      x_[s] = std::clamp(a, lo_[s], up_[s]);
      state_[s] = VarState::basic;
      head_[i] = s;
      tight[i] = std::abs(a - lo_[s]) <= 1e-9 || std::abs(a - up_[s]) <= 1e-9;
    }
    refactor();
    for (std::size_t j : interior) {
      const Eigen::VectorXd w = ftran(j);
      int best = -1;
      double best_mag = 1e-7;
      for (std::size_t r = 0; r < m_; ++r) {
        const std::size_t h = head_[r];
        if (h < n_ || !tight[h - n_]) continue;
        const double mag = std::abs(w[static_cast<Eigen::Index>(r)]);
        if (mag > best_mag) {
          best_mag = mag;
          best = static_cast<int>(r);
        }
      }
      if (best < 0) return false;
      const std::size_t leaving = head_[best];
      const double a = x_[leaving];
      set_nonbasic_at(leaving, std::abs(a - lo_[leaving]) <= 1e-9 ? lo_[leaving] : up_[leaving]);
      head_[best] = j;
      state_[j] = VarState::basic;
      push_eta(best, w);
      if (etas_.size() >= refactor_interval) refactor();
    }
    refactor();
    recompute_basics();
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t h = head_[r];
      if (x_[h] < lo_[h] - tol_ || x_[h] > up_[h] + tol_) return false;
    }
    return true;
  }

  Outcome iterate(const std::vector<double>& cost, double) {
    std::size_t degenerate_run = 0;
    bool bland = false;
    const double pivot_tol = 1e-9;
    const double feas_tol = 1e-9;
    // Bland's rule only as a last resort against cycling; it crawls on the
    // long degenerate runs these programs produce.
    const std::size_t bland_after = 2 * m_ + 1000;
    for (;;) {
      if (++iterations_ > max_iterations_)
        throw SolverFailure("simplex iteration limit reached (" + std::to_string(max_iterations_) +
                            ")");
      if (etas_.size() >= refactor_interval) {
        refactor();
        recompute_basics();
      }
      const Eigen::VectorXd y = btran(cost);

      // Pricing.
      std::size_t entering = columns();
      double best = 0.0;
      for (std::size_t j = 0; j < columns(); ++j) {
        if (state_[j] == VarState::basic || lo_[j] == up_[j]) continue;
        const double d = cost[j] - column_dot(j, y);
        double score = 0.0;
        if (state_[j] == VarState::at_lower && d < -dual_tol_) score = -d;
        if (state_[j] == VarState::at_upper && d > dual_tol_) score = d;
        if (score == 0.0) continue;
        if (bland) {
          entering = j;
          break;
        }
        if (score > best) {
          best = score;
          entering = j;
        }
      }
      if (entering == columns()) return Outcome::optimal;

      const Eigen::VectorXd w = ftran(entering);
      const double dir = state_[entering] == VarState::at_lower ? 1.0 : -1.0;

      // Harris two-pass ratio test (plain min-ratio under Bland's rule).
      double relaxed = lp_infinity;
      for (std::size_t r = 0; r < m_; ++r) {
        const double wr = w[static_cast<Eigen::Index>(r)];
        if (std::abs(wr) <= pivot_tol) continue;
        const std::size_t h = head_[r];
        const double rate = -dir * wr;
        const double slack_tol = bland ? 0.0 : feas_tol;
        if (rate < 0 && std::isfinite(lo_[h]))
          relaxed = std::min(relaxed, (x_[h] - lo_[h] + slack_tol) / -rate);
        else if (rate > 0 && std::isfinite(up_[h]))
          relaxed = std::min(relaxed, (up_[h] - x_[h] + slack_tol) / rate);
      }
      const double flip = up_[entering] - lo_[entering];
      if (!std::isfinite(relaxed) && !std::isfinite(flip)) return Outcome::unbounded;

      double theta;
      int leave = -1;
      bool leave_at_upper = false;
      if (flip <= relaxed) {
        theta = flip;
      } else {
        double best_mag = 0.0;
        double best_ratio = lp_infinity;
        std::size_t best_index = columns();
        for (std::size_t r = 0; r < m_; ++r) {
          const double wr = w[static_cast<Eigen::Index>(r)];
          if (std::abs(wr) <= pivot_tol) continue;
          const std::size_t h = head_[r];
          const double rate = -dir * wr;
          double ratio;
          bool to_upper;
          if (rate < 0 && std::isfinite(lo_[h])) {
            ratio = (x_[h] - lo_[h]) / -rate;
            to_upper = false;
          } else if (rate > 0 && std::isfinite(up_[h])) {
            ratio = (up_[h] - x_[h]) / rate;
            to_upper = true;
          } else {
            continue;
          }
          if (bland) {
            if (ratio < best_ratio - 1e-12 ||
                (ratio <= best_ratio + 1e-12 && h < best_index)) {
              best_ratio = std::min(ratio, best_ratio);
              best_index = h;
              leave = static_cast<int>(r);
              leave_at_upper = to_upper;
            }
          } else if (ratio <= relaxed && std::abs(wr) > best_mag) {
            best_mag = std::abs(wr);
            best_ratio = ratio;
            leave = static_cast<int>(r);
            leave_at_upper = to_upper;
          }
        }
        if (leave < 0) throw SolverFailure("simplex ratio test found no pivot");
        theta = std::max(best_ratio, 0.0);
      }

      // Step.
      if (theta != 0.0) {
        x_[entering] += dir * theta;
        for (std::size_t r = 0; r < m_; ++r) {
          const double wr = w[static_cast<Eigen::Index>(r)];
          if (wr != 0.0) x_[head_[r]] -= dir * theta * wr;
        }
      }
      if (leave < 0) {
        set_nonbasic_at(entering, dir > 0 ? up_[entering] : lo_[entering]);
      } else {
        const std::size_t h = head_[leave];
        x_[h] = leave_at_upper ? up_[h] : lo_[h];
        state_[h] = leave_at_upper ? VarState::at_upper : VarState::at_lower;
        if (lo_[h] == up_[h]) state_[h] = VarState::at_lower;
        head_[leave] = entering;
        state_[entering] = VarState::basic;
        push_eta(leave, w);
      }

      if (theta <= 1e-12) {
        if (++degenerate_run > bland_after) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }
  }

  // Fresh factorization, exact basics, then the primal-dual gap from reduced
  // costs: with A x - s = 0 the primal cost equals sum_j d_j x_j, and the dual
  // value is sum_j min_{x in [lo,up]} d_j x.
  bool certify(const std::vector<double>& cost, LPSolution& out) {
    refactor();
    recompute_basics();
    const Eigen::VectorXd y = btran(cost);

    out.values.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    double infeas = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      double& v = out.values[j];
      infeas = std::max({infeas, lo_[j] - v, v - up_[j]});
      v = std::clamp(v, lo_[j], up_[j]);
    }
    std::vector<double> activity(m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j)
      for_column(j, [&](int r, double v) { activity[r] += v * out.values[j]; });
    for (std::size_t i = 0; i < m_; ++i)
      infeas = std::max({infeas, lo_[n_ + i] - activity[i], activity[i] - up_[n_ + i]});
    out.primal_infeasibility = std::max(infeas, 0.0);

    double objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) objective += lp_.objective[j] * out.values[j];
    out.objective_value = objective;

    double gap = 0.0;
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      double d = cost[j] - column_dot(j, y);
      const double xj = j < n_ ? out.values[j] : activity[j - n_];
      if (d > 0 && !std::isfinite(lo_[j])) {
        if (d > dual_tol_) return fail(out, lp_infinity);
        d = 0.0;
      }
      if (d < 0 && !std::isfinite(up_[j])) {
        if (-d > dual_tol_) return fail(out, lp_infinity);
        d = 0.0;
      }
      const double bound = d > 0 ? lo_[j] : (d < 0 ? up_[j] : 0.0);
      gap += d * xj - d * bound;
    }
    out.gap = gap;
    out.duals.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) out.duals[i] = -y[static_cast<Eigen::Index>(i)];

    double scale = 1.0;
    for (const auto& row : lp_.constraints) scale = std::max(scale, std::abs(row.bound));
    return out.primal_infeasibility <= tol_ * scale &&
           std::abs(gap) <= tol_ * (1.0 + std::abs(objective));
  }

  static bool fail(LPSolution& out, double gap) {
    out.gap = gap;
    return false;
  }

  static constexpr std::size_t refactor_interval = 64;

  const LinearProgram& lp_;
  std::size_t n_, m_;
  double tol_;
  double dual_tol_ = 1e-9;
  std::size_t max_iterations_;
  std::size_t iterations_ = 0;

  std::vector<std::size_t> col_start_;
  std::vector<int> row_index_;
  std::vector<double> values_;
  std::vector<int> artificial_rows_;
  std::vector<double> artificial_signs_;

  std::vector<double> lo_, up_, cost2_, x_;
  std::vector<VarState> state_;
  std::vector<std::size_t> head_;

  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
};

}  // namespace

LPSolution solve_lp(const LinearProgram& lp, const LPOptions& options) {
  lp.validate();
  if (!(options.tolerance > 0.0)) throw ParameterError("LP tolerance must be positive");
  if (lp.constraint_count() == 0) {
    // Box-constrained: every variable sits at its better bound.
    LPSolution out;
    out.values.resize(lp.variable_count());
    for (std::size_t j = 0; j < lp.variable_count(); ++j) {
      const double c = lp.objective[j];
      if (c > 0 && !std::isfinite(lp.upper[j])) {
        out.status = LPStatus::unbounded;
        out.objective_value = lp_infinity;
        return out;
      }
      out.values[j] = c > 0 ? lp.upper[j] : lp.lower[j];
      out.objective_value += c * out.values[j];
    }
    out.status = LPStatus::optimal;
    return out;
  }
  Simplex simplex(lp, options);
  return simplex.run(options.warm_start);
}

LPSolution solve_lp(const LinearProgram& lp, double tolerance) {
  LPOptions options;
  options.tolerance = tolerance;
  return solve_lp(lp, options);
}

}  // namespace artic
