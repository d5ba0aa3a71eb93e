#include "artic/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "artic/errors.hpp"
#include "artic/maxflow.hpp"
#include "artic/rounding.hpp"

namespace artic {

double ModelParams::s() const { return std::log(tau) - std::log1p(-tau); }

void ModelParams::validate() const {
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq))
    throw ParameterError("sigma^2 must be positive and finite");
  if (!(tau > 0.5 && tau < 1.0)) throw ParameterError("tau must lie in (0.5, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ParameterError("gamma must be >= 0");
}

TransformSet::TransformSet(std::size_t instance_count, std::size_t part_count)
    : instances_(instance_count), parts_(part_count), data_(instance_count * part_count) {}

TransformSet TransformSet::select_parts(std::span<const PartId> parts) const {
  TransformSet out(instances_, parts.size());
  for (std::size_t i = 0; i < instances_; ++i)
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (parts[k] >= parts_) throw ParameterError("part id out of range");
      out(i, k) = (*this)(i, parts[k]);
    }
  return out;
}

namespace {

void check_shapes(const RegisteredSet& set, const TransformSet& ts) {
  if (ts.instance_count() != set.instance_count())
    throw ParameterError("transform grid has " + std::to_string(ts.instance_count()) +
                         " instances, set has " + std::to_string(set.instance_count()));
}

double squared_residual(const RegisteredSet& set, const TransformSet& ts, VertexId j, PartId p) {
  const Eigen::Vector3d x = set.template_mesh().points()[j];
  double sum = 0.0;
  for (std::size_t i = 0; i < set.instance_count(); ++i)
    sum += (set.instance(i)[j] - ts(i, p)(x)).squaredNorm();
  return sum;
}

}  // namespace

double singleton_cost(const RegisteredSet& set, const TransformSet& ts, VertexId j, PartId p,
                      const ModelParams& params) {
  params.validate();
  check_shapes(set, ts);
  if (j >= set.vertex_count() || p >= ts.part_count())
    throw ParameterError("singleton_cost: index out of range");
  return -squared_residual(set, ts, j, p) / (2.0 * params.sigma_sq);
}

Eigen::MatrixXd cost_matrix(const RegisteredSet& set, const TransformSet& ts,
                            const ModelParams& params) {
  params.validate();
  check_shapes(set, ts);
  const auto j_count = static_cast<Eigen::Index>(set.vertex_count());
  const auto p_count = static_cast<Eigen::Index>(ts.part_count());
  Eigen::MatrixXd costs = Eigen::MatrixXd::Zero(j_count, p_count);
  const double scale = -1.0 / (2.0 * params.sigma_sq);
  const PointSet& x = set.template_mesh().points();
  for (Eigen::Index p = 0; p < p_count; ++p) {
    std::span<double> column(costs.col(p).data(), static_cast<std::size_t>(j_count));
    for (std::size_t i = 0; i < set.instance_count(); ++i)
      kernels::accumulate_squared_residuals(x, set.instance(i), ts(i, static_cast<std::size_t>(p)).affine_map(),
                                            scale, column);
  }
  return costs;
}

LinearProgram build_labeling_lp(const Eigen::MatrixXd& costs, std::span<const Edge> edges,
                                double s) {
  if (!(s > 0.0)) throw ParameterError("separation weight must be positive");
  const auto J = static_cast<std::uint32_t>(costs.rows());
  const auto P = static_cast<std::uint32_t>(costs.cols());
  LinearProgram lp;
  for (std::uint32_t j = 0; j < J; ++j)
    for (std::uint32_t p = 0; p < P; ++p) lp.add_variable(costs(j, p));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].first >= J || edges[e].second >= J)
      throw ParameterError("labeling edge references a missing vertex");
    for (std::uint32_t p = 0; p < P; ++p) lp.add_variable(-0.5 * s);
  }
  for (std::uint32_t j = 0; j < J; ++j) {
    std::vector<LinearTerm> row;
    for (std::uint32_t p = 0; p < P; ++p) row.push_back({j * P + p, 1.0});
    lp.add_constraint(std::move(row), Relation::equal, 1.0);
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [j, k] = edges[e];
    for (std::uint32_t p = 0; p < P; ++p) {
      const auto beta = static_cast<std::uint32_t>(J * P + e * P + p);
      lp.add_constraint({{beta, 1.0}, {j * P + p, -1.0}, {k * P + p, 1.0}},
                        Relation::greater_equal, 0.0);
      lp.add_constraint({{beta, 1.0}, {k * P + p, -1.0}, {j * P + p, 1.0}},
                        Relation::greater_equal, 0.0);
    }
  }
  return lp;
}

double labeling_value(const Eigen::MatrixXd& costs, const Graph& graph,
                      std::span<const PartId> labels, double s) {
  double value = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j)
    value += costs(static_cast<Eigen::Index>(j), labels[j]);
  std::size_t cut = 0;
  for (const auto& [j, k] : graph.edges()) cut += labels[j] != labels[k];
  return value - s * static_cast<double>(cut);
}

namespace {

// A connected set of vertices that still have two or more candidate labels.
// `energy(v, l)` is -c(j, l) plus s per fixed neighbour carrying another label,
// so minimizing sum energy + s * (internal cut edges) is the subproblem.
struct Subproblem {
  std::vector<VertexId> vertices;
  std::vector<std::vector<PartId>> candidates;
  std::vector<std::vector<double>> energy;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // local indices
  std::vector<PartId> labels;                                  // union of candidates

  double unary(std::size_t v, PartId l) const {
    const auto& c = candidates[v];
    const auto it = std::find(c.begin(), c.end(), l);
    return it == c.end() ? std::numeric_limits<double>::infinity()
                         : energy[v][static_cast<std::size_t>(it - c.begin())];
  }

  double total(const std::vector<PartId>& assign, double s) const {
    double e = 0.0;
    for (std::size_t v = 0; v < vertices.size(); ++v) e += unary(v, assign[v]);
    for (const auto& [a, b] : edges) e += assign[a] != assign[b] ? s : 0.0;
    return e;
  }
};

// Accumulates a pairwise binary energy into a flow graph. x = 0 is the
// source side.
class BinaryEnergy {
 public:
  explicit BinaryEnergy(std::size_t n) : flow_(n), cost0_(n, 0.0), cost1_(n, 0.0) {}

  void unary(std::uint32_t v, double e0, double e1) {
    cost0_[v] += e0;
    cost1_[v] += e1;
  }
  // Submodular table E(x_u, x_v) = (a, b, c, d) for (00, 01, 10, 11).
  void pairwise(std::uint32_t u, std::uint32_t v, double a, double b, double c, double d) {
    cost1_[u] += c - a;
    cost1_[v] += d - c;
    const double w = b + c - a - d;
    flow_.add_edge(u, v, std::max(w, 0.0), 0.0);
  }

  std::vector<bool> minimize() {
    for (std::size_t v = 0; v < cost0_.size(); ++v) {
      const double m = std::min(cost0_[v], cost1_[v]);
      flow_.add_terminal(static_cast<std::uint32_t>(v), cost1_[v] - m, cost0_[v] - m);
    }
    flow_.solve();
    std::vector<bool> x(cost0_.size());
    for (std::size_t v = 0; v < x.size(); ++v) x[v] = !flow_.source_side(static_cast<std::uint32_t>(v));
    return x;
  }

 private:
  MaxFlow flow_;
  std::vector<double> cost0_, cost1_;
};

std::vector<PartId> solve_two_labels(const Subproblem& sub, double s) {
  const PartId a = sub.labels[0], b = sub.labels[1];
  BinaryEnergy energy(sub.vertices.size());
  for (std::uint32_t v = 0; v < sub.vertices.size(); ++v)
    energy.unary(v, sub.unary(v, a), sub.unary(v, b));
  for (const auto& [u, v] : sub.edges) {
    energy.pairwise(u, v, 0.0, s, s, 0.0);
  }
  const auto x = energy.minimize();
  std::vector<PartId> out(sub.vertices.size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = x[v] ? b : a;
  return out;
}

// Alpha-expansion over the candidate labels; a local optimum within a factor
// of two of the best labeling, used as the simplex starting vertex.
std::vector<PartId> expansion(const Subproblem& sub, double s) {
  const std::size_t n = sub.vertices.size();
  std::vector<PartId> assign(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < sub.candidates[v].size(); ++k)
      if (sub.energy[v][k] < sub.energy[v][best]) best = k;
    assign[v] = sub.candidates[v][best];
  }
  double current = sub.total(assign, s);
  std::vector<std::vector<std::uint32_t>> adjacent(n);
  for (const auto& [u, v] : sub.edges) {
    adjacent[u].push_back(v);
    adjacent[v].push_back(u);
  }
  for (int sweep = 0; sweep < 20; ++sweep) {
    bool improved = false;
    for (PartId a : sub.labels) {
      // Movable vertices: a is a candidate and not already their label.
      std::vector<std::int64_t> slot(n, -1);
      std::uint32_t count = 0;
      for (std::size_t v = 0; v < n; ++v)
        if (assign[v] != a && std::isfinite(sub.unary(v, a))) slot[v] = count++;
      if (count == 0) continue;
      BinaryEnergy energy(count);
      for (std::size_t v = 0; v < n; ++v) {
        if (slot[v] < 0) continue;
        const auto u = static_cast<std::uint32_t>(slot[v]);
        energy.unary(u, sub.unary(v, assign[v]), sub.unary(v, a));
        for (auto w : adjacent[v]) {
          if (slot[w] >= 0) continue;
          // Neighbour w keeps its label.
          energy.unary(u, assign[v] != assign[w] ? s : 0.0, a != assign[w] ? s : 0.0);
        }
      }
      for (const auto& [p, q] : sub.edges) {
        if (slot[p] < 0 || slot[q] < 0) continue;
        energy.pairwise(static_cast<std::uint32_t>(slot[p]), static_cast<std::uint32_t>(slot[q]),
                        assign[p] != assign[q] ? s : 0.0, s, s, 0.0);
      }
      const auto x = energy.minimize();
      std::vector<PartId> next = assign;
      for (std::size_t v = 0; v < n; ++v)
        if (slot[v] >= 0 && x[static_cast<std::size_t>(slot[v])]) next[v] = a;
      const double value = sub.total(next, s);
      if (value < current - 1e-12 * (1.0 + std::abs(current))) {
        assign = std::move(next);
        current = value;
        improved = true;
      }
    }
    if (!improved) break;
  }
  return assign;
}

struct SubSolution {
  // Per local vertex: (label, mass) pairs.
  std::vector<std::vector<std::pair<PartId, double>>> mass;
  double value = 0.0;  // maximized objective: -(energy)
  bool integral = true;
};

SubSolution solve_relaxation(const Subproblem& sub, double s) {
  const std::size_t n = sub.vertices.size();
  LinearProgram lp;
  std::vector<std::vector<std::uint32_t>> var(n);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t k = 0; k < sub.candidates[v].size(); ++k)
      var[v].push_back(lp.add_variable(-sub.energy[v][k], 0.0, 1.0));
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<LinearTerm> row;
    for (auto x : var[v]) row.push_back({x, 1.0});
    lp.add_constraint(std::move(row), Relation::equal, 1.0);
  }
  const std::vector<PartId> start = expansion(sub, s);
  std::vector<double> warm;
  auto index_of = [&](std::size_t v, PartId l) -> std::int64_t {
    const auto& c = sub.candidates[v];
    const auto it = std::find(c.begin(), c.end(), l);
    return it == c.end() ? -1 : it - c.begin();
  };
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t k = 0; k < sub.candidates[v].size(); ++k)
      warm.push_back(sub.candidates[v][k] == start[v] ? 1.0 : 0.0);
  for (const auto& [u, v] : sub.edges) {
    // |alpha_u - alpha_v| summed over labels, halved. Labels only one side can
    // take contribute their alpha directly.
    for (std::size_t k = 0; k < sub.candidates[u].size(); ++k) {
      const PartId l = sub.candidates[u][k];
      const auto other = index_of(v, l);
      if (other < 0) {
        lp.objective[var[u][k]] -= 0.5 * s;
        continue;
      }
      const auto plus = lp.add_variable(-0.5 * s);
      const auto minus = lp.add_variable(-0.5 * s);
      lp.add_constraint({{var[u][k], 1.0},
                         {var[v][static_cast<std::size_t>(other)], -1.0},
                         {plus, -1.0},
                         {minus, 1.0}},
                        Relation::equal, 0.0);
      const double diff = (start[u] == l ? 1.0 : 0.0) - (start[v] == l ? 1.0 : 0.0);
      warm.push_back(std::max(diff, 0.0));
      warm.push_back(std::max(-diff, 0.0));
    }
    for (std::size_t k = 0; k < sub.candidates[v].size(); ++k)
      if (index_of(u, sub.candidates[v][k]) < 0) lp.objective[var[v][k]] -= 0.5 * s;
  }

  LPOptions options;
  options.warm_start = std::move(warm);
  const LPSolution sol = solve_lp(lp, options);
  if (sol.status != LPStatus::optimal)
    throw SolverFailure("labeling relaxation reported a non-optimal status");

  SubSolution out;
  out.value = sol.objective_value;
  out.mass.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t k = 0; k < sub.candidates[v].size(); ++k) {
      const double a = std::clamp(sol.values[var[v][k]], 0.0, 1.0);
      if (a > 1e-6 && a < 1.0 - 1e-6) out.integral = false;
      if (a > 0.0) out.mass[v].emplace_back(sub.candidates[v][k], a);
    }
  }
  if (out.integral)
    for (auto& m : out.mass) {
      auto best = std::max_element(m.begin(), m.end(),
                                   [](const auto& x, const auto& y) { return x.second < y.second; });
      m = {{best->first, 1.0}};
    }
  return out;
}

}  // namespace

LabelingResult solve_uniform_labeling(const Eigen::MatrixXd& costs, const Graph& graph, double s,
                                      std::uint64_t seed) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("separation weight must be positive");
  const std::size_t J = graph.vertex_count();
  const auto P = static_cast<std::size_t>(costs.cols());
  if (static_cast<std::size_t>(costs.rows()) != J)
    throw ParameterError("cost matrix rows do not match the vertex count");
  if (P == 0) throw ParameterError("cost matrix has no labels");
  if (!costs.allFinite()) throw ParameterError("cost matrix has non-finite entries");

  // A label more than s * degree below the best at a vertex can never appear
  // in an optimum of the relaxation: shifting its mass to the best label gains
  // more than any edge can lose.
  std::vector<std::vector<PartId>> candidates(J);
  for (std::size_t j = 0; j < J; ++j) {
    const auto row = costs.row(static_cast<Eigen::Index>(j));
    const double best = row.maxCoeff();
    const double reach = s * static_cast<double>(graph.degree(static_cast<VertexId>(j))) +
                         1e-9 * (1.0 + std::abs(best));
    for (std::size_t p = 0; p < P; ++p)
      if (best - row[static_cast<Eigen::Index>(p)] <= reach)
        candidates[j].push_back(static_cast<PartId>(p));
  }

  constexpr PartId unset = std::numeric_limits<PartId>::max();
  std::vector<PartId> fixed(J, unset);
  std::vector<VertexId> contested;
  for (std::size_t j = 0; j < J; ++j) {
    if (candidates[j].size() == 1)
      fixed[j] = candidates[j][0];
    else
      contested.push_back(static_cast<VertexId>(j));
  }

  LabelingResult result;
  result.labeling.part_count = static_cast<PartId>(P);
  result.relaxation_value = 0.0;
  for (std::size_t j = 0; j < J; ++j)
    if (fixed[j] != unset) result.relaxation_value += costs(static_cast<Eigen::Index>(j), fixed[j]);
  for (const auto& [j, k] : graph.edges())
    if (fixed[j] != unset && fixed[k] != unset && fixed[j] != fixed[k]) result.relaxation_value -= s;

  // Per-vertex label distributions of the relaxation optimum.
  std::vector<std::vector<std::pair<PartId, double>>> mass(J);
  for (std::size_t j = 0; j < J; ++j)
    if (fixed[j] != unset) mass[j] = {{fixed[j], 1.0}};

  bool integral = true;
  std::vector<std::uint32_t> local(J, 0);
  for (const auto& component : connected_components(graph, contested)) {
    Subproblem sub;
    sub.vertices = component;
    for (std::size_t v = 0; v < component.size(); ++v) local[component[v]] = static_cast<std::uint32_t>(v);
    for (VertexId j : component) {
      sub.candidates.push_back(candidates[j]);
      std::vector<double> e;
      for (PartId p : candidates[j]) {
        double value = -costs(j, p);
        for (VertexId k : graph.neighbors(j))
          if (fixed[k] != unset && fixed[k] != p) value += s;
        e.push_back(value);
      }
      sub.energy.push_back(std::move(e));
      for (VertexId k : graph.neighbors(j))
        if (k > j && fixed[k] == unset) sub.edges.emplace_back(local[j], local[k]);
      sub.labels.insert(sub.labels.end(), candidates[j].begin(), candidates[j].end());
    }
    std::sort(sub.labels.begin(), sub.labels.end());
    sub.labels.erase(std::unique(sub.labels.begin(), sub.labels.end()), sub.labels.end());

    if (sub.labels.size() == 2) {
      const auto assign = solve_two_labels(sub, s);
      result.relaxation_value -= sub.total(assign, s);
      for (std::size_t v = 0; v < component.size(); ++v) mass[component[v]] = {{assign[v], 1.0}};
    } else {
      SubSolution sol = solve_relaxation(sub, s);
      result.relaxation_value += sol.value;
      integral = integral && sol.integral;
      for (std::size_t v = 0; v < component.size(); ++v) mass[component[v]] = std::move(sol.mass[v]);
    }
  }

  result.was_integral = integral;
  if (integral) {
    result.labeling.labels.resize(J);
    for (std::size_t j = 0; j < J; ++j) result.labeling.labels[j] = mass[j].front().first;
  } else {
    Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(P));
    for (std::size_t j = 0; j < J; ++j) {
      double total = 0.0;
      for (const auto& [p, a] : mass[j]) total += a;
      for (const auto& [p, a] : mass[j]) alpha(static_cast<Eigen::Index>(j), p) = a / total;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t k = 0; k < 8; ++k) {
      auto labels = kt_round(alpha, seed + 0x9e3779b97f4a7c15ull * (k + 1));
      const double value = labeling_value(costs, graph, labels, s);
      if (value > best) {
        best = value;
        result.labeling.labels = std::move(labels);
      }
    }
  }
  result.objective = labeling_value(costs, graph, result.labeling.labels, s);
  return result;
}

LabelingResult e_step(const RegisteredSet& set, const TransformSet& ts, const ModelParams& params,
                      std::uint64_t seed) {
  const Eigen::MatrixXd costs = cost_matrix(set, ts, params);
  return solve_uniform_labeling(costs, set.template_mesh().graph(), params.s(), seed);
}

double objective(const RegisteredSet& set, const TransformSet& ts, const PartLabeling& labeling,
                 const ModelParams& params) {
  params.validate();
  check_shapes(set, ts);
  if (labeling.vertex_count() != set.vertex_count())
    throw ParameterError("labeling size does not match the vertex count");
  if (ts.part_count() < labeling.part_count)
    throw ParameterError("transform grid has fewer parts than the labeling");
  labeling.validate();
  double data = 0.0;
  for (VertexId j = 0; j < set.vertex_count(); ++j)
    data += squared_residual(set, ts, j, labeling.labels[j]);
  std::size_t agree = 0, differ = 0;
  for (const auto& [j, k] : set.template_mesh().edges())
    (labeling.labels[j] == labeling.labels[k] ? agree : differ) += 1;
  return static_cast<double>(agree) * std::log(params.tau) +
         static_cast<double>(differ) * std::log1p(-params.tau) - data / (2.0 * params.sigma_sq);
}

PartModel compact_parts(const PartLabeling& labeling, const TransformSet& ts) {
  labeling.validate();
  if (ts.part_count() < labeling.part_count)
    throw ParameterError("transform grid has fewer parts than the labeling");
  const auto sizes = labeling.part_sizes();
  std::vector<PartId> kept;
  std::vector<PartId> remap(labeling.part_count, 0);
  for (PartId p = 0; p < labeling.part_count; ++p)
    if (sizes[p] > 0) {
      remap[p] = static_cast<PartId>(kept.size());
      kept.push_back(p);
    }
  PartModel out;
  out.labeling.part_count = static_cast<PartId>(kept.size());
  out.labeling.labels.reserve(labeling.vertex_count());
  for (PartId l : labeling.labels) out.labeling.labels.push_back(remap[l]);
  out.transforms = ts.select_parts(kept);
  return out;
}

PartModel enforce_hard_contiguity(const PartLabeling& labeling, const TransformSet& ts,
                                  const Mesh& mesh) {
  if (labeling.vertex_count() != mesh.vertex_count())
    throw ParameterError("labeling size does not match the mesh");
  PartModel compact = compact_parts(labeling, ts);
  const PartId parts = compact.labeling.part_count;
  std::vector<std::vector<VertexId>> members(parts);
  for (VertexId j = 0; j < compact.labeling.labels.size(); ++j)
    members[compact.labeling.labels[j]].push_back(j);

  std::vector<PartId> source(parts);
  for (PartId p = 0; p < parts; ++p) source[p] = p;
  PartModel out;
  out.labeling = compact.labeling;
  for (PartId p = 0; p < parts; ++p) {
    const auto pieces = connected_components(mesh.graph(), members[p]);
    for (std::size_t c = 1; c < pieces.size(); ++c) {
      const auto id = static_cast<PartId>(source.size());
      source.push_back(p);
      for (VertexId j : pieces[c]) out.labeling.labels[j] = id;
    }
  }
  out.labeling.part_count = static_cast<PartId>(source.size());
  out.transforms = compact.transforms.select_parts(source);
  return out;
}

}  // namespace artic
