#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "artic/lp.hpp"
#include "artic/mesh.hpp"
#include "artic/part_labeling.hpp"
#include "artic/rigid.hpp"

namespace artic {

/// Model constants. The separation weight s = log(tau) - log(1 - tau) is the
/// penalty per disagreeing edge; delta = sigma_sq / s is the anneal ratio.
struct ModelParams {
  double sigma_sq = 1.0;
  double tau = 0.9;
  double gamma = 0.0;

  double s() const;
  double delta() const { return sigma_sq / s(); }
  /// Throws ParameterError unless sigma_sq > 0, 0.5 < tau < 1 and gamma >= 0.
  void validate() const;
};

/// N x P grid of per-instance, per-part rigid transforms.
class TransformSet {
 public:
  TransformSet() = default;
  /// Filled with identities.
  TransformSet(std::size_t instance_count, std::size_t part_count);

  std::size_t instance_count() const { return instances_; }
  std::size_t part_count() const { return parts_; }

  RigidTransform& operator()(std::size_t instance, std::size_t part) {
    return data_[instance * parts_ + part];
  }
  const RigidTransform& operator()(std::size_t instance, std::size_t part) const {
    return data_[instance * parts_ + part];
  }

  /// New grid whose part k is this grid's part `parts[k]`.
  TransformSet select_parts(std::span<const PartId> parts) const;

  friend bool operator==(const TransformSet&, const TransformSet&) = default;

 private:
  std::size_t instances_ = 0;
  std::size_t parts_ = 0;
  std::vector<RigidTransform> data_;
};

/// c(j, p) = -(1 / 2 sigma^2) sum_i |z_ij - T_ip(x_j)|^2.
double singleton_cost(const RegisteredSet& set, const TransformSet& ts, VertexId j, PartId p,
                      const ModelParams& params);

/// All singleton costs, J x P.
Eigen::MatrixXd cost_matrix(const RegisteredSet& set, const TransformSet& ts,
                            const ModelParams& params);

/// Relaxed labeling program. Variables: alpha(j, p) at index j * P + p, then
/// beta(e, p) at J * P + e * P + p for edge e. Maximizes
/// sum c alpha - (s / 2) sum beta subject to sum_p alpha(j, p) = 1 and
/// beta(e, p) >= +-(alpha(j, p) - alpha(k, p)); all variables >= 0.
LinearProgram build_labeling_lp(const Eigen::MatrixXd& costs, std::span<const Edge> edges,
                                double s);

/// Uniform-labeling value: sum_j c(j, l_j) - s * (#edges with l_j != l_k).
double labeling_value(const Eigen::MatrixXd& costs, const Graph& graph,
                      std::span<const PartId> labels, double s);

struct LabelingResult {
  PartLabeling labeling;
  /// labeling_value of the returned labels. Adding |E| log(tau) gives the
  /// log-likelihood objective.
  double objective = 0.0;
  /// True when the relaxation optimum was integral (within 1e-6).
  bool was_integral = true;
  /// Optimal value of the relaxation, an upper bound on `objective`.
  double relaxation_value = 0.0;
};

/// MAP labeling under the relaxation. Labels that cannot appear in any
/// optimum are pruned first; the remaining contested vertices split into
/// independent subproblems. Two-label subproblems are solved exactly by a
/// minimum cut (the relaxation has an integral optimum there); the others go
/// through solve_lp, warm-started from an alpha-expansion labeling. Fractional
/// optima are rounded with kt_round (best of several derived seeds). The
/// returned part_count equals costs.cols(); parts may be empty.
LabelingResult solve_uniform_labeling(const Eigen::MatrixXd& costs, const Graph& graph, double s,
                                      std::uint64_t seed);

/// E-step: costs from the current transforms, then solve_uniform_labeling on
/// the template graph.
LabelingResult e_step(const RegisteredSet& set, const TransformSet& ts, const ModelParams& params,
                      std::uint64_t seed);

/// Log-likelihood objective: sum over edges of log tau (equal labels) or
/// log(1 - tau) (different labels), plus sum_j c(j, l_j).
double objective(const RegisteredSet& set, const TransformSet& ts, const PartLabeling& labeling,
                 const ModelParams& params);

struct PartModel {
  PartLabeling labeling;
  TransformSet transforms;
};

/// Drops empty parts and renumbers the rest in increasing id order.
PartModel compact_parts(const PartLabeling& labeling, const TransformSet& ts);

/// Splits every part into its connected components. Each part's first
/// component (by smallest vertex) keeps the part's compacted id; further
/// components are appended after all existing parts, in (part, component)
/// order, with copies of the part's transforms. Also compacts.
PartModel enforce_hard_contiguity(const PartLabeling& labeling, const TransformSet& ts,
                                  const Mesh& mesh);

}  // namespace artic
