#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "artic/labeling.hpp"

namespace artic {

struct PartAdjacency {
  std::array<PartId, 2> parts;  // parts[0] < parts[1]
  std::vector<Edge> cross_edges;
};

/// Part pairs joined by at least `min_boundary_edges` mesh edges, ordered by
/// (p, q), each with its cross edges in mesh edge order.
std::vector<PartAdjacency> part_adjacency(const PartLabeling& labeling, const Mesh& mesh,
                                          std::size_t min_boundary_edges = 1);

/// Per instance: mean over cross edges of the instance-space edge midpoint.
/// Throws StructuralError for an empty edge list.
std::vector<Eigen::Vector3d> boundary_centroids(const RegisteredSet& set,
                                                std::span<const Edge> cross_edges);

struct Joint {
  std::array<PartId, 2> parts;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  /// Value of the regularized joint objective at `position`.
  double residual = 0.0;
};

struct JointEstimate {
  Joint joint;
  /// The unregularized system was rank deficient and the position was chosen
  /// on the solution set nearest the template-space boundary centroid.
  bool ambiguous = false;
};

/// sum_i |T_ip(y) - T_iq(y)|^2 + gamma sum_i |(T_ip(y) + T_iq(y)) / 2 - c_i|^2.
double joint_objective(PartId p, PartId q, const TransformSet& ts,
                       std::span<const Eigen::Vector3d> centroids, double gamma,
                       const Eigen::Vector3d& y);

/// Closed-form minimizer of joint_objective. When the system is rank
/// deficient (smallest singular value below 1e-8 of the largest) the minimum
/// norm solution is shifted along the null space to the point nearest the
/// mean template-space centroid. Throws AmbiguousJoint when gamma = 0 and the
/// two parts move identically in every instance.
JointEstimate estimate_joint(PartId p, PartId q, const TransformSet& ts,
                             std::span<const Eigen::Vector3d> centroids, double gamma);

/// 0.1 * trace(sum_i A_i^T A_i) with A_i = R_ip - R_iq; 0.1 when that trace
/// vanishes.
double default_gamma(PartId p, PartId q, const TransformSet& ts);

struct ArticulatedModel {
  PartLabeling labeling;
  TransformSet transforms;
  std::vector<PartAdjacency> adjacency;
  std::vector<Joint> joints;  // parallel to adjacency
  std::vector<bool> ambiguous;
};

/// Adjacency, boundary centroids and one joint per adjacent pair. A negative
/// `gamma` selects default_gamma per pair.
ArticulatedModel build_skeleton(const RegisteredSet& set, const PartLabeling& labeling,
                                const TransformSet& transforms, double gamma);

}  // namespace artic
