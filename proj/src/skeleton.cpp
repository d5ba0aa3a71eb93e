#include "artic/skeleton.hpp"

#include <algorithm>
#include <map>
#include <string>

#include <Eigen/SVD>

#include "artic/errors.hpp"

namespace artic {

std::vector<PartAdjacency> part_adjacency(const PartLabeling& labeling, const Mesh& mesh,
                                          std::size_t min_boundary_edges) {
  if (labeling.vertex_count() != mesh.vertex_count())
    throw ParameterError("labeling size does not match the mesh");
  labeling.validate();
  std::map<std::pair<PartId, PartId>, std::vector<Edge>> pairs;
  for (const Edge& e : mesh.edges()) {
    PartId a = labeling.labels[e.first], b = labeling.labels[e.second];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    pairs[{a, b}].push_back(e);
  }
  std::vector<PartAdjacency> out;
  for (auto& [key, edges] : pairs)
    if (edges.size() >= std::max<std::size_t>(min_boundary_edges, 1))
      out.push_back({{key.first, key.second}, std::move(edges)});
  return out;
}

std::vector<Eigen::Vector3d> boundary_centroids(const RegisteredSet& set,
                                                std::span<const Edge> cross_edges) {
  if (cross_edges.empty()) throw StructuralError("boundary centroid of an empty edge list");
  std::vector<Eigen::Vector3d> out;
  for (const PointSet& z : set.instances()) {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (const Edge& e : cross_edges) {
      if (e.first >= z.size() || e.second >= z.size())
        throw ParameterError("cross edge references a missing vertex");
      sum += 0.5 * (z[e.first] + z[e.second]);
    }
    out.push_back(sum / static_cast<double>(cross_edges.size()));
  }
  return out;
}

namespace {

void check_joint_inputs(PartId p, PartId q, const TransformSet& ts,
                        std::span<const Eigen::Vector3d> centroids, double gamma) {
  if (p == q) throw ParameterError("a joint needs two distinct parts");
  if (p >= ts.part_count() || q >= ts.part_count()) throw ParameterError("part id out of range");
  if (ts.instance_count() < 1) throw ParameterError("joint estimation needs an instance");
  if (centroids.size() != ts.instance_count())
    throw ParameterError("one boundary centroid per instance is required");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ParameterError("gamma must be >= 0");
}

}  // namespace

double joint_objective(PartId p, PartId q, const TransformSet& ts,
                       std::span<const Eigen::Vector3d> centroids, double gamma,
                       const Eigen::Vector3d& y) {
  check_joint_inputs(p, q, ts, centroids, gamma);
  double value = 0.0;
  for (std::size_t i = 0; i < ts.instance_count(); ++i) {
    const Eigen::Vector3d a = ts(i, p)(y), b = ts(i, q)(y);
    value += (a - b).squaredNorm() + gamma * (0.5 * (a + b) - centroids[i]).squaredNorm();
  }
  return value;
}

double default_gamma(PartId p, PartId q, const TransformSet& ts) {
  // trace(A^T A) is the squared Frobenius norm of A.
  double articulation = 0.0;
  for (std::size_t i = 0; i < ts.instance_count(); ++i)
    articulation += (ts(i, p).rotation_matrix() - ts(i, q).rotation_matrix()).squaredNorm();
  return articulation > 0.0 ? 0.1 * articulation : 0.1;
}

JointEstimate estimate_joint(PartId p, PartId q, const TransformSet& ts,
                             std::span<const Eigen::Vector3d> centroids, double gamma) {
  check_joint_inputs(p, q, ts, centroids, gamma);
  // Each instance contributes A y + b (difference of the two motions) and
  // M y + m (their average); the objective is quadratic in y.
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Vector3d template_centroid = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < ts.instance_count(); ++i) {
    const RigidTransform& tp = ts(i, p);
    const RigidTransform& tq = ts(i, q);
    const Eigen::Matrix3d a = tp.rotation_matrix() - tq.rotation_matrix();
    const Eigen::Vector3d b = tp.translation() - tq.translation();
    const Eigen::Matrix3d m = 0.5 * (tp.rotation_matrix() + tq.rotation_matrix());
    const Eigen::Vector3d mt = 0.5 * (tp.translation() + tq.translation());
    hessian += a.transpose() * a + gamma * m.transpose() * m;
    gradient += a.transpose() * b + gamma * m.transpose() * (mt - centroids[i]);
    template_centroid += 0.5 * (tp.inverse()(centroids[i]) + tq.inverse()(centroids[i]));
  }
  template_centroid /= static_cast<double>(ts.instance_count());

  JointEstimate out;
  out.joint.parts = {std::min(p, q), std::max(p, q)};
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(hessian, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0))
    throw AmbiguousJoint("parts " + std::to_string(p) + " and " + std::to_string(q) +
                         " move identically and no regularization was given");
  const double cutoff = 1e-8 * sv[0];
  Eigen::Vector3d y = Eigen::Vector3d::Zero();
  int rank = 0;
  for (int k = 0; k < 3; ++k)
    if (sv[k] > cutoff) {
      y -= svd.matrixV().col(k) * (svd.matrixU().col(k).dot(gradient) / sv[k]);
      ++rank;
    }
  if (rank < 3) {
    out.ambiguous = true;
    for (int k = rank; k < 3; ++k) {
      const Eigen::Vector3d v = svd.matrixV().col(k);
      y += v * v.dot(template_centroid - y);
    }
  }
  out.joint.position = y;
  out.joint.residual = joint_objective(p, q, ts, centroids, gamma, y);
  return out;
}

ArticulatedModel build_skeleton(const RegisteredSet& set, const PartLabeling& labeling,
                                const TransformSet& transforms, double gamma) {
  ArticulatedModel model;
  model.labeling = labeling;
  model.transforms = transforms;
  model.adjacency = part_adjacency(labeling, set.template_mesh());
  for (const auto& adj : model.adjacency) {
    const auto centroids = boundary_centroids(set, adj.cross_edges);
    const auto [p, q] = adj.parts;
    const double g = gamma < 0.0 ? default_gamma(p, q, transforms) : gamma;
    const JointEstimate estimate = estimate_joint(p, q, transforms, centroids, g);
    model.joints.push_back(estimate.joint);
    model.ambiguous.push_back(estimate.ambiguous);
  }
  return model;
}

}  // namespace artic
