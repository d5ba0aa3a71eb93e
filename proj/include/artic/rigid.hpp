#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "artic/errors.hpp"
#include "artic/kernels.hpp"
#include "artic/mesh.hpp"

namespace artic {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Rotation (unit quaternion) followed by translation. The quaternion is kept
/// normalized with the canonical sign w >= 0 (first nonzero component
/// positive when w == 0).
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Eigen::Quaterniond& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return {}; }
  /// Rotation by `angle` about the axis through `pivot` along `axis`.
  static RigidTransform about_pivot(const Eigen::Vector3d& axis, double angle,
                                    const Eigen::Vector3d& pivot);

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix3d rotation_matrix() const { return rotation_.toRotationMatrix(); }
  Eigen::Matrix4d homogeneous() const;

  Eigen::Vector3d operator()(const Eigen::Vector3d& x) const {
    return rotation_ * x + translation_;
  }
  /// this ∘ other: applies `other` first.
  RigidTransform operator*(const RigidTransform& other) const;
  RigidTransform inverse() const;

  kernels::AffineMap affine_map() const;

  friend bool operator==(const RigidTransform& a, const RigidTransform& b) {
    return a.rotation_.coeffs() == b.rotation_.coeffs() && a.translation_ == b.translation_;
  }

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

inline Eigen::Vector3d apply(const RigidTransform& t, const Eigen::Vector3d& x) { return t(x); }

/// Angle (radians) of the relative rotation between two transforms.
double rotation_angle_between(const RigidTransform& a, const RigidTransform& b);

struct RigidFit {
  RigidTransform transform;
  double residual = 0.0;  // sum_j w_j |dst_j - T(src_j)|^2
};

/// Thrown when fewer than three points carry weight or the weighted source
/// points are collinear/coincident. Carries the fallback fit: identity
/// rotation, translation between the weighted centroids.
class DegenerateFit : public Error {
 public:
  DegenerateFit(const std::string& what, RigidFit fallback)
      : Error(what), fallback_(fallback) {}
  const RigidFit& fallback() const { return fallback_; }

 private:
  RigidFit fallback_;
};

/// Weighted least-squares rigid alignment of src onto dst by the closed-form
/// quaternion method. Throws DegenerateFit (see above) or ParameterError on
/// mismatched sizes / negative weights.
RigidFit fit_rigid(const PointSet& src, const PointSet& dst, std::span<const double> weights);
/// Unit weights.
RigidFit fit_rigid(const PointSet& src, const PointSet& dst);

inline constexpr unsigned default_hop_radius = 2;

/// Rigid motion of the hop neighborhood of `vertex` from the template into
/// instance `instance_index`, unit weights.
RigidTransform local_transform(const RegisteredSet& set, std::size_t instance_index,
                               VertexId vertex, unsigned hop_radius = default_hop_radius);

/// (rotation vector in radians, translation).
Vector6d transform_feature(const RigidTransform& t);
/// Inverse of transform_feature for rotation angles below pi.
RigidTransform transform_from_feature(const Vector6d& feature);

/// k-means over the rows of `features` with k-means++ seeding; stops on
/// unchanged labels or after `max_iterations`. An emptied cluster is reseeded
/// with the point farthest from its own centroid. Labels in [0, k).
std::vector<PartId> cluster_features(const Eigen::MatrixXd& features, std::size_t k,
                                     std::uint64_t seed, std::size_t max_iterations = 100);

}  // namespace artic
