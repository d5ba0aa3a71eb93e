#include "artic/rigid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

namespace artic {

namespace {

Eigen::Quaterniond canonical(Eigen::Quaterniond q) {
  // Leaving unit quaternions untouched keeps serialization round trips exact.
  if (std::abs(q.squaredNorm() - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) q.normalize();
  const double c[4] = {q.w(), q.x(), q.y(), q.z()};
  for (double v : c) {
    if (v != 0.0) {
      if (v < 0.0) q.coeffs() = -q.coeffs();
      break;
    }
  }
  return q;
}

}  // namespace

RigidTransform::RigidTransform(const Eigen::Quaterniond& rotation,
                               const Eigen::Vector3d& translation)
    : rotation_(canonical(rotation)), translation_(translation) {}

RigidTransform RigidTransform::about_pivot(const Eigen::Vector3d& axis, double angle,
                                           const Eigen::Vector3d& pivot) {
  const Eigen::Quaterniond q(Eigen::AngleAxisd(angle, axis.normalized()));
  return RigidTransform(q, pivot - q * pivot);
}

Eigen::Matrix4d RigidTransform::homogeneous() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return RigidTransform(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return RigidTransform(inv, -(inv * translation_));
}

kernels::AffineMap RigidTransform::affine_map() const {
  kernels::AffineMap m;
  const Eigen::Matrix3d r = rotation_matrix();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) m.rotation[3 * a + b] = r(a, b);
    m.translation[a] = translation_[a];
  }
  return m;
}

double rotation_angle_between(const RigidTransform& a, const RigidTransform& b) {
  // atan2 of the half-angle sine and cosine stays accurate near zero, unlike acos.
  const Eigen::Quaterniond rel = a.rotation().conjugate() * b.rotation();
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

RigidFit fit_rigid(const PointSet& src, const PointSet& dst, std::span<const double> weights) {
  if (src.size() != dst.size() || src.size() != weights.size())
    throw ParameterError("fit_rigid: source, target and weight counts differ");
  std::size_t effective = 0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("fit_rigid: negative weight");
    if (w > 0.0) ++effective;
  }

  const kernels::WeightedSums sums = kernels::weighted_sums(src, dst, weights);
  std::array<double, 3> cs{0, 0, 0}, cd{0, 0, 0};
  if (sums.weight > 0.0) {
    for (int k = 0; k < 3; ++k) {
      cs[k] = sums.src[k] / sums.weight;
      cd[k] = sums.dst[k] / sums.weight;
    }
  }
  const Eigen::Vector3d src_centroid(cs[0], cs[1], cs[2]);
  const Eigen::Vector3d dst_centroid(cd[0], cd[1], cd[2]);

  auto fallback = [&](const std::string& why) -> DegenerateFit {
    RigidFit fit{RigidTransform(Eigen::Quaterniond::Identity(), dst_centroid - src_centroid), 0.0};
    fit.residual = kernels::weighted_squared_residual(src, dst, weights, fit.transform.affine_map());
    return DegenerateFit("degenerate rigid fit: " + why, fit);
  };
  if (effective < 3)
    throw fallback("only " + std::to_string(effective) + " points carry weight");

  const kernels::CenteredMoments m = kernels::centered_moments(src, dst, weights, cs, cd);
  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> cov(m.src_cov.data());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> spread(cov, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = spread.eigenvalues();  // ascending
  if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2])
    throw fallback("weighted source points are collinear or coincident");

  // S_ab = sum w (s - cs)_a (d - cd)_b; the optimal rotation is the dominant
  // eigenvector of the symmetric 4x4 matrix built from S.
  const Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>> s(m.cross.data());
  const double sxx = s(0, 0), sxy = s(0, 1), sxz = s(0, 2);
  const double syx = s(1, 0), syy = s(1, 1), syz = s(1, 2);
  const double szx = s(2, 0), szy = s(2, 1), szz = s(2, 2);
  Eigen::Matrix4d n;
  n << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
       syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
       szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
       sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(n);
  const Eigen::Vector4d v = eig.eigenvectors().col(3);
  const Eigen::Quaterniond q(v[0], v[1], v[2], v[3]);

  RigidFit fit;
  fit.transform = RigidTransform(q, Eigen::Vector3d::Zero());
  fit.transform = RigidTransform(fit.transform.rotation(),
                                 dst_centroid - fit.transform.rotation() * src_centroid);
  fit.residual = kernels::weighted_squared_residual(src, dst, weights, fit.transform.affine_map());
  return fit;
}

RigidFit fit_rigid(const PointSet& src, const PointSet& dst) {
  const std::vector<double> ones(src.size(), 1.0);
  return fit_rigid(src, dst, ones);
}

RigidTransform local_transform(const RegisteredSet& set, std::size_t instance_index,
                               VertexId vertex, unsigned hop_radius) {
  if (instance_index >= set.instance_count())
    throw ParameterError("instance index out of range");
  if (vertex >= set.vertex_count()) throw ParameterError("vertex index out of range");
  if (hop_radius < 1) throw ParameterError("hop radius must be positive");
  const auto hood = hop_neighborhood(set.template_mesh().graph(), vertex, hop_radius);
  const PointSet src = set.template_mesh().points().gather(hood);
  const PointSet dst = set.instance(instance_index).gather(hood);
  return fit_rigid(src, dst).transform;
}

Vector6d transform_feature(const RigidTransform& t) {
  const Eigen::AngleAxisd aa(t.rotation());
  Vector6d f;
  f.head<3>() = aa.axis() * aa.angle();
  if (aa.angle() == 0.0) f.head<3>().setZero();
  f.tail<3>() = t.translation();
  return f;
}

RigidTransform transform_from_feature(const Vector6d& feature) {
  const Eigen::Vector3d rv = feature.head<3>();
  const double angle = rv.norm();
  const Eigen::Quaterniond q = angle > 0.0
                                   ? Eigen::Quaterniond(Eigen::AngleAxisd(angle, rv / angle))
                                   : Eigen::Quaterniond::Identity();
  return RigidTransform(q, feature.tail<3>());
}

std::vector<PartId> cluster_features(const Eigen::MatrixXd& features, std::size_t k,
                                     std::uint64_t seed, std::size_t max_iterations) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (k < 1 || k > n) throw ParameterError("cluster count must lie in [1, point count]");
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<std::size_t> chosen;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  chosen.push_back(first(rng));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (chosen.size() < k) {
    const auto last = static_cast<Eigen::Index>(chosen.back());
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      d2[j] = std::min(d2[j], (features.row(static_cast<Eigen::Index>(j)) - features.row(last))
                                  .squaredNorm());
      total += d2[j];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += d2[j];
        if (d2[j] > 0.0 && acc >= target) {
          pick = j;
          break;
        }
      }
      if (pick == n)
        for (std::size_t j = n; j-- > 0;)
          if (d2[j] > 0.0) {
            pick = j;
            break;
          }
    } else {
      for (std::size_t j = 0; j < n && pick == n; ++j)
        if (std::find(chosen.begin(), chosen.end(), j) == chosen.end()) pick = j;
    }
    chosen.push_back(pick);
  }

  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), features.cols());
  for (std::size_t c = 0; c < k; ++c)
    centroids.row(static_cast<Eigen::Index>(c)) =
        features.row(static_cast<Eigen::Index>(chosen[c]));

  std::vector<PartId> labels(n, 0), previous;
  std::vector<double> dist(n, 0.0);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    for (std::size_t j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (features.row(static_cast<Eigen::Index>(j)) -
                          centroids.row(static_cast<Eigen::Index>(c)))
                             .squaredNorm();
        if (d < best) {
          best = d;
          labels[j] = static_cast<PartId>(c);
        }
      }
      dist[j] = best;
    }
    std::vector<std::size_t> sizes(k, 0);
    for (PartId l : labels) ++sizes[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (sizes[labels[j]] <= 1) continue;
        if (far == n || dist[j] > dist[far]) far = j;
      }
      if (far == n) continue;
      --sizes[labels[far]];
      labels[far] = static_cast<PartId>(c);
      sizes[c] = 1;
      dist[far] = 0.0;
    }
    centroids.setZero();
    for (std::size_t j = 0; j < n; ++j)
      centroids.row(labels[j]) += features.row(static_cast<Eigen::Index>(j));
    for (std::size_t c = 0; c < k; ++c)
      if (sizes[c] > 0) centroids.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    if (labels == previous) break;
    previous = labels;
  }
  return labels;
}

}  // namespace artic
