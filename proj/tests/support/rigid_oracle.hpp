#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "artic/point_set.hpp"

namespace artic::testing {

// Least-squares residual of the best rotation on a rotation-vector grid, with
// the translation solved in closed form (centroid alignment). For a rotation
// R the residual is |d|^2 + |s|^2 - 2 tr(R^T S) over centered points, so each
// grid point costs a 3x3 contraction. A 5 degree sweep of the whole ball
// locates the basin; a 1 degree grid over +-6 degrees around it gives the
// answer.
class GridRotationOracle {
 public:
  GridRotationOracle(const PointSet& src, const PointSet& dst) {
    const auto n = static_cast<double>(src.size());
    Eigen::Vector3d cs = Eigen::Vector3d::Zero(), cd = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < src.size(); ++j) {
      cs += src[j];
      cd += dst[j];
    }
    cs /= n;
    cd /= n;
    cross_.setZero();
    for (std::size_t j = 0; j < src.size(); ++j) {
      const Eigen::Vector3d s = src[j] - cs, d = dst[j] - cd;
      norms_ += s.squaredNorm() + d.squaredNorm();
      cross_ += d * s.transpose();
    }
  }

  double residual(const Eigen::Vector3d& rotation_vector) const {
    const double angle = rotation_vector.norm();
    const Eigen::Matrix3d r =
        angle > 0.0 ? Eigen::AngleAxisd(angle, rotation_vector / angle).toRotationMatrix()
                    : Eigen::Matrix3d::Identity();
    return norms_ - 2.0 * (r.cwiseProduct(cross_)).sum();
  }

  double best() const {
    const double deg = std::numbers::pi / 180.0;
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    const int coarse = 36;  // 5 degree steps up to 180 degrees
    for (int a = -coarse; a <= coarse; ++a)
      for (int b = -coarse; b <= coarse; ++b)
        for (int c = -coarse; c <= coarse; ++c) {
          const Eigen::Vector3d v(a * 5 * deg, b * 5 * deg, c * 5 * deg);
          if (v.norm() > std::numbers::pi) continue;
          const double r = residual(v);
          if (r < best) {
            best = r;
            center = v;
          }
        }
    const Eigen::Vector3d base = center;
    for (int a = -6; a <= 6; ++a)
      for (int b = -6; b <= 6; ++b)
        for (int c = -6; c <= 6; ++c) {
          const Eigen::Vector3d v = base + Eigen::Vector3d(a, b, c) * deg;
          best = std::min(best, residual(v));
        }
    return best;
  }

 private:
  double norms_ = 0.0;
  Eigen::Matrix3d cross_;
};

}  // namespace artic::testing
