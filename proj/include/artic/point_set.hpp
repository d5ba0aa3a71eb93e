#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace artic {

/// 3D points in structure-of-arrays layout so the arithmetic kernels can
/// stream each coordinate.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t count) : x_(count), y_(count), z_(count) {}

  static PointSet from_points(std::span<const Eigen::Vector3d> points) {
    PointSet out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out.set(i, points[i]);
    return out;
  }

  std::size_t size() const { return x_.size(); }
  bool empty() const { return x_.empty(); }

  Eigen::Vector3d operator[](std::size_t i) const { return {x_[i], y_[i], z_[i]}; }

  void set(std::size_t i, const Eigen::Vector3d& p) {
    x_[i] = p.x();
    y_[i] = p.y();
    z_[i] = p.z();
  }

  void push_back(const Eigen::Vector3d& p) {
    x_.push_back(p.x());
    y_.push_back(p.y());
    z_.push_back(p.z());
  }

  void reserve(std::size_t n) {
    x_.reserve(n);
    y_.reserve(n);
    z_.reserve(n);
  }

  std::span<const double> xs() const { return x_; }
  std::span<const double> ys() const { return y_; }
  std::span<const double> zs() const { return z_; }

  /// Points at the given indices, in order.
  template <typename IndexRange>
  PointSet gather(const IndexRange& indices) const {
    PointSet out;
    out.reserve(std::size(indices));
    for (auto i : indices) out.push_back((*this)[static_cast<std::size_t>(i)]);
    return out;
  }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::vector<double> x_, y_, z_;
};

}  // namespace artic
