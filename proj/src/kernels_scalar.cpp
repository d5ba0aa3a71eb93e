#include "artic/kernels.hpp"

namespace artic::kernels::scalar {

void accumulate_squared_residuals(const PointSet& src, const PointSet& dst, const AffineMap& map,
                                  double scale, std::span<double> out) {
  const auto& r = map.rotation;
  const auto& t = map.translation;
  const auto sx = src.xs(), sy = src.ys(), sz = src.zs();
  const auto dx = dst.xs(), dy = dst.ys(), dz = dst.zs();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double ex = dx[j] - (r[0] * sx[j] + r[1] * sy[j] + r[2] * sz[j] + t[0]);
    const double ey = dy[j] - (r[3] * sx[j] + r[4] * sy[j] + r[5] * sz[j] + t[1]);
    const double ez = dz[j] - (r[6] * sx[j] + r[7] * sy[j] + r[8] * sz[j] + t[2]);
    out[j] += scale * (ex * ex + ey * ey + ez * ez);
  }
}

double weighted_squared_residual(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights, const AffineMap& map) {
  const auto& r = map.rotation;
  const auto& t = map.translation;
  const auto sx = src.xs(), sy = src.ys(), sz = src.zs();
  const auto dx = dst.xs(), dy = dst.ys(), dz = dst.zs();
  double total = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double ex = dx[j] - (r[0] * sx[j] + r[1] * sy[j] + r[2] * sz[j] + t[0]);
    const double ey = dy[j] - (r[3] * sx[j] + r[4] * sy[j] + r[5] * sz[j] + t[1]);
    const double ez = dz[j] - (r[6] * sx[j] + r[7] * sy[j] + r[8] * sz[j] + t[2]);
    total += weights[j] * (ex * ex + ey * ey + ez * ez);
  }
  return total;
}

WeightedSums weighted_sums(const PointSet& src, const PointSet& dst,
                           std::span<const double> weights) {
  WeightedSums s;
  const auto sx = src.xs(), sy = src.ys(), sz = src.zs();
  const auto dx = dst.xs(), dy = dst.ys(), dz = dst.zs();
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double w = weights[j];
    s.weight += w;
    s.src[0] += w * sx[j];
    s.src[1] += w * sy[j];
    s.src[2] += w * sz[j];
    s.dst[0] += w * dx[j];
    s.dst[1] += w * dy[j];
    s.dst[2] += w * dz[j];
  }
  return s;
}

CenteredMoments centered_moments(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights,
                                 const std::array<double, 3>& src_center,
                                 const std::array<double, 3>& dst_center) {
  CenteredMoments m;
  const auto sx = src.xs(), sy = src.ys(), sz = src.zs();
  const auto dx = dst.xs(), dy = dst.ys(), dz = dst.zs();
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double w = weights[j];
    const double a[3] = {sx[j] - src_center[0], sy[j] - src_center[1], sz[j] - src_center[2]};
    const double b[3] = {dx[j] - dst_center[0], dy[j] - dst_center[1], dz[j] - dst_center[2]};
    for (int u = 0; u < 3; ++u) {
      const double wa = w * a[u];
      for (int v = 0; v < 3; ++v) {
        m.cross[3 * u + v] += wa * b[v];
        m.src_cov[3 * u + v] += wa * a[v];
      }
    }
  }
  return m;
}

}  // namespace artic::kernels::scalar
