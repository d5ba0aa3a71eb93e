#include "artic/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define ARTIC_HAVE_X86 1
#define ARTIC_AVX2 __attribute__((target("avx2,fma")))
#else
#define ARTIC_HAVE_X86 0
#endif

namespace artic::kernels::avx2 {

#if ARTIC_HAVE_X86

namespace {

ARTIC_AVX2 inline double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

struct MapLanes {
  __m256d r[9];
  __m256d t[3];
};

ARTIC_AVX2 inline MapLanes broadcast(const AffineMap& map) {
  MapLanes m;
  for (int k = 0; k < 9; ++k) m.r[k] = _mm256_set1_pd(map.rotation[k]);
  for (int k = 0; k < 3; ++k) m.t[k] = _mm256_set1_pd(map.translation[k]);
  return m;
}

// Squared residual |d - (R s + t)|^2 for four consecutive points.
ARTIC_AVX2 inline __m256d residual4(const MapLanes& m, const double* sx, const double* sy,
                                    const double* sz, const double* dx, const double* dy,
                                    const double* dz) {
  const __m256d x = _mm256_loadu_pd(sx);
  const __m256d y = _mm256_loadu_pd(sy);
  const __m256d z = _mm256_loadu_pd(sz);
  __m256d px = _mm256_fmadd_pd(m.r[0], x, _mm256_fmadd_pd(m.r[1], y, _mm256_fmadd_pd(m.r[2], z, m.t[0])));
  __m256d py = _mm256_fmadd_pd(m.r[3], x, _mm256_fmadd_pd(m.r[4], y, _mm256_fmadd_pd(m.r[5], z, m.t[1])));
  __m256d pz = _mm256_fmadd_pd(m.r[6], x, _mm256_fmadd_pd(m.r[7], y, _mm256_fmadd_pd(m.r[8], z, m.t[2])));
  const __m256d ex = _mm256_sub_pd(_mm256_loadu_pd(dx), px);
  const __m256d ey = _mm256_sub_pd(_mm256_loadu_pd(dy), py);
  const __m256d ez = _mm256_sub_pd(_mm256_loadu_pd(dz), pz);
  return _mm256_fmadd_pd(ex, ex, _mm256_fmadd_pd(ey, ey, _mm256_mul_pd(ez, ez)));
}

}  // namespace

ARTIC_AVX2 void accumulate_squared_residuals(const PointSet& src, const PointSet& dst,
                                             const AffineMap& map, double scale,
                                             std::span<double> out) {
  const MapLanes m = broadcast(map);
  const __m256d vscale = _mm256_set1_pd(scale);
  const double *sx = src.xs().data(), *sy = src.ys().data(), *sz = src.zs().data();
  const double *dx = dst.xs().data(), *dy = dst.ys().data(), *dz = dst.zs().data();
  const std::size_t n = out.size();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d r2 = residual4(m, sx + j, sy + j, sz + j, dx + j, dy + j, dz + j);
    _mm256_storeu_pd(out.data() + j, _mm256_fmadd_pd(vscale, r2, _mm256_loadu_pd(out.data() + j)));
  }
  if (j < n) {
    const auto& r = map.rotation;
    const auto& t = map.translation;
    for (; j < n; ++j) {
      const double ex = dx[j] - (r[0] * sx[j] + r[1] * sy[j] + r[2] * sz[j] + t[0]);
      const double ey = dy[j] - (r[3] * sx[j] + r[4] * sy[j] + r[5] * sz[j] + t[1]);
      const double ez = dz[j] - (r[6] * sx[j] + r[7] * sy[j] + r[8] * sz[j] + t[2]);
      out[j] += scale * (ex * ex + ey * ey + ez * ez);
    }
  }
}

ARTIC_AVX2 double weighted_squared_residual(const PointSet& src, const PointSet& dst,
                                            std::span<const double> weights,
                                            const AffineMap& map) {
  const MapLanes m = broadcast(map);
  const double *sx = src.xs().data(), *sy = src.ys().data(), *sz = src.zs().data();
  const double *dx = dst.xs().data(), *dy = dst.ys().data(), *dz = dst.zs().data();
  const double* w = weights.data();
  const std::size_t n = weights.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d r2 = residual4(m, sx + j, sy + j, sz + j, dx + j, dy + j, dz + j);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + j), r2, acc);
  }
  double total = horizontal_sum(acc);
  const auto& r = map.rotation;
  const auto& t = map.translation;
  for (; j < n; ++j) {
    const double ex = dx[j] - (r[0] * sx[j] + r[1] * sy[j] + r[2] * sz[j] + t[0]);
    const double ey = dy[j] - (r[3] * sx[j] + r[4] * sy[j] + r[5] * sz[j] + t[1]);
    const double ez = dz[j] - (r[6] * sx[j] + r[7] * sy[j] + r[8] * sz[j] + t[2]);
    total += w[j] * (ex * ex + ey * ey + ez * ez);
  }
  return total;
}

ARTIC_AVX2 WeightedSums weighted_sums(const PointSet& src, const PointSet& dst,
                                      std::span<const double> weights) {
  const double *sx = src.xs().data(), *sy = src.ys().data(), *sz = src.zs().data();
  const double *dx = dst.xs().data(), *dy = dst.ys().data(), *dz = dst.zs().data();
  const double* w = weights.data();
  const std::size_t n = weights.size();
  __m256d aw = _mm256_setzero_pd();
  __m256d as[3] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd()};
  __m256d ad[3] = {_mm256_setzero_pd(), _mm256_setzero_pd(), _mm256_setzero_pd()};
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d vw = _mm256_loadu_pd(w + j);
    aw = _mm256_add_pd(aw, vw);
    as[0] = _mm256_fmadd_pd(vw, _mm256_loadu_pd(sx + j), as[0]);
    as[1] = _mm256_fmadd_pd(vw, _mm256_loadu_pd(sy + j), as[1]);
    as[2] = _mm256_fmadd_pd(vw, _mm256_loadu_pd(sz + j), as[2]);
    ad[0] = _mm256_fmadd_pd(vw, _mm256_loadu_pd(dx + j), ad[0]);
    ad[1] = _mm256_fmadd_pd(vw, _mm256_loadu_pd(dy + j), ad[1]);
    ad[2] = _mm256_fmadd_pd(vw, _mm256_loadu_pd(dz + j), ad[2]);
  }
  WeightedSums s;
  s.weight = horizontal_sum(aw);
  for (int k = 0; k < 3; ++k) {
    s.src[k] = horizontal_sum(as[k]);
    s.dst[k] = horizontal_sum(ad[k]);
  }
  for (; j < n; ++j) {
    s.weight += w[j];
    s.src[0] += w[j] * sx[j];
    s.src[1] += w[j] * sy[j];
    s.src[2] += w[j] * sz[j];
    s.dst[0] += w[j] * dx[j];
    s.dst[1] += w[j] * dy[j];
    s.dst[2] += w[j] * dz[j];
  }
  return s;
}

ARTIC_AVX2 CenteredMoments centered_moments(const PointSet& src, const PointSet& dst,
                                            std::span<const double> weights,
                                            const std::array<double, 3>& src_center,
                                            const std::array<double, 3>& dst_center) {
  const double *sx = src.xs().data(), *sy = src.ys().data(), *sz = src.zs().data();
  const double *dx = dst.xs().data(), *dy = dst.ys().data(), *dz = dst.zs().data();
  const double* w = weights.data();
  const std::size_t n = weights.size();
  const __m256d cs[3] = {_mm256_set1_pd(src_center[0]), _mm256_set1_pd(src_center[1]),
                         _mm256_set1_pd(src_center[2])};
  const __m256d cd[3] = {_mm256_set1_pd(dst_center[0]), _mm256_set1_pd(dst_center[1]),
                         _mm256_set1_pd(dst_center[2])};
  __m256d cross[9];
  __m256d cov[6];  // upper triangle: xx xy xz yy yz zz
  for (auto& c : cross) c = _mm256_setzero_pd();
  for (auto& c : cov) c = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d vw = _mm256_loadu_pd(w + j);
    const __m256d a[3] = {_mm256_sub_pd(_mm256_loadu_pd(sx + j), cs[0]),
                          _mm256_sub_pd(_mm256_loadu_pd(sy + j), cs[1]),
                          _mm256_sub_pd(_mm256_loadu_pd(sz + j), cs[2])};
    const __m256d b[3] = {_mm256_sub_pd(_mm256_loadu_pd(dx + j), cd[0]),
                          _mm256_sub_pd(_mm256_loadu_pd(dy + j), cd[1]),
                          _mm256_sub_pd(_mm256_loadu_pd(dz + j), cd[2])};
    for (int u = 0; u < 3; ++u) {
      const __m256d wa = _mm256_mul_pd(vw, a[u]);
      cross[3 * u + 0] = _mm256_fmadd_pd(wa, b[0], cross[3 * u + 0]);
      cross[3 * u + 1] = _mm256_fmadd_pd(wa, b[1], cross[3 * u + 1]);
      cross[3 * u + 2] = _mm256_fmadd_pd(wa, b[2], cross[3 * u + 2]);
    }
    const __m256d wx = _mm256_mul_pd(vw, a[0]);
    const __m256d wy = _mm256_mul_pd(vw, a[1]);
    cov[0] = _mm256_fmadd_pd(wx, a[0], cov[0]);
    cov[1] = _mm256_fmadd_pd(wx, a[1], cov[1]);
    cov[2] = _mm256_fmadd_pd(wx, a[2], cov[2]);
    cov[3] = _mm256_fmadd_pd(wy, a[1], cov[3]);
    cov[4] = _mm256_fmadd_pd(wy, a[2], cov[4]);
    cov[5] = _mm256_fmadd_pd(_mm256_mul_pd(vw, a[2]), a[2], cov[5]);
  }
  CenteredMoments m;
  for (int k = 0; k < 9; ++k) m.cross[k] = horizontal_sum(cross[k]);
  const int upper[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
  for (int k = 0; k < 6; ++k) {
    const double v = horizontal_sum(cov[k]);
    m.src_cov[3 * upper[k][0] + upper[k][1]] = v;
    m.src_cov[3 * upper[k][1] + upper[k][0]] = v;
  }
  for (; j < n; ++j) {
    const double a[3] = {sx[j] - src_center[0], sy[j] - src_center[1], sz[j] - src_center[2]};
    const double b[3] = {dx[j] - dst_center[0], dy[j] - dst_center[1], dz[j] - dst_center[2]};
    for (int u = 0; u < 3; ++u) {
      const double wa = w[j] * a[u];
      for (int v = 0; v < 3; ++v) {
        m.cross[3 * u + v] += wa * b[v];
        m.src_cov[3 * u + v] += wa * a[v];
      }
    }
  }
  return m;
}

#else  // no x86: the dispatcher never selects this backend

void accumulate_squared_residuals(const PointSet& src, const PointSet& dst, const AffineMap& map,
                                  double scale, std::span<double> out) {
  scalar::accumulate_squared_residuals(src, dst, map, scale, out);
}
double weighted_squared_residual(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights, const AffineMap& map) {
  return scalar::weighted_squared_residual(src, dst, weights, map);
}
WeightedSums weighted_sums(const PointSet& src, const PointSet& dst,
                           std::span<const double> weights) {
  return scalar::weighted_sums(src, dst, weights);
}
CenteredMoments centered_moments(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights,
                                 const std::array<double, 3>& src_center,
                                 const std::array<double, 3>& dst_center) {
  return scalar::centered_moments(src, dst, weights, src_center, dst_center);
}

#endif

}  // namespace artic::kernels::avx2
