#include "artic/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "artic/errors.hpp"

namespace artic::kernels {

namespace {

Backend detect() {
  if (const char* env = std::getenv("ARTIC_KERNELS")) {
    if (std::string(env) == "scalar") return Backend::scalar;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{detect()};
  return slot;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported;
#else
  return false;
#endif
}

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (backend == Backend::avx2 && !avx2_supported())
    throw ParameterError("AVX2 kernels requested on a CPU without AVX2/FMA");
  backend_slot().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

void accumulate_squared_residuals(const PointSet& src, const PointSet& dst, const AffineMap& map,
                                  double scale, std::span<double> out) {
  if (active_backend() == Backend::avx2)
    avx2::accumulate_squared_residuals(src, dst, map, scale, out);
  else
    scalar::accumulate_squared_residuals(src, dst, map, scale, out);
}

double weighted_squared_residual(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights, const AffineMap& map) {
  return active_backend() == Backend::avx2
             ? avx2::weighted_squared_residual(src, dst, weights, map)
             : scalar::weighted_squared_residual(src, dst, weights, map);
}

WeightedSums weighted_sums(const PointSet& src, const PointSet& dst,
                           std::span<const double> weights) {
  return active_backend() == Backend::avx2 ? avx2::weighted_sums(src, dst, weights)
                                           : scalar::weighted_sums(src, dst, weights);
}

CenteredMoments centered_moments(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights,
                                 const std::array<double, 3>& src_center,
                                 const std::array<double, 3>& dst_center) {
  return active_backend() == Backend::avx2
             ? avx2::centered_moments(src, dst, weights, src_center, dst_center)
             : scalar::centered_moments(src, dst, weights, src_center, dst_center);
}

}  // namespace artic::kernels
