#pragma once

// Data-parallel inner loops of the pipeline. Every kernel has a scalar
// reference implementation and an AVX2/FMA variant; the dispatching entry
// points pick one at runtime. The variants agree to rounding (the AVX2 path
// reassociates sums across four lanes and fuses multiply-adds).

#include <array>
#include <span>
#include <string_view>

#include "artic/point_set.hpp"

namespace artic::kernels {

enum class Backend { scalar, avx2 };

/// Row-major 3x3 rotation plus translation: p -> R p + t.
struct AffineMap {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};
};

struct WeightedSums {
  double weight = 0.0;
  std::array<double, 3> src{0, 0, 0};
  std::array<double, 3> dst{0, 0, 0};
};

/// Weighted second moments of two point sets about given centers.
struct CenteredMoments {
  std::array<double, 9> cross{};    // sum w (s - cs)(d - cd)^T, row-major
  std::array<double, 9> src_cov{};  // sum w (s - cs)(s - cs)^T, row-major
};

bool avx2_supported();
Backend active_backend();
/// Throws ParameterError when asking for AVX2 on a CPU without it.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

/// out[j] += scale * |dst_j - map(src_j)|^2 for every j.
void accumulate_squared_residuals(const PointSet& src, const PointSet& dst, const AffineMap& map,
                                  double scale, std::span<double> out);

/// sum_j w_j |dst_j - map(src_j)|^2.
double weighted_squared_residual(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights, const AffineMap& map);

WeightedSums weighted_sums(const PointSet& src, const PointSet& dst,
                           std::span<const double> weights);

CenteredMoments centered_moments(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights,
                                 const std::array<double, 3>& src_center,
                                 const std::array<double, 3>& dst_center);

namespace scalar {
void accumulate_squared_residuals(const PointSet& src, const PointSet& dst, const AffineMap& map,
                                  double scale, std::span<double> out);
double weighted_squared_residual(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights, const AffineMap& map);
WeightedSums weighted_sums(const PointSet& src, const PointSet& dst,
                           std::span<const double> weights);
CenteredMoments centered_moments(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights,
                                 const std::array<double, 3>& src_center,
                                 const std::array<double, 3>& dst_center);
}  // namespace scalar

namespace avx2 {
void accumulate_squared_residuals(const PointSet& src, const PointSet& dst, const AffineMap& map,
                                  double scale, std::span<double> out);
double weighted_squared_residual(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights, const AffineMap& map);
WeightedSums weighted_sums(const PointSet& src, const PointSet& dst,
                           std::span<const double> weights);
CenteredMoments centered_moments(const PointSet& src, const PointSet& dst,
                                 std::span<const double> weights,
                                 const std::array<double, 3>& src_center,
                                 const std::array<double, 3>& dst_center);
}  // namespace avx2

}  // namespace artic::kernels
