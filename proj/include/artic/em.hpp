#pragma once

#include <cstdint>
#include <vector>

#include "artic/labeling.hpp"

namespace artic {

enum class InitMethod { patches, cluster };

struct EMConfig {
  std::size_t initial_part_count = 10;
  InitMethod init = InitMethod::patches;
  double tau = 0.9;
  /// sigma = sigma_multiple * mesh resolution.
  double sigma_multiple = 1.0;
  /// The schedule starts at this fraction of the target delta and multiplies
  /// delta by `delta_growth` per iteration until it reaches the target.
  double delta_start_fraction = 0.25;
  double delta_growth = 1.5;
  std::size_t max_iterations = 50;
  /// Relative objective change treated as converged at the target delta.
  double epsilon = 1e-6;
  unsigned hop_radius = default_hop_radius;
  std::uint64_t seed = 0;

  /// Throws ParameterError on out-of-domain values.
  void validate() const;
};

struct EMRecord {
  std::size_t iteration = 0;
  double delta = 0.0;
  double sigma_sq = 0.0;
  bool at_target = false;
  /// Log-likelihood objective at this iteration's delta: before the E-step,
  /// after the E-step, after splitting into connected parts, after the M-step.
  double objective_before = 0.0;
  double objective_after_e = 0.0;
  double objective_after_split = 0.0;
  double objective_after_m = 0.0;
  bool was_integral = true;
  /// The E-step result was rounded and scored below the previous labeling,
  /// which was kept instead.
  bool kept_previous = false;
  std::size_t part_count = 0;
  std::vector<std::size_t> part_sizes;
};

struct EMTrace {
  std::vector<EMRecord> records;
  bool converged = false;
};

struct EMResult {
  PartLabeling labeling;
  TransformSet transforms;
  EMTrace trace;
  /// Parameters at the target delta.
  ModelParams params;
};

/// Per (instance, part) rigid fit of the part's template vertices onto the
/// instance. Degenerate parts get the fallback fit, or the transform from
/// `previous` when that has the smaller residual. Throws StructuralError for an
/// empty part.
TransformSet m_step(const RegisteredSet& set, const PartLabeling& labeling,
                    const TransformSet* previous = nullptr);

/// Sum over vertices and instances of |z_ij - T_{i, l_j}(x_j)|^2.
double data_residual(const RegisteredSet& set, const TransformSet& ts, const PartLabeling& labeling);

/// Parameters at the target delta for this set and configuration.
ModelParams target_params(const RegisteredSet& set, const EMConfig& config);

/// Initial hypothesis: surface patches or clustered local transforms, followed
/// by an M-step.
PartModel initialize(const RegisteredSet& set, const EMConfig& config);

/// EM iterations from a given state. Each iteration runs the E-step, splits
/// parts into connected components, drops empty parts and runs the M-step;
/// delta then grows by the schedule, or convergence is tested once the target
/// is reached.
EMResult refine(const RegisteredSet& set, PartModel state, const EMConfig& config);

/// initialize followed by refine.
EMResult run_em(const RegisteredSet& set, const EMConfig& config);

}  // namespace artic
