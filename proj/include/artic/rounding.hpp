#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "artic/part_labeling.hpp"

namespace artic {

/// Kleinberg-Tardos phase rounding of per-vertex label distributions (rows of
/// `alpha`, J x P). Each phase draws a label p uniformly and a threshold theta
/// uniformly on (0, 1]; every unassigned vertex with alpha(j, p) >= theta takes
/// label p. Rows must be nonnegative and sum to 1 within 1e-6, otherwise
/// ParameterError. Deterministic given the seed; integral rows are preserved.
/// The separation penalty does not enter the rounding itself, so no edge list
/// is needed.
std::vector<PartId> kt_round(const Eigen::MatrixXd& alpha, std::uint64_t seed);

}  // namespace artic
