#include "artic/rounding.hpp"

#include <cmath>
#include <random>
#include <string>

#include "artic/errors.hpp"

namespace artic {

std::vector<PartId> kt_round(const Eigen::MatrixXd& alpha, std::uint64_t seed) {
  const auto rows = alpha.rows();
  const auto labels = alpha.cols();
  if (labels < 1) throw ParameterError("kt_round: no labels");
  for (Eigen::Index j = 0; j < rows; ++j) {
    double sum = 0.0;
    for (Eigen::Index p = 0; p < labels; ++p) {
      const double a = alpha(j, p);
      if (!std::isfinite(a) || a < -1e-9)
        throw ParameterError("kt_round: negative mass at vertex " + std::to_string(j));
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw ParameterError("kt_round: distribution of vertex " + std::to_string(j) +
                           " sums to " + std::to_string(sum));
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, labels - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PartId> out(static_cast<std::size_t>(rows), 0);
  std::vector<bool> assigned(static_cast<std::size_t>(rows), false);
  Eigen::Index remaining = rows;
  while (remaining > 0) {
    const Eigen::Index p = pick(rng);
    const double theta = 1.0 - unit(rng);
    for (Eigen::Index j = 0; j < rows; ++j) {
      if (assigned[j] || alpha(j, p) < theta) continue;
      assigned[j] = true;
      out[j] = static_cast<PartId>(p);
      --remaining;
    }
  }
  return out;
}

}  // namespace artic
