#include "artic/eval.hpp"

#include <algorithm>
#include <limits>

#include "artic/errors.hpp"

namespace artic {

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  if (n == 0) return {};
  // Minimization form on a padded square matrix; O(n^3) potentials method.
  double top = 0.0;
  for (const auto& r : weight) for (double w : r) top = std::max(top, w);
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(n + 1, top));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) cost[r + 1][c + 1] = top - weight[r][c];
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t r = 1; r <= n; ++r) {
    match[0] = r;
    std::size_t c0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[c0] = true;
      const std::size_t r0 = match[c0];
      double delta = inf;
      std::size_t c1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = cost[r0][c] - u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = c0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          c1 = c;
        }
      }
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      c0 = c1;
    } while (match[c0] != 0);
    do {
      const std::size_t c1 = way[c0];
      match[c0] = match[c1];
      c0 = c1;
    } while (c0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t c = 1; c <= n; ++c)
    if (match[c] >= 1 && match[c] <= rows && c <= cols) out[match[c] - 1] = static_cast<int>(c - 1);
  return out;
}

EvalReport evaluate(const ModelFile& model, const GroundTruth& truth) {
  const std::size_t J = truth.labeling.vertex_count();
  if (model.labeling.vertex_count() != J)
    throw CorrespondenceError("model labels " + std::to_string(model.labeling.vertex_count()) +
                              " vertices, ground truth " + std::to_string(J));
  EvalReport report;
  report.true_parts = truth.labeling.part_count;
  report.model_parts = model.labeling.part_count;

  std::vector<bool> band(J, false);
  for (VertexId j : truth.boundary_vertices) band[j] = true;

  std::vector<std::vector<double>> overlap(report.model_parts, std::vector<double>(report.true_parts, 0.0));
  for (std::size_t j = 0; j < J; ++j)
    overlap[model.labeling.labels[j]][truth.labeling.labels[j]] += 1.0;
  const auto assignment = max_weight_assignment(overlap);
  report.part_match.resize(report.model_parts);
  std::vector<std::optional<PartId>> model_of_true(report.true_parts);
  for (std::size_t p = 0; p < report.model_parts; ++p)
    if (assignment[p] >= 0) {
      report.part_match[p] = static_cast<PartId>(assignment[p]);
      model_of_true[static_cast<std::size_t>(assignment[p])] = static_cast<PartId>(p);
    }

  for (std::size_t j = 0; j < J; ++j) {
    if (band[j]) continue;
    ++report.evaluated_vertices;
    const auto matched = report.part_match[model.labeling.labels[j]];
    if (matched && *matched == truth.labeling.labels[j]) ++report.correct_vertices;
  }
  report.label_accuracy = report.evaluated_vertices
                              ? static_cast<double>(report.correct_vertices) /
                                    static_cast<double>(report.evaluated_vertices)
                              : 0.0;

  for (const TrueJoint& tj : truth.joints) {
    JointError err;
    err.true_parts = tj.parts;
    const auto a = model_of_true[tj.parts[0]], b = model_of_true[tj.parts[1]];
    if (a && b) {
      const std::array<PartId, 2> want{std::min(*a, *b), std::max(*a, *b)};
      for (std::size_t k = 0; k < model.joints.size(); ++k) {
        std::array<PartId, 2> have = model.joints[k].parts;
        if (have[0] > have[1]) std::swap(have[0], have[1]);
        if (have == want) {
          err.model_joint = k;
          err.error = (model.joints[k].position - tj.position).norm();
        }
      }
    }
    report.max_joint_error = std::max(report.max_joint_error, err.error);
    report.joints.push_back(err);
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  std::string out = "{\n";
  out += "  \"true_parts\": " + std::to_string(report.true_parts) + ",\n";
  out += "  \"model_parts\": " + std::to_string(report.model_parts) + ",\n";
  out += "  \"part_count_match\": " + std::string(report.part_count_match() ? "true" : "false") + ",\n";
  out += "  \"evaluated_vertices\": " + std::to_string(report.evaluated_vertices) + ",\n";
  out += "  \"correct_vertices\": " + std::to_string(report.correct_vertices) + ",\n";
  out += "  \"label_accuracy\": " + format_double(report.label_accuracy) + ",\n";
  out += "  \"joints\": [";
  for (std::size_t k = 0; k < report.joints.size(); ++k) {
    const JointError& e = report.joints[k];
    out += k ? ",\n    " : "\n    ";
    out += "{\"true_parts\": [" + std::to_string(e.true_parts[0] + 1) + ", " +
           std::to_string(e.true_parts[1] + 1) + "], \"error\": ";
    out += std::isfinite(e.error) ? format_double(e.error) : "null";
    out += "}";
  }
  out += report.joints.empty() ? "],\n" : "\n  ],\n";
  out += "  \"max_joint_error\": ";
  out += std::isfinite(report.max_joint_error) ? format_double(report.max_joint_error) : "null";
  out += "\n}\n";
  return out;
}

}  // namespace artic
