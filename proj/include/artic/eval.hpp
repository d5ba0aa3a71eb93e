#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "artic/io.hpp"

namespace artic {

struct JointError {
  std::array<PartId, 2> true_parts;
  /// Index into the model's joints, if the matched parts have a joint.
  std::optional<std::size_t> model_joint;
  double error = std::numeric_limits<double>::infinity();
};

struct EvalReport {
  std::size_t true_parts = 0;
  std::size_t model_parts = 0;
  /// Vertices outside the boundary band, and how many of them carry the model
  /// part matched to their true part.
  std::size_t evaluated_vertices = 0;
  std::size_t correct_vertices = 0;
  double label_accuracy = 0.0;
  /// model part -> true part (or none) under the overlap-maximizing matching.
  std::vector<std::optional<PartId>> part_match;
  std::vector<JointError> joints;
  double max_joint_error = 0.0;

  bool part_count_match() const { return true_parts == model_parts; }
};

/// Matches model parts to true parts by maximum total vertex overlap
/// (Hungarian method), scores labels outside truth.boundary_vertices and
/// measures each true joint against the joint of its matched part pair.
EvalReport evaluate(const ModelFile& model, const GroundTruth& truth);

std::string report_to_json(const EvalReport& report);

/// Maximum-weight assignment on a rows x cols matrix; result[r] is the column
/// assigned to row r, or -1 when rows exceed columns.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

}  // namespace artic
