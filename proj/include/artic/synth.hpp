#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "artic/skeleton.hpp"

namespace artic {

enum class Topology { chain, star };

/// Articulated box figure. A chain lays segments end to end along +x with
/// hinges at (k * length, 0, 0); a star has a hub (segment 0) with up to six
/// arms along +-x, +-y, +-z hinged at the hub faces.
struct SynthSpec {
  std::size_t part_count = 3;
  Topology topology = Topology::chain;
  double segment_length = 1.0;
  /// Half-width of the square cross-section (rounded to the grid).
  double radius = 0.15;
  /// Target surface vertices per segment; sets the grid spacing.
  std::size_t vertices_per_segment = 500;
  std::size_t pose_count = 5;
  /// Without explicit angles, each hinge sweeps evenly over
  /// [-angle_span / 2, angle_span / 2] across poses in a seeded order.
  double angle_span = 1.0471975511965976;  // 60 degrees
  /// Optional pose_count x (part_count - 1) hinge angles in radians.
  std::vector<std::vector<double>> angles;
  /// Optional hinge axes, one per joint.
  std::vector<Eigen::Vector3d> axes;
  double noise_sigma = 0.0;
  /// noise_sigma is a multiple of the template mesh resolution.
  bool noise_relative = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrueJoint {
  std::array<PartId, 2> parts;  // (parent, child)
  Eigen::Vector3d position;
  Eigen::Vector3d axis;
};

struct GroundTruth {
  PartLabeling labeling;
  TransformSet transforms;
  std::vector<TrueJoint> joints;
  /// Endpoints of mesh edges whose ends carry different true labels, sorted.
  std::vector<VertexId> boundary_vertices;
};

struct SynthResult {
  RegisteredSet set;
  GroundTruth truth;
};

/// Throws ParameterError for an invalid spec.
SynthResult generate(const SynthSpec& spec);

/// Independent N(0, noise_sigma^2) offsets on every instance coordinate.
RegisteredSet add_noise(const RegisteredSet& set, double noise_sigma, std::uint64_t seed);

/// Watertight surface of a union of unit voxels (integer coordinates of their
/// minimum corners) scaled by `spacing`: one quad per exposed face, split into
/// two triangles, with shared grid corners welded.
Mesh voxel_surface(const std::vector<std::array<int, 3>>& voxels, double spacing);

}  // namespace artic
