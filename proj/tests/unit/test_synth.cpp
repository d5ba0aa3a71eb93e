#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "artic/errors.hpp"
#include "artic/synth.hpp"

using namespace artic;

namespace {

SynthSpec small_chain(std::size_t parts) {
  SynthSpec spec;
  spec.part_count = parts;
  spec.pose_count = 2;
  spec.vertices_per_segment = 200;
  return spec;
}

bool closed_manifold(const Mesh& mesh) {
  std::map<Edge, int> uses;
  for (const Triangle& t : mesh.triangles())
    for (int k = 0; k < 3; ++k) {
      VertexId a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[{a, b}];
    }
  for (const auto& [edge, count] : uses)
    if (count != 2) return false;
  return true;
}

void check_truth_invariants(const SynthResult& r, std::size_t parts) {
  const Mesh& mesh = r.set.template_mesh();
  CHECK(r.truth.labeling.part_count == parts);
  CHECK_NOTHROW(r.truth.labeling.validate(true));
  CHECK(r.truth.transforms.part_count() == parts);
  CHECK(r.truth.joints.size() == parts - 1);
  std::vector<VertexId> all(mesh.vertex_count());
  for (VertexId j = 0; j < all.size(); ++j) all[j] = j;
  CHECK(connected_components(mesh, all).size() == 1);
  CHECK(closed_manifold(mesh));
  const std::set<VertexId> band(r.truth.boundary_vertices.begin(), r.truth.boundary_vertices.end());
  CHECK(band.size() == r.truth.boundary_vertices.size());
  for (const auto& [a, b] : mesh.edges())
    if (r.truth.labeling.labels[a] != r.truth.labeling.labels[b]) {
      CHECK(band.count(a) == 1);
      CHECK(band.count(b) == 1);
    }
}

}  // namespace

TEST_CASE("voxel surfaces") {
  const Mesh one = voxel_surface({{0, 0, 0}}, 0.5);
  CHECK(one.vertex_count() == 8);
  CHECK(one.triangles().size() == 12);
  CHECK(mesh_resolution(one) > 0.0);
  const Mesh two = voxel_surface({{0, 0, 0}, {1, 0, 0}}, 1.0);
  CHECK(two.vertex_count() == 12);
  CHECK(two.triangles().size() == 20);
  CHECK(closed_manifold(two));
}

TEST_CASE("a single segment does not move") {
  const SynthResult r = generate(small_chain(1));
  check_truth_invariants(r, 1);
  for (std::size_t i = 0; i < r.set.instance_count(); ++i) {
    CHECK(r.truth.transforms(i, 0) == RigidTransform::identity());
    CHECK(r.set.instance(i) == r.set.template_mesh().points());
  }
}

TEST_CASE("a quarter turn of a hinge") {
  SynthSpec spec = small_chain(2);
  spec.pose_count = 1;
  spec.angles = {{M_PI / 2}};
  const SynthResult r = generate(spec);
  check_truth_invariants(r, 2);
  REQUIRE(r.truth.joints.size() == 1);
  CHECK((r.truth.joints[0].position - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
  CHECK(r.truth.joints[0].axis == Eigen::Vector3d::UnitZ());
  // (x, y, z) turns to (1 - y, x - 1, z) about (1, 0, 0).
  const PointSet& x = r.set.template_mesh().points();
  for (VertexId j = 0; j < x.size(); ++j) {
    const Eigen::Vector3d expected =
        r.truth.labeling.labels[j] == 0 ? x[j] : Eigen::Vector3d(1 - x[j].y(), x[j].x() - 1, x[j].z());
    CHECK((r.set.instance(0)[j] - expected).norm() < 1e-12);
  }
}

TEST_CASE("chain motions compose from the root") {
  SynthSpec spec = small_chain(3);
  spec.pose_count = 1;
  spec.angles = {{M_PI / 6, -M_PI / 4}};
  const SynthResult r = generate(spec);
  check_truth_invariants(r, 3);
  const RigidTransform first = RigidTransform::about_pivot(Eigen::Vector3d::UnitZ(), M_PI / 6, {1, 0, 0});
  const RigidTransform second = RigidTransform::about_pivot(Eigen::Vector3d::UnitY(), -M_PI / 4, {2, 0, 0});
  const RigidTransform expected = first * second;
  CHECK(rotation_angle_between(r.truth.transforms(0, 2), expected) < 1e-12);
  CHECK((r.truth.transforms(0, 2).translation() - expected.translation()).norm() < 1e-12);
  // Joints stay attached: both neighbours carry the pivot to the same place.
  for (const TrueJoint& joint : r.truth.joints) {
    const Eigen::Vector3d a = r.truth.transforms(0, joint.parts[0])(joint.position);
    const Eigen::Vector3d b = r.truth.transforms(0, joint.parts[1])(joint.position);
    CHECK((a - b).norm() < 1e-12);
  }
}

TEST_CASE("noise offsets are independent and centred") {
  SynthSpec spec = small_chain(3);
  spec.vertices_per_segment = 800;
  spec.pose_count = 4;
  const SynthResult clean = generate(spec);
  spec.noise_sigma = 0.02;
  const SynthResult noisy = generate(spec);
  CHECK(noisy.truth.transforms == clean.truth.transforms);
  CHECK(noisy.set.template_mesh().points() == clean.set.template_mesh().points());

  double sum = 0.0, square = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < clean.set.instance_count(); ++i)
    for (VertexId j = 0; j < clean.set.vertex_count(); ++j) {
      const Eigen::Vector3d d = noisy.set.instance(i)[j] - clean.set.instance(i)[j];
      for (int k = 0; k < 3; ++k) {
        sum += d[k];
        square += d[k] * d[k];
        ++n;
      }
    }
  const double mean = sum / n, variance = square / n - mean * mean;
  CHECK(std::abs(mean) <= 4 * 0.02 / std::sqrt(double(n)));
  // The sample variance has standard deviation sigma^2 sqrt(2 / n).
  CHECK(std::abs(variance - 0.0004) <= 4 * 0.0004 * std::sqrt(2.0 / n));

  CHECK(add_noise(clean.set, 0.0, 1).instance(0) == clean.set.instance(0));
  CHECK(add_noise(clean.set, 0.1, 5).instance(1) == add_noise(clean.set, 0.1, 5).instance(1));
  CHECK_THROWS_AS(add_noise(clean.set, -1.0, 1), ParameterError);
}

TEST_CASE("relative noise scales with the mesh resolution") {
  SynthSpec spec = small_chain(2);
  spec.noise_sigma = 0.5;
  spec.noise_relative = true;
  const SynthResult a = generate(spec);
  spec.noise_relative = false;
  spec.noise_sigma = 0.5 * mesh_resolution(a.set.template_mesh());
  const SynthResult b = generate(spec);
  CHECK(a.set.instance(0) == b.set.instance(0));
}

TEST_CASE("star figures") {
  SynthSpec spec = small_chain(5);
  spec.topology = Topology::star;
  const SynthResult r = generate(spec);
  check_truth_invariants(r, 5);
  for (const TrueJoint& joint : r.truth.joints) CHECK(joint.parts[0] == 0);
  spec.part_count = 8;
  CHECK_THROWS_AS(generate(spec), ParameterError);
}

TEST_CASE("generation is deterministic and validated") {
  SynthSpec spec = small_chain(3);
  spec.pose_count = 5;
  spec.noise_sigma = 0.01;
  const SynthResult a = generate(spec), b = generate(spec);
  CHECK(a.truth.transforms == b.truth.transforms);
  for (std::size_t i = 0; i < a.set.instance_count(); ++i) CHECK(a.set.instance(i) == b.set.instance(i));

  SynthSpec bad = small_chain(0);
  CHECK_THROWS_AS(generate(bad), ParameterError);
  bad = small_chain(3);
  bad.pose_count = 0;
  CHECK_THROWS_AS(generate(bad), ParameterError);
  bad = small_chain(3);
  bad.angles = {{0.1}};
  CHECK_THROWS_AS(generate(bad), ParameterError);
  bad = small_chain(3);
  bad.axes = {Eigen::Vector3d::UnitX()};
  CHECK_THROWS_AS(generate(bad), ParameterError);
}
