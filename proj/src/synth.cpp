#include "artic/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "artic/errors.hpp"

namespace artic {

void SynthSpec::validate() const {
  if (part_count < 1) throw ParameterError("part count must be >= 1");
  if (topology == Topology::star && part_count > 7)
    throw ParameterError("a star has at most six arms");
  if (pose_count < 1) throw ParameterError("pose count must be >= 1");
  if (!(segment_length > 0.0) || !(radius > 0.0))
    throw ParameterError("segment dimensions must be positive");
  if (vertices_per_segment < 12) throw ParameterError("segments need at least 12 vertices");
  if (!(angle_span >= 0.0) || angle_span >= 2.0 * std::numbers::pi)
    throw ParameterError("angle span must lie in [0, 2 pi)");
  if (!(noise_sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
  if (!angles.empty()) {
    if (angles.size() != pose_count) throw ParameterError("one angle list per pose is required");
    for (const auto& pose : angles) {
      if (pose.size() != part_count - 1) throw ParameterError("one angle per joint is required");
      for (double a : pose)
        if (!(a > -std::numbers::pi && a < std::numbers::pi))
          throw ParameterError("hinge angles must lie in (-pi, pi)");
    }
  }
  if (!axes.empty()) {
    if (axes.size() != part_count - 1) throw ParameterError("one axis per joint is required");
    for (const auto& a : axes)
      if (!(a.norm() > 0.0)) throw ParameterError("hinge axes must be nonzero");
  }
}

Mesh voxel_surface(const std::vector<std::array<int, 3>>& voxels, double spacing) {
  const std::set<std::array<int, 3>> occupied(voxels.begin(), voxels.end());
  std::map<std::array<int, 3>, VertexId> corner_ids;
  PointSet points;
  std::vector<Triangle> triangles;
  auto corner = [&](std::array<int, 3> c) {
    auto [it, inserted] = corner_ids.try_emplace(c, static_cast<VertexId>(points.size()));
    if (inserted) points.push_back(Eigen::Vector3d(c[0], c[1], c[2]) * spacing);
    return it->second;
  };
  for (const auto& v : occupied) {
    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        auto n = v;
        n[axis] += side ? 1 : -1;
        if (occupied.count(n)) continue;
        // Face corners in the plane orthogonal to `axis`, wound outward.
        const int u = (axis + 1) % 3, w = (axis + 2) % 3;
        std::array<int, 3> base = v;
        base[axis] += side;
        std::array<std::array<int, 3>, 4> quad{base, base, base, base};
        quad[1][u] += 1;
        quad[2][u] += 1;
        quad[2][w] += 1;
        quad[3][w] += 1;
        if (!side) std::swap(quad[1], quad[3]);
        const VertexId a = corner(quad[0]), b = corner(quad[1]), c = corner(quad[2]),
                       d = corner(quad[3]);
        triangles.push_back({a, b, c});
        triangles.push_back({a, c, d});
      }
    }
  }
  return Mesh(std::move(points), std::move(triangles));
}

namespace {

struct Segment {
  std::array<int, 3> lo, hi;  // voxel index box [lo, hi)
  int parent = -1;
  int depth = 0;
  Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
};

bool contains_corner(const Segment& s, const std::array<int, 3>& c) {
  for (int k = 0; k < 3; ++k)
    if (c[k] < s.lo[k] || c[k] > s.hi[k]) return false;
  return true;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t K = spec.part_count;
  const std::size_t N = spec.pose_count;

  // Lateral surface per segment is about 8 * radius * length.
  const double h0 = std::sqrt(8.0 * spec.radius * spec.segment_length /
                              static_cast<double>(spec.vertices_per_segment));
  const int along = std::max(2, static_cast<int>(std::lround(spec.segment_length / h0)));
  const double h = spec.segment_length / along;
  int across = std::max(2, static_cast<int>(std::lround(2.0 * spec.radius / h)));
  across += across % 2;
  const int half = across / 2;

  std::vector<Segment> segments;
  if (spec.topology == Topology::chain) {
    for (std::size_t k = 0; k < K; ++k) {
      Segment s;
      s.lo = {static_cast<int>(k) * along, -half, -half};
      s.hi = {static_cast<int>(k + 1) * along, half, half};
      s.parent = static_cast<int>(k) - 1;
      s.depth = static_cast<int>(k);
      s.pivot = Eigen::Vector3d(static_cast<double>(k) * spec.segment_length, 0, 0);
      s.axis = k % 2 == 1 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
      segments.push_back(s);
    }
  } else {
    const int m = half + 1;
    Segment hub;
    hub.lo = {-m, -m, -m};
    hub.hi = {m, m, m};
    segments.push_back(hub);
    const int directions[6][2] = {{0, 1}, {0, -1}, {1, 1}, {1, -1}, {2, 1}, {2, -1}};
    for (std::size_t k = 1; k < K; ++k) {
      const int axis = directions[k - 1][0], sign = directions[k - 1][1];
      Segment s;
      s.lo = {-half, -half, -half};
      s.hi = {half, half, half};
      s.lo[axis] = sign > 0 ? m : -m - along;
      s.hi[axis] = sign > 0 ? m + along : -m;
      s.parent = 0;
      s.depth = 1;
      s.pivot = Eigen::Vector3d::Zero();
      s.pivot[axis] = sign * m * h;
      s.axis = Eigen::Vector3d::Unit((axis + 2) % 3);
      segments.push_back(s);
    }
  }
  if (!spec.axes.empty())
    for (std::size_t k = 1; k < K; ++k) segments[k].axis = spec.axes[k - 1].normalized();

  std::vector<std::array<int, 3>> voxels;
  for (const Segment& s : segments)
    for (int x = s.lo[0]; x < s.hi[0]; ++x)
      for (int y = s.lo[1]; y < s.hi[1]; ++y)
        for (int z = s.lo[2]; z < s.hi[2]; ++z) voxels.push_back({x, y, z});
  Mesh mesh = voxel_surface(voxels, h);

  // Grid corner of every vertex; shared corners go to the most proximal segment.
  PartLabeling labeling;
  labeling.part_count = static_cast<PartId>(K);
  labeling.labels.resize(mesh.vertex_count());
  for (VertexId j = 0; j < mesh.vertex_count(); ++j) {
    const Eigen::Vector3d p = mesh.points()[j] / h;
    const std::array<int, 3> c{static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())),
                               static_cast<int>(std::lround(p.z()))};
    int best = -1;
    for (std::size_t k = 0; k < K; ++k)
      if (contains_corner(segments[k], c) && (best < 0 || segments[k].depth < segments[best].depth))
        best = static_cast<int>(k);
    if (best < 0) throw StructuralError("voxel corner outside every segment");
    labeling.labels[j] = static_cast<PartId>(best);
  }

  // Hinge angles per pose and joint.
  std::vector<std::vector<double>> angles = spec.angles;
  if (angles.empty()) {
    angles.assign(N, std::vector<double>(K - 1, 0.0));
    std::mt19937_64 rng(spec.seed);
    for (std::size_t k = 0; k + 1 < K; ++k) {
      std::vector<double> sweep(N, 0.0);
      for (std::size_t i = 0; i < N; ++i)
        sweep[i] = N == 1 ? 0.0
                          : spec.angle_span * (static_cast<double>(i) / static_cast<double>(N - 1) - 0.5);
      std::shuffle(sweep.begin(), sweep.end(), rng);
      for (std::size_t i = 0; i < N; ++i) angles[i][k] = sweep[i];
    }
  }

  TransformSet transforms(N, K);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 1; k < K; ++k) {
      const Segment& s = segments[k];
      transforms(i, k) = transforms(i, static_cast<std::size_t>(s.parent)) *
                         RigidTransform::about_pivot(s.axis, angles[i][k - 1], s.pivot);
    }

  std::vector<PointSet> instances(N, PointSet(mesh.vertex_count()));
  for (std::size_t i = 0; i < N; ++i)
    for (VertexId j = 0; j < mesh.vertex_count(); ++j)
      instances[i].set(j, transforms(i, labeling.labels[j])(mesh.points()[j]));

  GroundTruth truth;
  for (std::size_t k = 1; k < K; ++k)
    truth.joints.push_back({{static_cast<PartId>(segments[k].parent), static_cast<PartId>(k)},
                            segments[k].pivot,
                            segments[k].axis});
  std::set<VertexId> band;
  for (const auto& [a, b] : mesh.edges())
    if (labeling.labels[a] != labeling.labels[b]) {
      band.insert(a);
      band.insert(b);
    }
  truth.boundary_vertices.assign(band.begin(), band.end());
  truth.labeling = std::move(labeling);
  truth.transforms = std::move(transforms);

  RegisteredSet set(std::move(mesh), std::move(instances));
  if (spec.noise_sigma > 0.0) {
    const double sigma =
        spec.noise_relative ? spec.noise_sigma * mesh_resolution(set.template_mesh()) : spec.noise_sigma;
    set = add_noise(set, sigma, spec.seed ^ 0x6e6f697365ull);
  }
  return {std::move(set), std::move(truth)};
}

RegisteredSet add_noise(const RegisteredSet& set, double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ParameterError("noise sigma must be >= 0");
  if (noise_sigma == 0.0) return set;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> offset(0.0, noise_sigma);
  std::vector<PointSet> noisy = set.instances();
  for (PointSet& z : noisy)
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double dx = offset(rng), dy = offset(rng), dz = offset(rng);
      z.set(j, z[j] + Eigen::Vector3d(dx, dy, dz));
    }
  return RegisteredSet(set.template_mesh(), std::move(noisy));
}

}  // namespace artic
