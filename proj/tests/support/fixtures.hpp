#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "artic/mesh.hpp"
#include "artic/rigid.hpp"

namespace artic::testing {

inline Graph path_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (VertexId v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  return Graph(n, edges);
}

inline Graph ring_graph(std::size_t n) {
  std::vector<Edge> edges;
  for (VertexId v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  if (n > 2) edges.emplace_back(0, static_cast<VertexId>(n - 1));
  return Graph::from_edges(n, edges);
}

// Zigzag triangle strip along x: vertex v at (v / 2, v % 2, 0).
inline Mesh strip_mesh(std::size_t n) {
  PointSet points;
  for (std::size_t v = 0; v < n; ++v)
    points.push_back({0.5 * static_cast<double>(v), static_cast<double>(v % 2), 0.0});
  std::vector<Triangle> triangles;
  for (VertexId v = 0; v + 2 < n; ++v) triangles.push_back({v, v + 1, v + 2});
  return Mesh(std::move(points), std::move(triangles));
}

// Axis-aligned unit cube, two triangles per face.
inline Mesh unit_cube_mesh() {
  PointSet points;
  for (int v = 0; v < 8; ++v) points.push_back({double(v & 1), double((v >> 1) & 1), double(v >> 2)});
  std::vector<Triangle> t = {{0, 1, 3}, {0, 3, 2}, {4, 7, 5}, {4, 6, 7}, {0, 5, 1}, {0, 4, 5},
                             {2, 3, 7}, {2, 7, 6}, {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3}};
  return Mesh(std::move(points), std::move(t));
}

inline Eigen::Vector3d random_vector(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline Eigen::Quaterniond random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q;
}

inline RigidTransform random_transform(std::mt19937_64& rng, double scale = 1.0) {
  return RigidTransform(random_rotation(rng), random_vector(rng, scale));
}

inline PointSet random_points(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  PointSet out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_vector(rng, scale));
  return out;
}

inline PointSet transformed(const PointSet& points, const RigidTransform& t) {
  PointSet out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out.set(i, t(points[i]));
  return out;
}

}  // namespace artic::testing
