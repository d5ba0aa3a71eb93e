#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "artic/part_labeling.hpp"
#include "artic/point_set.hpp"

namespace artic {

using VertexId = std::uint32_t;
using Triangle = std::array<VertexId, 3>;
/// Undirected edge stored with first < second.
using Edge = std::pair<VertexId, VertexId>;

/// Undirected vertex graph with CSR adjacency. Immutable after construction.
class Graph {
 public:
  Graph() = default;
  /// Edges must already be normalized (first < second), unique and in range.
  Graph(std::size_t vertex_count, std::vector<Edge> edges);

  /// Normalizes, deduplicates and sorts an arbitrary edge list.
  static Graph from_edges(std::size_t vertex_count, std::vector<Edge> edges);

  std::size_t vertex_count() const { return vertex_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const VertexId> neighbors(VertexId v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }
  std::size_t degree(VertexId v) const { return offsets_[v + 1] - offsets_[v]; }

 private:
  std::size_t vertex_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<VertexId> adjacency_;
};

/// Triangle mesh: points, triangles and the derived edge graph E(X).
class Mesh {
 public:
  Mesh() = default;
  /// Throws StructuralError on out-of-range or repeated triangle indices.
  Mesh(PointSet points, std::vector<Triangle> triangles);

  const PointSet& points() const { return points_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Graph& graph() const { return graph_; }
  const std::vector<Edge>& edges() const { return graph_.edges(); }
  std::size_t vertex_count() const { return points_.size(); }

  /// Same connectivity, different vertex positions (same count required).
  Mesh with_points(PointSet points) const;

 private:
  PointSet points_;
  std::vector<Triangle> triangles_;
  Graph graph_;
};

/// Template mesh plus N instance point arrays corresponded by vertex index.
class RegisteredSet {
 public:
  /// Throws CorrespondenceError if an instance size differs from the template,
  /// ParameterError if there are no instances.
  RegisteredSet(Mesh templ, std::vector<PointSet> instances);

  const Mesh& template_mesh() const { return template_; }
  const std::vector<PointSet>& instances() const { return instances_; }
  const PointSet& instance(std::size_t i) const { return instances_[i]; }
  std::size_t instance_count() const { return instances_.size(); }
  std::size_t vertex_count() const { return template_.vertex_count(); }

 private:
  Mesh template_;
  std::vector<PointSet> instances_;
};

/// Unique undirected edges of a triangle list, sorted lexicographically with
/// first < second. Throws StructuralError on bad triangles.
std::vector<Edge> build_edges(std::span<const Triangle> triangles, std::size_t vertex_count);

/// Connected components of the subgraph induced by `subset`, each sorted and
/// the list ordered by smallest member.
std::vector<std::vector<VertexId>> connected_components(const Graph& graph,
                                                        std::span<const VertexId> subset);
std::vector<std::vector<VertexId>> connected_components(const Mesh& mesh,
                                                        std::span<const VertexId> subset);

/// Median edge length (lower median for even counts).
double mesh_resolution(const Mesh& mesh);

/// Breadth-first hop distances from a set of sources; unreachable vertices get
/// `unreachable_hops`.
inline constexpr std::uint32_t unreachable_hops = 0xffffffffu;
std::vector<std::uint32_t> hop_distances(const Graph& graph, std::span<const VertexId> sources);

/// Vertices within `radius` hops of `center`, sorted.
std::vector<VertexId> hop_neighborhood(const Graph& graph, VertexId center, unsigned radius);

/// Surface patches for initialization: farthest-point seeds under hop distance,
/// then nearest-seed assignment with ties to the lower seed index. The first
/// seed of each component is drawn from `seed`. Labels are seed order.
PartLabeling subdivide_patches(const Mesh& mesh, std::size_t patch_count, std::uint64_t seed);

/// Deterministic core of subdivide_patches for a connected graph with a fixed
/// first seed vertex.
PartLabeling farthest_point_patches(const Graph& graph, std::size_t patch_count,
                                    VertexId first_seed);

}  // namespace artic
