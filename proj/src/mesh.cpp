#include "artic/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

#include "artic/errors.hpp"

namespace artic {

void PartLabeling::validate(bool require_nonempty) const {
  std::vector<bool> seen(part_count, false);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] >= part_count)
      throw StructuralError("vertex " + std::to_string(j) + " has label " +
                            std::to_string(labels[j]) + " outside [0, " +
                            std::to_string(part_count) + ")");
    seen[labels[j]] = true;
  }
  if (require_nonempty) {
    for (PartId p = 0; p < part_count; ++p)
      if (!seen[p]) throw StructuralError("part " + std::to_string(p) + " has no vertices");
  }
}

Graph::Graph(std::size_t vertex_count, std::vector<Edge> edges)
    : vertex_count_(vertex_count), edges_(std::move(edges)) {
  std::vector<std::size_t> degree(vertex_count_, 0);
  for (const auto& [a, b] : edges_) {
    if (a >= b || b >= vertex_count_)
      throw StructuralError("graph edge (" + std::to_string(a) + "," + std::to_string(b) +
                            ") is not normalized or out of range");
    ++degree[a];
    ++degree[b];
  }
  offsets_.assign(vertex_count_ + 1, 0);
  for (std::size_t v = 0; v < vertex_count_; ++v) offsets_[v + 1] = offsets_[v] + degree[v];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [a, b] : edges_) {
    adjacency_[fill[a]++] = b;
    adjacency_[fill[b]++] = a;
  }
  for (std::size_t v = 0; v < vertex_count_; ++v)
    std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
              adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]));
}

Graph Graph::from_edges(std::size_t vertex_count, std::vector<Edge> edges) {
  for (auto& e : edges) {
    if (e.first == e.second) throw StructuralError("self-loop edge");
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Graph(vertex_count, std::move(edges));
}

std::vector<Edge> build_edges(std::span<const Triangle> triangles, std::size_t vertex_count) {
  std::vector<Edge> edges;
  edges.reserve(triangles.size() * 3);
  for (std::size_t f = 0; f < triangles.size(); ++f) {
    const auto& t = triangles[f];
    for (VertexId v : t) {
      if (v >= vertex_count)
        throw StructuralError("triangle " + std::to_string(f) + " references vertex " +
                              std::to_string(v) + " but the mesh has " +
                              std::to_string(vertex_count) + " vertices");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw StructuralError("triangle " + std::to_string(f) + " repeats a vertex index");
    for (int k = 0; k < 3; ++k) {
      VertexId a = t[k], b = t[(k + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

Mesh::Mesh(PointSet points, std::vector<Triangle> triangles)
    : points_(std::move(points)), triangles_(std::move(triangles)) {
  graph_ = Graph(points_.size(), build_edges(triangles_, points_.size()));
}

Mesh Mesh::with_points(PointSet points) const {
  if (points.size() != points_.size())
    throw StructuralError("replacement point count differs from mesh vertex count");
  Mesh out = *this;
  out.points_ = std::move(points);
  return out;
}

RegisteredSet::RegisteredSet(Mesh templ, std::vector<PointSet> instances)
    : template_(std::move(templ)), instances_(std::move(instances)) {
  if (instances_.empty()) throw ParameterError("a registered set needs at least one instance");
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (instances_[i].size() != template_.vertex_count())
      throw CorrespondenceError("instance " + std::to_string(i) + " has " +
                                std::to_string(instances_[i].size()) +
                                " points but the template has " +
                                std::to_string(template_.vertex_count()));
  }
}

std::vector<std::vector<VertexId>> connected_components(const Graph& graph,
                                                        std::span<const VertexId> subset) {
  const std::size_t n = graph.vertex_count();
  constexpr std::uint32_t outside = 0, unvisited = 1, visited = 2;
  std::vector<std::uint8_t> state(n, outside);
  for (VertexId v : subset) {
    if (v >= n) throw StructuralError("subset vertex " + std::to_string(v) + " out of range");
    state[v] = unvisited;
  }
  std::vector<VertexId> sorted(subset.begin(), subset.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<std::vector<VertexId>> components;
  std::vector<VertexId> stack;
  for (VertexId start : sorted) {
    if (state[start] != unvisited) continue;
    std::vector<VertexId> comp;
    state[start] = visited;
    stack.push_back(start);
    while (!stack.empty()) {
      VertexId v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (VertexId w : graph.neighbors(v)) {
        if (state[w] == unvisited) {
          state[w] = visited;
          stack.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  return components;
}

std::vector<std::vector<VertexId>> connected_components(const Mesh& mesh,
                                                        std::span<const VertexId> subset) {
  return connected_components(mesh.graph(), subset);
}

double mesh_resolution(const Mesh& mesh) {
  const auto& edges = mesh.edges();
  if (edges.empty()) throw StructuralError("mesh resolution is undefined for an edgeless mesh");
  std::vector<double> lengths;
  lengths.reserve(edges.size());
  const PointSet& p = mesh.points();
  for (const auto& [a, b] : edges) lengths.push_back((p[a] - p[b]).norm());
  const std::size_t mid = (lengths.size() - 1) / 2;
  std::nth_element(lengths.begin(), lengths.begin() + static_cast<std::ptrdiff_t>(mid),
                   lengths.end());
  return lengths[mid];
}

std::vector<std::uint32_t> hop_distances(const Graph& graph, std::span<const VertexId> sources) {
  std::vector<std::uint32_t> dist(graph.vertex_count(), unreachable_hops);
  std::deque<VertexId> queue;
  for (VertexId s : sources) {
    if (dist[s] != 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    VertexId v = queue.front();
    queue.pop_front();
    for (VertexId w : graph.neighbors(v)) {
      if (dist[w] == unreachable_hops) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

std::vector<VertexId> hop_neighborhood(const Graph& graph, VertexId center, unsigned radius) {
  std::vector<VertexId> out{center};
  std::vector<std::uint32_t> dist(graph.vertex_count(), unreachable_hops);
  dist[center] = 0;
  for (std::size_t head = 0; head < out.size(); ++head) {
    VertexId v = out[head];
    if (dist[v] == radius) continue;
    for (VertexId w : graph.neighbors(v)) {
      if (dist[w] == unreachable_hops) {
        dist[w] = dist[v] + 1;
        out.push_back(w);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Farthest-point seeding inside the component reachable from `first_seed`,
// writing labels offset..offset+count-1 into `labels`.
void patches_in_component(const Graph& graph, std::span<const VertexId> component,
                          std::size_t count, VertexId first_seed, PartId offset,
                          std::vector<PartId>& labels) {
  std::vector<VertexId> seeds{first_seed};
  std::vector<std::uint32_t> dist = hop_distances(graph, seeds);
  while (seeds.size() < count) {
    VertexId far = component.front();
    std::uint32_t best = 0;
    for (VertexId v : component) {  // component is sorted: ties keep the lowest index
      if (dist[v] > best) {
        best = dist[v];
        far = v;
      }
    }
    if (best == 0) break;  // every vertex already a seed
    seeds.push_back(far);
    const VertexId single[1] = {far};
    const auto from_new = hop_distances(graph, single);
    for (VertexId v : component) dist[v] = std::min(dist[v], from_new[v]);
  }

  // Nearest seed with ties to the lower seed index: in BFS order, a vertex
  // takes the smallest label among its neighbors one hop closer.
  std::vector<VertexId> order(component.begin(), component.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](VertexId a, VertexId b) { return dist[a] < dist[b]; });
  constexpr PartId none = std::numeric_limits<PartId>::max();
  for (VertexId v : component) labels[v] = none;
  for (std::size_t k = 0; k < seeds.size(); ++k) labels[seeds[k]] = offset + static_cast<PartId>(k);
  for (VertexId v : order) {
    if (dist[v] == 0) continue;
    PartId best = none;
    for (VertexId w : graph.neighbors(v))
      if (dist[w] + 1 == dist[v]) best = std::min(best, labels[w]);
    labels[v] = best;
  }
}

}  // namespace

PartLabeling farthest_point_patches(const Graph& graph, std::size_t patch_count,
                                    VertexId first_seed) {
  const std::size_t n = graph.vertex_count();
  if (patch_count < 1 || patch_count > n)
    throw ParameterError("patch count must lie in [1, vertex count]");
  if (first_seed >= n) throw ParameterError("first seed vertex out of range");
  const VertexId start[1] = {first_seed};
  const auto dist = hop_distances(graph, start);
  std::vector<VertexId> component;
  for (VertexId v = 0; v < n; ++v)
    if (dist[v] != unreachable_hops) component.push_back(v);
  if (component.size() != n)
    throw StructuralError("farthest_point_patches needs a connected graph");
  PartLabeling out;
  out.labels.assign(n, 0);
  patches_in_component(graph, component, patch_count, first_seed, 0, out.labels);
  out.part_count = static_cast<PartId>(patch_count);
  return out;
}

PartLabeling subdivide_patches(const Mesh& mesh, std::size_t patch_count, std::uint64_t seed) {
  const Graph& graph = mesh.graph();
  const std::size_t n = graph.vertex_count();
  if (patch_count < 1 || patch_count > n)
    throw ParameterError("patch count " + std::to_string(patch_count) + " outside [1, " +
                         std::to_string(n) + "]");

  std::vector<VertexId> all(n);
  for (VertexId v = 0; v < n; ++v) all[v] = v;
  const auto components = connected_components(graph, all);
  const std::size_t c = components.size();
  if (patch_count < c)
    throw ParameterError("patch count " + std::to_string(patch_count) +
                         " is below the number of mesh components (" + std::to_string(c) + ")");

  // Proportional allocation, at least one patch per component.
  std::vector<double> ideal(c);
  std::vector<std::size_t> alloc(c);
  std::size_t total = 0;
  for (std::size_t k = 0; k < c; ++k) {
    ideal[k] = static_cast<double>(patch_count) * static_cast<double>(components[k].size()) /
               static_cast<double>(n);
    alloc[k] = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(ideal[k])), 1,
                                       components[k].size());
    total += alloc[k];
  }
  while (total < patch_count) {
    std::size_t pick = c;
    for (std::size_t k = 0; k < c; ++k) {
      if (alloc[k] >= components[k].size()) continue;
      if (pick == c || ideal[k] - alloc[k] > ideal[pick] - alloc[pick]) pick = k;
    }
    ++alloc[pick];
    ++total;
  }
  while (total > patch_count) {
    std::size_t pick = c;
    for (std::size_t k = 0; k < c; ++k) {
      if (alloc[k] <= 1) continue;
      if (pick == c || ideal[k] - alloc[k] < ideal[pick] - alloc[pick]) pick = k;
    }
    --alloc[pick];
    --total;
  }

  std::mt19937_64 rng(seed);
  PartLabeling out;
  out.labels.assign(n, 0);
  PartId offset = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, components[k].size() - 1);
    const VertexId first = components[k][pick(rng)];
    patches_in_component(graph, components[k], alloc[k], first, offset, out.labels);
    offset += static_cast<PartId>(alloc[k]);
  }
  out.part_count = offset;
  return out;
}

}  // namespace artic
