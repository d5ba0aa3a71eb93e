#pragma once

#include <cstdint>
#include <vector>

namespace artic {

using PartId = std::uint32_t;

/// Per-vertex rigid-part assignment. Part ids are zero-based in memory and
/// lie in [0, part_count); file formats present them one-based.
struct PartLabeling {
  std::vector<PartId> labels;
  PartId part_count = 0;

  std::size_t vertex_count() const { return labels.size(); }

  /// Vertex count per part.
  std::vector<std::size_t> part_sizes() const {
    std::vector<std::size_t> sizes(part_count, 0);
    for (PartId l : labels) ++sizes[l];
    return sizes;
  }

  /// Throws StructuralError if a label is out of range; with `require_nonempty`
  /// also if some part has no vertex.
  void validate(bool require_nonempty = false) const;

  friend bool operator==(const PartLabeling&, const PartLabeling&) = default;
};

}  // namespace artic
