#pragma once

#include <cstdint>
#include <vector>

namespace artic {

/// s-t max-flow / min-cut on a directed graph with real capacities (Dinic).
/// Nodes are 0..n-1; source and sink are implicit terminals.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t node_count);

  std::size_t node_count() const { return node_count_; }
  /// Arc u->v with capacity `cap` plus reverse arc v->u with `rev_cap`.
  void add_edge(std::uint32_t u, std::uint32_t v, double cap, double rev_cap = 0.0);
  /// Terminal capacities: source->u and u->sink.
  void add_terminal(std::uint32_t u, double from_source, double to_sink);

  double solve();
  /// After solve(): true if u is on the source side of a minimum cut.
  bool source_side(std::uint32_t u) const { return reached_[u]; }

 private:
  struct Arc {
    std::uint32_t to;
    double cap;
  };
  void add_arc(std::uint32_t u, std::uint32_t v, double cap, double rev_cap);
  bool bfs();
  double dfs(std::uint32_t u, double pushed);

  std::size_t node_count_;
  std::uint32_t source_, sink_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<std::uint32_t>> out_;
  std::vector<int> level_;
  std::vector<std::size_t> cursor_;
  std::vector<bool> reached_;
  double epsilon_ = 0.0;
};

}  // namespace artic
