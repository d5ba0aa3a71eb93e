#include "artic/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "artic/errors.hpp"

namespace artic {

MaxFlow::MaxFlow(std::size_t node_count)
    : node_count_(node_count),
      source_(static_cast<std::uint32_t>(node_count)),
      sink_(static_cast<std::uint32_t>(node_count + 1)),
      out_(node_count + 2),
      reached_(node_count, false) {}

void MaxFlow::add_arc(std::uint32_t u, std::uint32_t v, double cap, double rev_cap) {
  if (!(cap >= 0.0) || !(rev_cap >= 0.0)) throw ParameterError("negative flow capacity");
  out_[u].push_back(static_cast<std::uint32_t>(arcs_.size()));
  arcs_.push_back({v, cap});
  out_[v].push_back(static_cast<std::uint32_t>(arcs_.size()));
  arcs_.push_back({u, rev_cap});
  if (std::isfinite(cap)) epsilon_ = std::max(epsilon_, cap);
  if (std::isfinite(rev_cap)) epsilon_ = std::max(epsilon_, rev_cap);
}

void MaxFlow::add_edge(std::uint32_t u, std::uint32_t v, double cap, double rev_cap) {
  if (u >= node_count_ || v >= node_count_) throw ParameterError("flow node out of range");
  add_arc(u, v, cap, rev_cap);
}

void MaxFlow::add_terminal(std::uint32_t u, double from_source, double to_sink) {
  if (u >= node_count_) throw ParameterError("flow node out of range");
  // Only the difference matters for the cut.
  const double common = std::min(from_source, to_sink);
  if (from_source - common > 0.0) add_arc(source_, u, from_source - common, 0.0);
  if (to_sink - common > 0.0) add_arc(u, sink_, to_sink - common, 0.0);
}

bool MaxFlow::bfs() {
  level_.assign(node_count_ + 2, -1);
  std::queue<std::uint32_t> queue;
  level_[source_] = 0;
  queue.push(source_);
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop();
    for (auto a : out_[u]) {
      if (arcs_[a].cap > epsilon_ && level_[arcs_[a].to] < 0) {
        level_[arcs_[a].to] = level_[u] + 1;
        queue.push(arcs_[a].to);
      }
    }
  }
  return level_[sink_] >= 0;
}

double MaxFlow::dfs(std::uint32_t u, double pushed) {
  if (u == sink_) return pushed;
  for (auto& i = cursor_[u]; i < out_[u].size(); ++i) {
    const auto a = out_[u][i];
    Arc& arc = arcs_[a];
    if (arc.cap <= epsilon_ || level_[arc.to] != level_[u] + 1) continue;
    const double got = dfs(arc.to, std::min(pushed, arc.cap));
    if (got > 0.0) {
      arc.cap -= got;
      arcs_[a ^ 1u].cap += got;
      return got;
    }
  }
  return 0.0;
}

double MaxFlow::solve() {
  // Residuals below this are treated as saturated.
  epsilon_ = 1e-13 * std::max(epsilon_, 1.0);
  double total = 0.0;
  while (bfs()) {
    cursor_.assign(node_count_ + 2, 0);
    while (const double f = dfs(source_, std::numeric_limits<double>::infinity())) total += f;
  }
  // level_ from the final BFS marks the source side.
  for (std::size_t u = 0; u < node_count_; ++u) reached_[u] = level_[u] >= 0;
  return total;
}

}  // namespace artic
