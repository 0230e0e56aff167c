#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "gite/ag/edge_list.hpp"

namespace gite::graph {

/// Edge from `src` to `dst`: src's state flows into dst.
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;

  auto operator<=>(const Edge&) const = default;
};

/// For each node, the nodes with a directed path into it (itself excluded),
/// sorted ascending.
using ReachSets = std::vector<std::vector<std::size_t>>;

/// Immutable directed graph. Copies share cached derived data.
class DirectedGraph {
 public:
  DirectedGraph() : DirectedGraph(std::vector<Edge>{}, 0) {}

  /// Deduplicates edges. Throws IngestError naming the offending pair for
  /// out-of-range ids or self-loops; `lines`, when given, supplies a source
  /// line number for each pair.
  static DirectedGraph from_edge_list(std::span<const Edge> edges, std::size_t n,
                                      std::span<const std::size_t> lines = {});

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return src_.size(); }
  /// Edges ordered by (dst, src).
  std::vector<Edge> edges() const;

  /// Sources pointing at `node`, ascending.
  std::span<const std::size_t> in_neighbors(std::size_t node) const;
  /// |in_neighbors| + 1 per node.
  const std::vector<std::size_t>& deg_tilde() const { return deg_tilde_; }

  /// In-edges plus one self edge per node, grouped by destination.
  std::shared_ptr<const ag::EdgeList> aggregation_edges() const { return with_self_; }
  /// In-edges only, grouped by destination.
  std::shared_ptr<const ag::EdgeList> neighbor_edges() const { return without_self_; }

  /// Computed on first use, then cached. Thread-safe.
  const ReachSets& reach_sets() const;

 private:
  DirectedGraph(std::vector<Edge> sorted_unique, std::size_t n);

  struct ReachCache;

  std::size_t n_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> src_;
  std::vector<std::size_t> deg_tilde_;
  std::shared_ptr<const ag::EdgeList> with_self_;
  std::shared_ptr<const ag::EdgeList> without_self_;
  std::shared_ptr<ReachCache> reach_;
};

/// Reads `src<TAB>dst` lines; `#` starts a comment, blank lines are skipped.
/// Node count is `n`, or one more than the largest id when `n` is 0.
DirectedGraph read_edge_file(const std::filesystem::path& path, std::size_t n = 0);
void write_edge_file(const std::filesystem::path& path, const DirectedGraph& graph);

}  // namespace gite::graph
