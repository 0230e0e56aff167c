#pragma once

#include <cstddef>
#include <vector>

namespace gite::ag {

/// Message-passing pattern: edge e carries row `src[e]` into row `dst[e]`.
/// Edges are sorted by destination; `offsets` is the CSR index over them,
/// so the edges entering node i are [offsets[i], offsets[i + 1]).
struct EdgeList {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::vector<std::size_t> offsets;

  std::size_t num_edges() const { return src.size(); }
};

}  // namespace gite::ag
