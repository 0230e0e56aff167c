#include "gite/graph/directed_graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>

#include "gite/error.hpp"

namespace gite::graph {

struct DirectedGraph::ReachCache {
  std::once_flag once;
  ReachSets sets;
};

namespace {

std::string where(std::span<const std::size_t> lines, std::size_t i) {
  if (!lines.empty()) return "line " + std::to_string(lines[i]);
  return "edge " + std::to_string(i);
}

}  // namespace

DirectedGraph DirectedGraph::from_edge_list(std::span<const Edge> edges, std::size_t n,
                                            std::span<const std::size_t> lines) {
  if (!lines.empty() && lines.size() != edges.size()) {
    throw UsageError("from_edge_list: line numbers do not match edge count");
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.src >= n || e.dst >= n) {
      throw IngestError(where(lines, i) + ": edge (" + std::to_string(e.src) + ", " +
                        std::to_string(e.dst) + ") out of range for " + std::to_string(n) +
                        " nodes");
    }
    if (e.src == e.dst) {
      throw IngestError(where(lines, i) + ": self-loop on node " + std::to_string(e.src));
    }
  }
  std::vector<Edge> sorted(edges.begin(), edges.end());
  std::sort(sorted.begin(), sorted.end(), [](const Edge& a, const Edge& b) {
    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
  });
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  return DirectedGraph(std::move(sorted), n);
}

DirectedGraph::DirectedGraph(std::vector<Edge> sorted_unique, std::size_t n)
    : n_(n), offsets_(n + 1, 0), deg_tilde_(n, 1), reach_(std::make_shared<ReachCache>()) {
  src_.reserve(sorted_unique.size());
  for (const Edge& e : sorted_unique) {
    src_.push_back(e.src);
    ++offsets_[e.dst + 1];
    ++deg_tilde_[e.dst];
  }
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] += offsets_[i];

  auto plain = std::make_shared<ag::EdgeList>();
  plain->num_nodes = n;
  plain->src = src_;
  plain->offsets = offsets_;
  plain->dst.reserve(src_.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) plain->dst.push_back(i);
  without_self_ = std::move(plain);

  auto self = std::make_shared<ag::EdgeList>();
  self->num_nodes = n;
  self->offsets.push_back(0);
  self->src.reserve(src_.size() + n);
  self->dst.reserve(src_.size() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      if (!placed && src_[e] > i) {
        self->src.push_back(i);
        self->dst.push_back(i);
        placed = true;
      }
      self->src.push_back(src_[e]);
      self->dst.push_back(i);
    }
    if (!placed) {
      self->src.push_back(i);
      self->dst.push_back(i);
    }
    self->offsets.push_back(self->src.size());
  }
  with_self_ = std::move(self);
}

std::vector<Edge> DirectedGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(src_.size());
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t e = offsets_[i]; e < offsets_[i + 1]; ++e) out.push_back({src_[e], i});
  return out;
}

std::span<const std::size_t> DirectedGraph::in_neighbors(std::size_t node) const {
  if (node >= n_) throw UsageError("in_neighbors: node " + std::to_string(node) + " out of range");
  return {src_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
}

const ReachSets& DirectedGraph::reach_sets() const {
  std::call_once(reach_->once, [this] {
    ReachSets sets(n_);
    std::vector<std::size_t> mark(n_, n_);
    std::vector<std::size_t> stack;
    for (std::size_t target = 0; target < n_; ++target) {
      stack.assign(1, target);
      mark[target] = target;
      while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        for (std::size_t u : in_neighbors(v)) {
          if (mark[u] == target) continue;
          mark[u] = target;
          sets[target].push_back(u);
          stack.push_back(u);
        }
      }
      // A cycle through target reaches target itself; it is excluded by definition.
      std::sort(sets[target].begin(), sets[target].end());
    }
    reach_->sets = std::move(sets);
  });
  return reach_->sets;
}

namespace {

std::size_t parse_id(std::string_view field, const std::string& at) {
  std::size_t value = 0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw IngestError(at + ": expected a non-negative node id, got '" + std::string(field) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

DirectedGraph read_edge_file(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw IngestError(path.string() + ": cannot open edge file");
  std::vector<Edge> edges;
  std::vector<std::size_t> lines;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body(line);
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    const std::string at = path.string() + ":" + std::to_string(line_no);
    const auto tab = body.find('\t');
    if (tab == std::string_view::npos) throw IngestError(at + ": expected src<TAB>dst");
    Edge e{parse_id(trim(body.substr(0, tab)), at), parse_id(trim(body.substr(tab + 1)), at)};
    max_id = std::max({max_id, e.src, e.dst});
    edges.push_back(e);
    lines.push_back(line_no);
  }
  if (n == 0 && !edges.empty()) n = max_id + 1;
  try {
    return DirectedGraph::from_edge_list(edges, n, lines);
  } catch (const IngestError& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
}

void write_edge_file(const std::filesystem::path& path, const DirectedGraph& graph) {
  std::ofstream out(path);
  if (!out) throw IngestError(path.string() + ": cannot write edge file");
  out << "# src\tdst\n";
  for (const Edge& e : graph.edges()) out << e.src << '\t' << e.dst << '\n';
  if (!out) throw IngestError(path.string() + ": write failed");
}

}  // namespace gite::graph
