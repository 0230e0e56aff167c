#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gite/ag/tensor.hpp"
#include "gite/graph/directed_graph.hpp"

namespace gite::metrics {

enum class Aggregator { mean, gcn, gat, max_pool, nim_plain, nim_amplified };

std::string to_string(Aggregator a);
const std::vector<Aggregator>& all_aggregators();

enum class Verdict { degenerate, separated };

std::string to_string(Verdict v);

/// One aggregator applied to two disjoint local networks whose nodes all
/// carry the same vector. Local networks are stars (leaves pointing at the
/// center) except for gcn, which uses cliques so every degree is equal.
struct PropCase {
  Aggregator aggregator = Aggregator::mean;
  std::size_t m = 0;
  std::size_t n = 0;
  Verdict expected = Verdict::degenerate;
  Verdict measured = Verdict::degenerate;
  /// Largest absolute difference between the two center outputs.
  double gap = 0.0;
  /// |center_m| / |center_n| and its predicted value (amplified NIM only).
  double ratio = 1.0;
  double expected_ratio = 1.0;
  bool passed = false;
};

struct PropcheckOptions {
  std::size_t feature_width = 4;
  std::size_t hidden = 8;
  double ratio_tolerance = 1e-9;
  std::uint64_t seed = 7;
};

/// Two disjoint local networks: centers 0 and m + 1 (leaves point at them),
/// or cliques on nodes [0, m] and [m + 1, m + n + 1].
graph::DirectedGraph twin_stars(std::size_t m, std::size_t n);
graph::DirectedGraph twin_cliques(std::size_t m, std::size_t n);

/// Center outputs for the two local networks, rows 0 and 1.
ag::Tensor center_outputs(Aggregator aggregator, std::size_t m, std::size_t n,
                          const PropcheckOptions& options = {});

PropCase run_case(Aggregator aggregator, std::size_t m, std::size_t n,
                  const PropcheckOptions& options = {});

struct PropReport {
  std::vector<PropCase> cases;
  /// Amplified gap strictly grows as n moves away from a fixed m.
  bool monotone = false;
  bool passed() const;
};

/// Every aggregator on each (m, n) pair, plus the monotonicity sweep over
/// n = m + 1 .. m + 8 for the first pair's m.
PropReport run_propcheck(const std::vector<Aggregator>& aggregators,
                         const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
                         const PropcheckOptions& options = {});

void write_report_csv(std::ostream& out, const PropReport& report);
void write_report_summary(std::ostream& out, const PropReport& report);

}  // namespace gite::metrics
