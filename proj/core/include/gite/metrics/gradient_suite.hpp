#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gite::metrics {

struct GradientCase {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t entries = 0;
  bool passed = false;
};

struct GradientReport {
  std::vector<GradientCase> cases;
  bool passed() const;
  double max_error() const;
};

/// Finite-difference sweep: every primitive (tolerance 1e-4), the layers,
/// the transport term, and the total loss of several variants on a 6-node
/// instance (tolerance 1e-3).
GradientReport run_gradient_suite(std::uint64_t seed = 11);

void write_gradient_report(std::ostream& out, const GradientReport& report);

}  // namespace gite::metrics
