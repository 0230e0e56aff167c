#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gite/ag/tape.hpp"

namespace gite::ag {

struct GradCheckOptions {
  double step = 1e-5;
  /// Magnitudes below this are compared in absolute terms.
  double floor = 1e-4;
};

struct GradCheckResult {
  std::string name;
  /// max |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double max_error = 0.0;
  std::size_t entries = 0;
};

/// Builds a scalar on a fresh tape.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares tape gradients of `loss` with central differences over every
/// entry of every parameter. Parameters are restored afterwards.
GradCheckResult check_gradient(const std::string& name, const std::vector<Parameter*>& params,
                               const LossBuilder& loss, const GradCheckOptions& options = {});

}  // namespace gite::ag
