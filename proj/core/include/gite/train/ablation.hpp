#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "gite/config/key_value.hpp"
#include "gite/data/simulate.hpp"
#include "gite/metrics/metrics.hpp"
#include "gite/model/gite_model.hpp"
#include "gite/train/fit.hpp"

namespace gite::train {

/// One simulated dataset per seed; every variant trains on each of them.
/// The seed replaces the simulation, initialization and dropout seeds.
struct AblationConfig {
  data::SimConfig sim;
  model::ModelConfig model;
  TrainConfig train;
  std::vector<model::Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::size_t workers = 1;

  /// `ablate.variants` (comma list), `ablate.seeds` (count, seeds 1..k) and
  /// `ablate.workers`, next to the sim/model/train keys.
  void write(config::KeyValue& kv) const;
  static AblationConfig read(const config::KeyValue& kv);
  static const std::vector<std::string>& keys();
};

struct AblationRun {
  model::Variant variant = model::Variant::full;
  std::uint64_t seed = 0;
  metrics::MetricsRecord test;
  std::size_t iterations = 0;
  std::size_t best_iteration = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
};

struct VariantSummary {
  model::Variant variant = model::Variant::full;
  metrics::Summary sqrt_mse;
  std::optional<metrics::Summary> sqrt_pehe;
};

struct AblationResult {
  /// Ordered by variant (config order), then seed.
  std::vector<AblationRun> runs;
  std::vector<VariantSummary> summary;

  const AblationRun& run(model::Variant v, std::uint64_t seed) const;
};

using RunDone = std::function<void(const AblationRun&)>;

/// Runs are independent and fan out over `workers` threads; results do not
/// depend on the worker count.
AblationResult run_ablation(const AblationConfig& config, const RunDone& done = {});

/// variant,sqrt_mse_mean,sqrt_mse_se,sqrt_pehe_mean,sqrt_pehe_se,runs
void write_ablation_table(std::ostream& out, const AblationResult& result);
/// One line per run.
void write_ablation_runs(std::ostream& out, const AblationResult& result);

}  // namespace gite::train
