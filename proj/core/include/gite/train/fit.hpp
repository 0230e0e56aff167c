#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gite/config/key_value.hpp"
#include "gite/data/dataset.hpp"
#include "gite/metrics/metrics.hpp"
#include "gite/model/gite_model.hpp"
#include "gite/train/adam.hpp"

namespace gite::train {

struct TrainConfig {
  AdamOptions adam;
  std::size_t max_iterations = 2000;
  /// Validate every this many iterations.
  std::size_t validate_every = 10;
  /// Stop after this many validations without improvement; 0 disables.
  std::size_t patience = 20;
  /// Seeds the dropout stream.
  std::uint64_t seed = 0;

  void write(config::KeyValue& kv) const;
  static TrainConfig read(const config::KeyValue& kv);
  static const std::vector<std::string>& keys();
};

struct ValidationPoint {
  std::size_t iteration = 0;
  double sqrt_mse = 0.0;
};

struct History {
  /// Training loss evaluated before the update of each iteration.
  std::vector<double> loss;
  std::vector<ValidationPoint> validation;
  std::size_t iterations = 0;
  /// Iteration whose parameters were kept.
  std::size_t best_iteration = 0;
  std::optional<double> best_validation;
  bool stopped_early = false;
  std::size_t sinkhorn_unconverged = 0;
};

using Progress = std::function<void(std::size_t iteration, const model::LossTerms& terms)>;

/// Full-batch training with early stopping on validation sqrt-MSE. The
/// parameters of the best validation point are restored at the end. A
/// non-finite loss throws NumericError naming the last good iteration.
History fit(model::GiteModel& model, const data::Dataset& dataset, const TrainConfig& config,
            const Progress& progress = {});

/// sqrt-MSE of factual outcomes and, when the dataset has tau, sqrt-PEHE.
metrics::MetricsRecord evaluate(model::GiteModel& model, const data::Dataset& dataset, data::Part part);

/// Hyperparameter values to search. Empty lists keep the base value.
struct Grid {
  std::vector<double> beta;
  std::vector<double> lambda;
  std::vector<double> lambda_d;
  std::vector<double> lambda_p;

  /// Throws ConfigError for values outside the supported ranges:
  /// beta and lambda in (0, 0.2], lambda_d in {0.1, 0.5, 1, 5, 10},
  /// lambda_p in (0, 5].
  void validate() const;
  std::vector<model::ModelConfig> expand(const model::ModelConfig& base) const;
};

struct GridResult {
  model::ModelConfig best;
  double best_validation = 0.0;
  std::vector<std::pair<model::ModelConfig, double>> cells;
};

/// Trains every grid cell (in parallel on `workers` threads) and picks the
/// lowest validation sqrt-MSE. Ties keep the earlier cell.
GridResult grid_search(const data::Dataset& dataset, const model::ModelConfig& base,
                       const TrainConfig& train, const Grid& grid, std::size_t workers);

}  // namespace gite::train
