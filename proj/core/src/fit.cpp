#include "gite/train/fit.hpp"

#include <cmath>
#include <limits>

#include "gite/error.hpp"
#include "gite/train/parallel.hpp"

namespace gite::train {

void TrainConfig::write(config::KeyValue& kv) const {
  kv.set("train.learning_rate", adam.learning_rate);
  kv.set("train.weight_decay", adam.weight_decay);
  kv.set("train.beta1", adam.beta1);
  kv.set("train.beta2", adam.beta2);
  kv.set("train.eps", adam.eps);
  kv.set("train.max_iterations", max_iterations);
  kv.set("train.validate_every", validate_every);
  kv.set("train.patience", patience);
  kv.set("train.seed", std::to_string(seed));
}

TrainConfig TrainConfig::read(const config::KeyValue& kv) {
  TrainConfig c;
  c.adam.learning_rate = kv.get_double("train.learning_rate", c.adam.learning_rate);
  c.adam.weight_decay = kv.get_double("train.weight_decay", c.adam.weight_decay);
  c.adam.beta1 = kv.get_double("train.beta1", c.adam.beta1);
  c.adam.beta2 = kv.get_double("train.beta2", c.adam.beta2);
  c.adam.eps = kv.get_double("train.eps", c.adam.eps);
  c.max_iterations = kv.get_size("train.max_iterations", c.max_iterations);
  c.validate_every = kv.get_size("train.validate_every", c.validate_every);
  c.patience = kv.get_size("train.patience", c.patience);
  c.seed = kv.get_u64("train.seed", c.seed);
  if (c.validate_every == 0) throw ConfigError("train.validate_every must be positive");
  return c;
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    config::KeyValue kv;
    TrainConfig{}.write(kv);
    std::vector<std::string> out;
    for (const auto& [key, v] : kv.entries()) out.push_back(key);
    return out;
  }();
  return k;
}

metrics::MetricsRecord evaluate(model::GiteModel& model, const data::Dataset& dataset, data::Part part) {
  const model::Predictions p = model.predict(dataset);
  const std::vector<std::size_t> rows = dataset.indices(part);
  metrics::MetricsRecord r = metrics::compute_metrics(
      p.factual, dataset.outcomes, &p.tau, dataset.tau ? &*dataset.tau : nullptr, rows);
  r.split = data::to_string(part);
  r.variant = model::to_string(model.config().variant);
  r.seed = model.config().seed;
  return r;
}

namespace {

std::vector<ag::Tensor> snapshot(const std::vector<ag::Parameter*>& params) {
  std::vector<ag::Tensor> out;
  out.reserve(params.size());
  for (const ag::Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(const std::vector<ag::Parameter*>& params, const std::vector<ag::Tensor>& values) {
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
}

}  // namespace

History fit(model::GiteModel& model, const data::Dataset& dataset, const TrainConfig& config,
            const Progress& progress) {
  if (config.validate_every == 0) throw ConfigError("train.validate_every must be positive");
  const std::vector<ag::Parameter*> params = model.parameters();
  Adam adam(params, config.adam);
  ag::Rng rng(config.seed);
  History h;
  const bool validating = !dataset.split.val.empty();
  std::vector<ag::Tensor> best = snapshot(params);
  std::size_t stale = 0;

  auto validate = [&](std::size_t iteration) {
    if (!validating) return false;
    const double score = evaluate(model, dataset, data::Part::val).sqrt_mse;
    h.validation.push_back({iteration, score});
    if (!h.best_validation || score < *h.best_validation) {
      h.best_validation = score;
      h.best_iteration = iteration;
      best = snapshot(params);
      stale = 0;
    } else {
      ++stale;
    }
    return config.patience > 0 && stale >= config.patience;
  };

  validate(0);
  ag::Tape tape;
  // Transport potentials carry over between iterations as a warm start.
  model::PlanCache transport;
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    tape.reset();
    model::LossTerms terms;
    try {
      terms = model.loss(tape, dataset, &rng, true, &transport);
    } catch (const NumericError& e) {
      const std::string last = h.loss.empty() ? std::string("none")
                                              : std::to_string(it - 1) + " (loss " +
                                                    config::format_double(h.loss.back()) + ")";
      throw NumericError("fit: iteration " + std::to_string(it) + ": " + e.what() +
                         "; last good iteration " + last);
    }
    h.loss.push_back(terms.total.value().item());
    if (!terms.sinkhorn_converged) ++h.sinkhorn_unconverged;
    if (progress) progress(it, terms);
    tape.backward(terms.total);
    std::vector<ag::Tensor> grads;
    grads.reserve(params.size());
    for (const ag::Parameter* p : params) grads.push_back(tape.gradient(*p));
    adam.step(grads);
    h.iterations = it + 1;
    if (h.iterations % config.validate_every == 0 && validate(h.iterations)) {
      h.stopped_early = true;
      break;
    }
  }
  if (validating) {
    restore(params, best);
  } else {
    h.best_iteration = h.iterations;
  }
  return h;
}

void Grid::validate() const {
  for (double b : beta)
    if (!(b > 0.0 && b <= 0.2)) throw ConfigError("grid: beta must lie in (0, 0.2]");
  for (double l : lambda)
    if (!(l > 0.0 && l <= 0.2)) throw ConfigError("grid: lambda must lie in (0, 0.2]");
  for (double d : lambda_d)
    if (d != 0.1 && d != 0.5 && d != 1.0 && d != 5.0 && d != 10.0) {
      throw ConfigError("grid: lambda_d must be one of 0.1, 0.5, 1, 5, 10");
    }
  for (double p : lambda_p)
    if (!(p > 0.0 && p <= 5.0)) throw ConfigError("grid: lambda_p must lie in (0, 5]");
}

std::vector<model::ModelConfig> Grid::expand(const model::ModelConfig& base) const {
  auto or_base = [](const std::vector<double>& v, double b) {
    return v.empty() ? std::vector<double>{b} : v;
  };
  std::vector<model::ModelConfig> out;
  for (double b : or_base(beta, base.beta))
    for (double l : or_base(lambda, base.lambda))
      for (double d : or_base(lambda_d, base.lambda_d))
        for (double p : or_base(lambda_p, base.lambda_p)) {
          model::ModelConfig c = base;
          c.beta = b;
          c.lambda = l;
          c.lambda_d = d;
          c.lambda_p = p;
          out.push_back(c);
        }
  return out;
}

GridResult grid_search(const data::Dataset& dataset, const model::ModelConfig& base,
                       const TrainConfig& train, const Grid& grid, std::size_t workers) {
  grid.validate();
  if (dataset.split.val.empty()) throw UsageError("grid_search: dataset has no validation split");
  const std::vector<model::ModelConfig> cells = grid.expand(base);
  std::vector<double> scores(cells.size(), std::numeric_limits<double>::infinity());
  parallel_for(cells.size(), workers, [&](std::size_t i) {
    model::GiteModel m(cells[i], dataset);
    fit(m, dataset, train);
    scores[i] = evaluate(m, dataset, data::Part::val).sqrt_mse;
  });
  GridResult r;
  std::size_t best = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    r.cells.emplace_back(cells[i], scores[i]);
    if (scores[i] < scores[best]) best = i;
  }
  r.best = cells[best];
  r.best_validation = scores[best];
  return r;
}

}  // namespace gite::train
