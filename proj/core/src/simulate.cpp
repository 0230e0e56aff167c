#include "gite/data/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gite/error.hpp"
#include "gite/log.hpp"

namespace gite::data {

GraphModel parse_graph_model(const std::string& text) {
  if (text == "preferential" || text == "ba") return GraphModel::preferential;
  if (text == "random" || text == "er") return GraphModel::random;
  throw ConfigError("graph model must be 'preferential' or 'random', got '" + text + "'");
}

std::string to_string(GraphModel g) {
  return g == GraphModel::preferential ? "preferential" : "random";
}

WeightLaw parse_weight_law(const std::string& text) {
  if (text == "normal") return WeightLaw::normal;
  if (text == "uniform") return WeightLaw::uniform;
  throw ConfigError("weight law must be 'normal' or 'uniform', got '" + text + "'");
}

std::string to_string(WeightLaw w) { return w == WeightLaw::normal ? "normal" : "uniform"; }

void SimConfig::write(config::KeyValue& kv) const {
  kv.set("sim.n", n);
  kv.set("sim.covariates", covariates);
  kv.set("sim.graph", to_string(graph));
  kv.set("sim.mean_degree", mean_degree);
  kv.set("sim.edge_probability", edge_probability);
  kv.set("sim.law", to_string(law));
  kv.set("sim.noise_std", noise_std);
  kv.set("sim.effect_scale", effect_scale);
  kv.set("sim.hops", hops);
  kv.set("sim.resample_edge_weights", resample_edge_weights);
  kv.set("sim.standardize_agg", standardize_agg);
  kv.set("sim.agg_outcome_scale", agg_outcome_scale);
  kv.set("sim.seed", std::to_string(seed));
}

SimConfig SimConfig::read(const config::KeyValue& kv) {
  SimConfig c;
  c.n = kv.get_size("sim.n", c.n);
  c.covariates = kv.get_size("sim.covariates", c.covariates);
  c.graph = parse_graph_model(kv.get("sim.graph", to_string(c.graph)));
  c.mean_degree = kv.get_double("sim.mean_degree", c.mean_degree);
  c.edge_probability = kv.get_double("sim.edge_probability", c.edge_probability);
  c.law = parse_weight_law(kv.get("sim.law", to_string(c.law)));
  c.noise_std = kv.get_double("sim.noise_std", c.noise_std);
  c.effect_scale = kv.get_double("sim.effect_scale", c.effect_scale);
  c.hops = kv.get_size("sim.hops", c.hops);
  c.resample_edge_weights = kv.get_bool("sim.resample_edge_weights", c.resample_edge_weights);
  c.standardize_agg = kv.get_bool("sim.standardize_agg", c.standardize_agg);
  c.agg_outcome_scale = kv.get_double("sim.agg_outcome_scale", c.agg_outcome_scale);
  c.seed = kv.get_u64("sim.seed", c.seed);
  return c;
}

const std::vector<std::string>& SimConfig::keys() {
  static const std::vector<std::string> k = [] {
    config::KeyValue kv;
    SimConfig{}.write(kv);
    std::vector<std::string> out;
    for (const auto& [key, v] : kv.entries()) out.push_back(key);
    return out;
  }();
  return k;
}

graph::DirectedGraph generate_graph(const SimConfig& config, std::mt19937_64& rng) {
  const std::size_t n = config.n;
  std::vector<graph::Edge> edges;
  if (config.graph == GraphModel::random) {
    double p = config.edge_probability;
    if (p == 0.0) p = n > 1 ? config.mean_degree / static_cast<double>(n - 1) : 0.0;
    if (p < 0.0 || p > 1.0) throw ConfigError("simulate: edge probability outside [0, 1]");
    std::bernoulli_distribution coin(p);
    for (std::size_t dst = 0; dst < n; ++dst)
      for (std::size_t src = 0; src < n; ++src)
        if (src != dst && coin(rng)) edges.push_back({src, dst});
    return graph::DirectedGraph::from_edge_list(edges, n);
  }

  const auto m = static_cast<std::size_t>(std::llround(config.mean_degree / 2.0));
  if (m == 0) return graph::DirectedGraph::from_edge_list(edges, n);
  if (m >= n) throw ConfigError("simulate: mean degree too large for n");
  // Seed clique on m + 1 nodes, then attach each new node to m distinct
  // targets drawn proportionally to degree.
  std::vector<std::size_t> endpoints;
  auto link = [&](std::size_t a, std::size_t b) {
    edges.push_back({a, b});
    edges.push_back({b, a});
    endpoints.push_back(a);
    endpoints.push_back(b);
  };
  for (std::size_t a = 0; a <= m; ++a)
    for (std::size_t b = a + 1; b <= m; ++b) link(a, b);
  std::vector<std::size_t> targets;
  for (std::size_t v = m + 1; v < n; ++v) {
    targets.clear();
    while (targets.size() < m) {
      std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
      const std::size_t u = endpoints[pick(rng)];
      if (std::find(targets.begin(), targets.end(), u) == targets.end()) targets.push_back(u);
    }
    for (std::size_t u : targets) link(v, u);
  }
  return graph::DirectedGraph::from_edge_list(edges, n);
}

ag::Tensor propagate(const graph::DirectedGraph& graph, const ag::Tensor& signal,
                     const std::vector<ag::Tensor>& edge_weights) {
  const auto edges = graph.neighbor_edges();
  ag::Tensor h = signal;
  for (const ag::Tensor& w : edge_weights) {
    if (w.size() != edges->num_edges()) throw ShapeError("propagate: edge weight count mismatch");
    ag::Tensor next(h.rows(), h.cols());
    for (std::size_t i = 0; i < edges->num_nodes; ++i)
      for (std::size_t e = edges->offsets[i]; e < edges->offsets[i + 1]; ++e)
        for (std::size_t j = 0; j < h.cols(); ++j) next(i, j) += w[e] * h(edges->src[e], j);
    h = std::move(next);
  }
  return h;
}

namespace {

ag::Tensor draw_weights(std::size_t c, WeightLaw law, double scale, std::mt19937_64& rng) {
  ag::Tensor w(c, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < c; ++i) w[i] = scale * (law == WeightLaw::normal ? normal(rng) : uniform(rng));
  return w;
}

double dot_row(const ag::Tensor& x, std::size_t i, const ag::Tensor& w) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) s += x(i, j) * w[j];
  return s;
}

ag::Tensor standardized(const ag::Tensor& x) {
  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x.data()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  ag::Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sd > 0.0 ? (x[i] - mean) / sd : 0.0;
  return out;
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Dataset simulate(const SimConfig& config, SimTrace* trace) {
  if (config.n < 2) throw ConfigError("simulate: need n >= 2");
  if (config.covariates == 0) throw ConfigError("simulate: need at least one covariate");
  if (!(config.noise_std >= 0.0)) throw ConfigError("simulate: noise_std must be >= 0");
  if (!(config.agg_outcome_scale >= 0.0)) throw ConfigError("simulate: agg_outcome_scale must be >= 0");
  const std::size_t n = config.n, c = config.covariates;
  std::mt19937_64 rng(config.seed);

  Dataset d;
  d.graph = generate_graph(config, rng);

  std::normal_distribution<double> normal(0.0, 1.0);
  d.covariates = ag::Tensor(n, c);
  for (std::size_t i = 0; i < d.covariates.size(); ++i) d.covariates[i] = normal(rng);

  SimTrace t;
  t.w_treat = draw_weights(c, config.law, 1.0, rng);
  t.w_graph = draw_weights(c, config.law, 1.0, rng);
  t.w_outcome = draw_weights(c, config.law, 1.0, rng);
  t.w_effect = draw_weights(c, config.law, config.effect_scale, rng);

  const auto& deg = d.graph.deg_tilde();
  double denom = 0.0;
  for (std::size_t k : deg) denom += std::log(static_cast<double>(k));
  t.eta = ag::Tensor(n, 1);
  if (denom > 0.0) {
    for (std::size_t i = 0; i < n; ++i) t.eta[i] = std::log(static_cast<double>(deg[i])) / denom;
  } else {
    log::warn("simulate: every node has degree 1; degree rescaling is zero");
  }

  t.covariate_signal = ag::Tensor(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    t.covariate_signal[i] = (1.0 + t.eta[i]) * dot_row(d.covariates, i, t.w_graph);

  const std::size_t m = d.graph.num_edges();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t draws = config.resample_edge_weights ? config.hops : (config.hops > 0 ? 1 : 0);
  std::vector<ag::Tensor> drawn;
  for (std::size_t h = 0; h < draws; ++h) {
    ag::Tensor w(m, 1);
    for (std::size_t e = 0; e < m; ++e) w[e] = unit(rng);
    drawn.push_back(std::move(w));
  }
  for (std::size_t h = 0; h < config.hops; ++h)
    t.edge_weights.push_back(config.resample_edge_weights ? drawn[h] : drawn[0]);

  t.agg_covariate = propagate(d.graph, t.covariate_signal, t.edge_weights);

  const ag::Tensor link_signal = config.standardize_agg ? standardized(t.agg_covariate) : t.agg_covariate;

  t.propensity = ag::Tensor(n, 1);
  d.treatments = ag::Tensor(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = sigmoid(0.5 * dot_row(d.covariates, i, t.w_treat) + 0.5 * link_signal[i]) +
                     config.noise_std * normal(rng);
    t.propensity[i] = std::clamp(p, 0.0, 1.0);
    d.treatments[i] = std::bernoulli_distribution(t.propensity[i])(rng) ? 1.0 : 0.0;
  }

  t.treatment_signal = ag::Tensor(n, 1);
  for (std::size_t i = 0; i < n; ++i) t.treatment_signal[i] = (1.0 + t.eta[i]) * d.treatments[i];
  t.agg_treatment = propagate(d.graph, t.treatment_signal, t.edge_weights);

  ag::Tensor outcome_x = t.agg_covariate, outcome_t = t.agg_treatment;
  if (config.agg_outcome_scale > 0.0) {
    outcome_x = standardized(outcome_x);
    outcome_t = standardized(outcome_t);
    for (std::size_t i = 0; i < n; ++i) {
      outcome_x[i] *= config.agg_outcome_scale;
      outcome_t[i] *= config.agg_outcome_scale;
    }
  }

  d.outcomes = ag::Tensor(n, 1);
  d.tau = ag::Tensor(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double effect = dot_row(d.covariates, i, t.w_effect);
    (*d.tau)[i] = effect;
    d.outcomes[i] = dot_row(d.covariates, i, t.w_outcome) + d.treatments[i] * effect +
                    outcome_x[i] + outcome_t[i] + config.noise_std * normal(rng);
  }
  d.tau_simulated = true;
  if (n >= 10) d.split = make_split(n, config.seed);
  d.validate();
  if (trace != nullptr) *trace = std::move(t);
  return d;
}

}  // namespace gite::data
