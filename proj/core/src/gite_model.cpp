#include "gite/model/gite_model.hpp"

#include <optional>
#include <string>

#include "gite/balance/pfor.hpp"
#include "gite/error.hpp"
#include "gite/log.hpp"

namespace gite::model {

void ModelConfig::write(config::KeyValue& kv) const {
  kv.set("model.variant", to_string(variant));
  kv.set("model.layers", layers);
  kv.set("model.hidden", hidden);
  kv.set("model.proxy_width", proxy_width);
  kv.set("model.attention", layers::to_string(attention));
  kv.set("model.pi_eta", pi_eta);
  kv.set("model.pi_eta_learnable", pi_eta_learnable);
  kv.set("model.beta", beta);
  kv.set("model.lambda", lambda);
  kv.set("model.lambda_d", lambda_d);
  kv.set("model.lambda_p", lambda_p);
  kv.set("model.dropout", dropout);
  kv.set("model.sinkhorn_xi", sinkhorn.xi);
  kv.set("model.sinkhorn_max_iter", sinkhorn.max_iter);
  kv.set("model.sinkhorn_tol", sinkhorn.tol);
  kv.set("model.zscore_outcomes", zscore_outcomes);
  kv.set("model.seed", std::to_string(seed));
}

ModelConfig ModelConfig::read(const config::KeyValue& kv) {
  ModelConfig c;
  c.variant = parse_variant(kv.get("model.variant", to_string(c.variant)));
  c.layers = kv.get_size("model.layers", c.layers);
  c.hidden = kv.get_size("model.hidden", c.hidden);
  c.proxy_width = kv.get_size("model.proxy_width", c.proxy_width);
  c.attention = layers::parse_attention_form(kv.get("model.attention", layers::to_string(c.attention)));
  c.pi_eta = kv.get_double("model.pi_eta", c.pi_eta);
  c.pi_eta_learnable = kv.get_bool("model.pi_eta_learnable", c.pi_eta_learnable);
  c.beta = kv.get_double("model.beta", c.beta);
  c.lambda = kv.get_double("model.lambda", c.lambda);
  c.lambda_d = kv.get_double("model.lambda_d", c.lambda_d);
  c.lambda_p = kv.get_double("model.lambda_p", c.lambda_p);
  c.dropout = kv.get_double("model.dropout", c.dropout);
  c.sinkhorn.xi = kv.get_double("model.sinkhorn_xi", c.sinkhorn.xi);
  c.sinkhorn.max_iter = kv.get_size("model.sinkhorn_max_iter", c.sinkhorn.max_iter);
  c.sinkhorn.tol = kv.get_double("model.sinkhorn_tol", c.sinkhorn.tol);
  c.zscore_outcomes = kv.get_bool("model.zscore_outcomes", c.zscore_outcomes);
  c.seed = kv.get_u64("model.seed", c.seed);
  if (c.hidden == 0) throw ConfigError("model.hidden must be positive");
  if (c.proxy_width == 0) throw ConfigError("model.proxy_width must be positive");
  for (auto [name, v] : {std::pair{"beta", c.beta}, {"lambda", c.lambda}, {"lambda_d", c.lambda_d},
                         {"lambda_p", c.lambda_p}}) {
    if (!(v >= 0.0)) throw ConfigError(std::string("model.") + name + " must be >= 0");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  return c;
}

const std::vector<std::string>& ModelConfig::keys() {
  static const std::vector<std::string> k = [] {
    config::KeyValue kv;
    ModelConfig{}.write(kv);
    std::vector<std::string> out;
    for (const auto& [key, v] : kv.entries()) out.push_back(key);
    return out;
  }();
  return k;
}

GiteModel::GiteModel(const ModelConfig& config, const data::Dataset& dataset)
    : config_(config), traits_(model::traits(config.variant)) {
  if (dataset.split.train.empty()) throw UsageError("model: dataset has no training split");
  ag::Rng rng(config.seed);
  const std::size_t c = dataset.num_covariates();
  const std::size_t h = config.hidden;
  encoder_ = layers::Mlp("encoder", {c, h, h, h}, true, rng);
  std::size_t x_width = c, t_width = 1, s_width = 1;
  for (std::size_t l = 0; l < config.layers; ++l) {
    nim_.emplace_back("nim" + std::to_string(l), x_width, t_width, s_width, h, config.attention, rng);
    x_width = t_width = s_width = h;
  }
  const std::size_t joint = h + x_width + t_width;
  head0_ = layers::Mlp("head0", {joint, h, h, 1}, false, rng);
  head1_ = layers::Mlp("head1", {joint, h, h, 1}, false, rng);
  proxy_ = balance::Proxy(traits_.proxy, joint, config.proxy_width, h, rng);
  amplifier_ = layers::Amplifier(dataset.graph.deg_tilde(), dataset.split.train, config.pi_eta,
                                 config.pi_eta_learnable);
  if (config.zscore_outcomes) zscore_ = data::ZScore::fit(dataset.outcomes, dataset.split.train);
}

ForwardPass GiteModel::forward(ag::Tape& tape, const data::Dataset& dataset,
                               const layers::Mode& mode, bool record_attention) {
  ForwardPass out;
  out.state = layers::initial_state(tape, dataset.covariates, dataset.treatments);
  for (layers::NimLayer& layer : nim_) {
    out.state = layer.forward(tape, out.state, dataset.graph, traits_.wiring, &amplifier_,
                              record_attention ? &out.attention : nullptr);
  }
  out.z = encoder_.forward(tape, tape.constant(dataset.covariates));
  out.joint = ag::concat_cols({out.z, out.state.covariate, out.state.treatment});
  out.y0 = head0_.forward(tape, out.joint, mode);
  out.y1 = head1_.forward(tape, out.joint, mode);
  return out;
}

LossTerms GiteModel::loss(ag::Tape& tape, const data::Dataset& dataset, ag::Rng* rng, bool training,
                          PlanCache* plans) {
  layers::Mode mode{training, config_.dropout, rng};
  ForwardPass f = forward(tape, dataset, mode);
  const auto& train = dataset.split.train;

  const ag::Tensor y = zscore_.apply(dataset.outcomes);
  ag::Tensor control(dataset.num_nodes(), 1);
  for (std::size_t i = 0; i < control.size(); ++i) control[i] = 1.0 - dataset.treatments[i];
  const ag::Var factual = ag::add(ag::mul(f.y1, tape.constant(dataset.treatments)),
                                  ag::mul(f.y0, tape.constant(control)));
  ag::Tensor y_train(train.size(), 1);
  for (std::size_t r = 0; r < train.size(); ++r) y_train[r] = y[train[r]];
  const ag::Var mse = ag::mse(ag::gather_rows(factual, train), tape.constant(y_train));

  LossTerms terms;
  terms.factual = mse.value().item();
  ag::Var total = mse;

  std::vector<std::size_t> treated, untreated;
  for (std::size_t i : train) (dataset.treatments[i] == 1.0 ? treated : untreated).push_back(i);

  const double beta = traits_.balance ? config_.beta : 0.0;
  std::optional<ag::Var> proxied;
  auto proxy_of = [&]() -> ag::Var {
    if (!proxied) proxied = proxy_.forward(tape, ag::gather_rows(f.joint, train), mode);
    return *proxied;
  };

  if (beta > 0.0) {
    if (treated.empty() || untreated.empty()) {
      log::warn("loss: training split has a single treatment group; balancing term skipped");
      terms.balance_skipped = true;
    } else {
      std::size_t plan_index = 0;
      auto transport = [&](const ag::Var& cost) {
        if (plans != nullptr && plans->frozen) {
          if (plan_index >= plans->plans.size()) throw UsageError("loss: frozen plan cache too short");
          return ag::frobenius_dot(cost, plans->plans[plan_index++]);
        }
        const std::size_t k = plan_index++;
        const balance::Potentials* warm =
            plans != nullptr && k < plans->potentials.size() ? &plans->potentials[k] : nullptr;
        balance::SinkhornPlan plan = balance::sinkhorn(cost.value(), config_.sinkhorn, warm);
        if (plans != nullptr) {
          plans->plans.resize(std::max(plans->plans.size(), k + 1));
          plans->potentials.resize(std::max(plans->potentials.size(), k + 1));
          plans->plans[k] = plan.plan;
          plans->potentials[k] = std::move(plan.potentials);
        }
        terms.sinkhorn_iterations += plan.iterations;
        terms.sinkhorn_converged = terms.sinkhorn_converged && plan.converged;
        return ag::frobenius_dot(cost, plan.plan);
      };
      ag::Var w;
      if (traits_.separate_balance) {
        bool first = true;
        for (const ag::Var& rep : {f.z, f.state.covariate, f.state.treatment}) {
          const ag::Var part = transport(
              ag::pairwise_sq_dist(ag::gather_rows(rep, treated), ag::gather_rows(rep, untreated)));
          w = first ? part : ag::add(w, part);
          first = false;
        }
      } else {
        // Positions of the two groups within the training rows.
        std::vector<std::size_t> pos1, pos0;
        for (std::size_t r = 0; r < train.size(); ++r)
          (dataset.treatments[train[r]] == 1.0 ? pos1 : pos0).push_back(r);
        const ag::Var r_train = traits_.use_proxy ? proxy_of() : ag::gather_rows(f.joint, train);
        ag::Tensor y1(treated.size(), 1), y0(untreated.size(), 1);
        for (std::size_t k = 0; k < treated.size(); ++k) y1[k] = y[treated[k]];
        for (std::size_t k = 0; k < untreated.size(); ++k) y0[k] = y[untreated[k]];
        const ag::Var cost = balance::pfor_cost(
            ag::gather_rows(r_train, pos1), ag::gather_rows(r_train, pos0), tape.constant(y1),
            tape.constant(y0), ag::gather_rows(f.y1, untreated), ag::gather_rows(f.y0, treated),
            config_.lambda_d);
        w = transport(cost);
      }
      terms.balance = w.value().item();
      total = ag::add(total, ag::scale(w, beta));
    }
  }

  if (traits_.reconstruction && config_.lambda_p > 0.0) {
    const ag::Var rec = balance::reconstruction_loss(ag::gather_rows(f.joint, train), proxy_of());
    terms.reconstruction = rec.value().item();
    total = ag::add(total, ag::scale(rec, config_.lambda_p));
  }

  const double lambda = traits_.regularize ? config_.lambda : 0.0;
  if (lambda > 0.0) {
    std::vector<ag::Var> leaves;
    for (ag::Parameter* p : parameters()) leaves.push_back(tape.leaf(*p));
    const ag::Var pen = ag::l2_norm_sq(leaves);
    terms.penalty = pen.value().item();
    total = ag::add(total, ag::scale(pen, lambda));
  }
  terms.total = total;
  return terms;
}

Predictions GiteModel::predict(const data::Dataset& dataset) {
  ag::Tape tape;
  ForwardPass f = forward(tape, dataset, layers::Mode{});
  Predictions p;
  p.y0 = zscore_.invert(f.y0.value());
  p.y1 = zscore_.invert(f.y1.value());
  ag::Tensor diff(dataset.num_nodes(), 1);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f.y1.value()[i] - f.y0.value()[i];
  p.tau = zscore_.invert_effect(diff);
  p.factual = ag::Tensor(dataset.num_nodes(), 1);
  for (std::size_t i = 0; i < diff.size(); ++i)
    p.factual[i] = dataset.treatments[i] == 1.0 ? p.y1[i] : p.y0[i];
  return p;
}

std::vector<ag::Parameter*> GiteModel::parameters() {
  std::vector<ag::Parameter*> out;
  encoder_.collect(out);
  for (layers::NimLayer& l : nim_) l.collect(out);
  head0_.collect(out);
  head1_.collect(out);
  proxy_.collect(out);
  if (amplifier_.learnable() && amplifier_.enabled()) out.push_back(&amplifier_.pi_eta());
  return out;
}

}  // namespace gite::model
