#include "gite/metrics/gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "gite/ag/gradcheck.hpp"
#include "gite/ag/ops.hpp"
#include "gite/balance/proxy.hpp"
#include "gite/balance/sinkhorn.hpp"
#include "gite/config/key_value.hpp"
#include "gite/data/dataset.hpp"
#include "gite/layers/attention.hpp"
#include "gite/layers/mlp.hpp"
#include "gite/layers/nim.hpp"
#include "gite/model/gite_model.hpp"

namespace gite::metrics {

bool GradientReport::passed() const {
  return !cases.empty() &&
         std::all_of(cases.begin(), cases.end(), [](const GradientCase& c) { return c.passed; });
}

double GradientReport::max_error() const {
  double m = 0.0;
  for (const GradientCase& c : cases) m = std::max(m, c.max_error);
  return m;
}

namespace {

constexpr double kPrimitiveTol = 1e-4;
constexpr double kCompositeTol = 1e-3;

ag::Tensor random_tensor(std::size_t r, std::size_t c, ag::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ag::Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

/// Projects an output onto a fixed random direction so every entry matters.
ag::Var readout(ag::Tape& tape, const ag::Var& out, const ag::Tensor& dir) {
  return ag::sum(ag::mul(out, tape.constant(dir)));
}

graph::DirectedGraph small_graph() {
  const std::vector<graph::Edge> edges = {{1, 0}, {2, 0}, {3, 0}, {0, 1}, {2, 1},
                                          {4, 2}, {0, 3}, {1, 4}, {3, 4}};
  return graph::DirectedGraph::from_edge_list(edges, 5);
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  GradientReport report;

  void check(const std::string& name, const std::vector<ag::Parameter*>& params,
             const ag::LossBuilder& loss, double tol) {
    const ag::GradCheckResult r = ag::check_gradient(name, params, loss);
    report.cases.push_back({name, r.max_error, tol, r.entries, r.max_error < tol});
  }

  ag::Parameter param(const std::string& name, std::size_t r, std::size_t c) {
    return {name, random_tensor(r, c, rng_)};
  }
  ag::Tensor dir(std::size_t r, std::size_t c) { return random_tensor(r, c, rng_); }
  ag::Rng& rng() { return rng_; }

 private:
  ag::Rng rng_;
};

void primitives(Suite& s) {
  using namespace ag;
  const auto edges = small_graph().aggregation_edges();
  Parameter a = s.param("a", 3, 4), b = s.param("b", 4, 2), c = s.param("c", 3, 4);
  Parameter row = s.param("row", 1, 4), k = s.param("k", 1, 1), col = s.param("col", 3, 1);
  const Tensor d34 = s.dir(3, 4), d32 = s.dir(3, 2), d31 = s.dir(3, 1), d38 = s.dir(3, 8);

  s.check("matmul", {&a, &b}, [&](Tape& t) { return readout(t, matmul(t.leaf(a), t.leaf(b)), d32); }, kPrimitiveTol);
  s.check("add", {&a, &c}, [&](Tape& t) { return readout(t, add(t.leaf(a), t.leaf(c)), d34); }, kPrimitiveTol);
  s.check("sub", {&a, &c}, [&](Tape& t) { return readout(t, sub(t.leaf(a), t.leaf(c)), d34); }, kPrimitiveTol);
  s.check("mul", {&a, &c}, [&](Tape& t) { return readout(t, mul(t.leaf(a), t.leaf(c)), d34); }, kPrimitiveTol);
  s.check("add_row", {&a, &row}, [&](Tape& t) { return readout(t, add_row(t.leaf(a), t.leaf(row)), d34); }, kPrimitiveTol);
  s.check("scale", {&a}, [&](Tape& t) { return readout(t, scale(t.leaf(a), -1.7), d34); }, kPrimitiveTol);
  s.check("scale_by", {&a, &k}, [&](Tape& t) { return readout(t, scale_by(t.leaf(a), t.leaf(k)), d34); }, kPrimitiveTol);
  s.check("add_scalar", {&a}, [&](Tape& t) { return readout(t, add_scalar(t.leaf(a), 0.3), d34); }, kPrimitiveTol);
  s.check("row_scale", {&a, &col}, [&](Tape& t) { return readout(t, row_scale(t.leaf(a), t.leaf(col)), d34); }, kPrimitiveTol);
  s.check("concat_cols", {&a, &c}, [&](Tape& t) { return readout(t, concat_cols({t.leaf(a), t.leaf(c)}), d38); }, kPrimitiveTol);
  s.check("relu", {&a}, [&](Tape& t) { return readout(t, relu(t.leaf(a)), d34); }, kPrimitiveTol);
  s.check("leaky_relu", {&a}, [&](Tape& t) { return readout(t, leaky_relu(t.leaf(a), 0.2), d34); }, kPrimitiveTol);
  s.check("sigmoid", {&a}, [&](Tape& t) { return readout(t, sigmoid(t.leaf(a)), d34); }, kPrimitiveTol);

  Parameter keys = s.param("keys", 4, 3), query = s.param("query", 3, 1);
  const Tensor d41 = s.dir(4, 1);
  s.check("softmax_over_group.dot", {&keys, &query},
          [&](Tape& t) {
            return readout(t, softmax_over_group(matmul(t.leaf(keys), t.leaf(query)), {0, 0, 0, 0}, 1), d41);
          },
          kPrimitiveTol);
  Parameter scores = s.param("scores", edges->num_edges(), 1);
  const Tensor de = s.dir(edges->num_edges(), 1);
  s.check("softmax_over_group.edges", {&scores},
          [&](Tape& t) { return readout(t, softmax_over_group(t.leaf(scores), edges), de); }, kPrimitiveTol);
  Parameter wide = s.param("wide", 3, 5);
  const Tensor d35 = s.dir(3, 5);
  s.check("layer_norm", {&wide}, [&](Tape& t) { return readout(t, layer_norm(t.leaf(wide)), d35); }, kPrimitiveTol);
  const Tensor target = s.dir(3, 4);
  s.check("mse", {&a}, [&](Tape& t) { return mse(t.leaf(a), t.constant(target)); }, kPrimitiveTol);
  s.check("l2_norm_sq", {&a, &b}, [&](Tape& t) { return l2_norm_sq({t.leaf(a), t.leaf(b)}); }, kPrimitiveTol);
  s.check("sum", {&a}, [&](Tape& t) { return sum(scale(t.leaf(a), 2.0)); }, kPrimitiveTol);
  s.check("mean", {&a}, [&](Tape& t) { return mean(mul(t.leaf(a), t.leaf(a))); }, kPrimitiveTol);
  const Tensor d44 = s.dir(4, 4);
  s.check("gather_rows", {&a}, [&](Tape& t) { return readout(t, gather_rows(t.leaf(a), {2, 0, 2, 1}), d44); }, kPrimitiveTol);

  Parameter h = s.param("h", 5, 3), w = s.param("w", edges->num_edges(), 1), q = s.param("q", 5, 3);
  const Tensor d53 = s.dir(5, 3);
  s.check("edge_aggregate.weighted", {&h, &w}, [&](Tape& t) {
    const Var wv = t.leaf(w);
    return readout(t, edge_aggregate(t.leaf(h), &wv, edges), d53);
  }, kPrimitiveTol);
  s.check("edge_aggregate.sum", {&h}, [&](Tape& t) { return readout(t, edge_aggregate(t.leaf(h), nullptr, edges), d53); }, kPrimitiveTol);
  s.check("edge_dot", {&q, &h}, [&](Tape& t) { return readout(t, edge_dot(t.leaf(q), t.leaf(h), edges), de); }, kPrimitiveTol);

  Parameter r1 = s.param("r1", 3, 4), r0 = s.param("r0", 2, 4), y1 = s.param("y1", 3, 1), y0 = s.param("y0", 2, 1);
  const Tensor d32b = s.dir(3, 2);
  s.check("pairwise_sq_dist", {&r1, &r0}, [&](Tape& t) { return readout(t, pairwise_sq_dist(t.leaf(r1), t.leaf(r0)), d32b); }, kPrimitiveTol);
  s.check("pairwise_sq_diff", {&y1, &y0}, [&](Tape& t) { return readout(t, pairwise_sq_diff(t.leaf(y1), t.leaf(y0)), d32b); }, kPrimitiveTol);
  s.check("frobenius_dot", {&a}, [&](Tape& t) { return frobenius_dot(t.leaf(a), d34); }, kPrimitiveTol);
  s.check("dropout", {&a}, [&](Tape& t) {
    Rng mask_rng(5);
    return readout(t, dropout(t.leaf(a), 0.3, mask_rng, true), d34);
  }, kPrimitiveTol);
}

void layers_and_balance(Suite& s) {
  using namespace ag;
  const graph::DirectedGraph g = small_graph();
  const auto edges = g.aggregation_edges();

  layers::Mlp mlp("mlp", {3, 4, 4, 2}, false, s.rng());
  Parameter x = s.param("x", 5, 3);
  const Tensor d52 = s.dir(5, 2);
  std::vector<Parameter*> mp;
  mlp.collect(mp);
  mp.push_back(&x);
  s.check("mlp", mp, [&](Tape& t) { return readout(t, mlp.forward(t, t.leaf(x)), d52); }, kCompositeTol);

  for (auto form : {layers::AttentionForm::gat, layers::AttentionForm::qk}) {
    layers::PartialAttention att("att", 3, 4, form, s.rng());
    std::vector<Parameter*> ap;
    att.collect(ap);
    ap.push_back(&x);
    const Tensor de = s.dir(edges->num_edges(), 1);
    s.check("attention." + layers::to_string(form), ap,
            [&](Tape& t) { return readout(t, att.weights(t, t.leaf(x), edges), de); }, kCompositeTol);
  }

  for (auto form : {layers::AttentionForm::gat, layers::AttentionForm::qk}) {
    layers::NimLayer layer("nim", 3, 1, 1, 4, form, s.rng());
    layers::Amplifier amp(g.deg_tilde(), {0, 1, 2, 3, 4}, 0.7, true);
    Parameter xs = s.param("xs", 5, 3);
    Tensor treat(5, 1);
    treat[0] = treat[2] = treat[3] = 1.0;
    std::vector<Parameter*> np;
    layer.collect(np);
    np.push_back(&amp.pi_eta());
    np.push_back(&xs);
    const Tensor dx = s.dir(5, 4), dt = s.dir(5, 4), ds = s.dir(5, 4);
    s.check("nim_layer." + layers::to_string(form), np,
            [&](Tape& t) {
              layers::NimState st;
              st.structure = t.constant(Tensor(5, 1, 1.0));
              st.covariate = t.leaf(xs);
              st.treatment = t.constant(treat);
              const layers::NimState o = layer.forward(t, st, g, layers::NimWiring{}, &amp);
              return add(add(readout(t, o.covariate, dx), readout(t, o.treatment, dt)),
                         readout(t, o.structure, ds));
            },
            kCompositeTol);
  }

  balance::Proxy proxy(balance::ProxyKind::projection, 6, 3, 4, s.rng());
  Parameter r = s.param("r", 4, 6);
  std::vector<Parameter*> pp;
  proxy.collect(pp);
  pp.push_back(&r);
  const Tensor d43 = s.dir(4, 3);
  s.check("proxy.projection", pp, [&](Tape& t) { return readout(t, proxy.forward(t, t.leaf(r)), d43); }, kCompositeTol);
  balance::Proxy vproxy(balance::ProxyKind::mlp, 6, 3, 4, s.rng());
  std::vector<Parameter*> vp;
  vproxy.collect(vp);
  vp.push_back(&r);
  s.check("proxy.mlp_reconstruction", vp, [&](Tape& t) {
    const Var rv = t.leaf(r);
    return balance::reconstruction_loss(rv, vproxy.forward(t, rv));
  }, kCompositeTol);

  // Entropic transport value; its gradient in the cost is the optimal plan.
  Parameter a = s.param("treated", 4, 3), b = s.param("control", 4, 3);
  balance::SinkhornOptions opt;
  opt.xi = 0.1;
  opt.tol = 1e-14;
  opt.max_iter = 100000;
  s.check("sinkhorn.envelope", {&a, &b}, [&](Tape& t) {
    const Var cost = pairwise_sq_dist(t.leaf(a), t.leaf(b));
    const balance::SinkhornPlan plan = balance::sinkhorn(cost.value(), opt);
    double entropy = 0.0;
    for (double p : plan.plan.data())
      if (p > 0.0) entropy -= p * (std::log(p) - 1.0);
    return add_scalar(frobenius_dot(cost, plan.plan), -opt.xi * entropy);
  }, kCompositeTol);
}

data::Dataset six_nodes(ag::Rng& rng) {
  data::Dataset d;
  const std::vector<graph::Edge> edges = {{1, 0}, {2, 0}, {0, 1}, {3, 1}, {4, 2},
                                          {5, 2}, {0, 3}, {2, 4}, {3, 5}, {4, 5}};
  d.graph = graph::DirectedGraph::from_edge_list(edges, 6);
  d.covariates = random_tensor(6, 3, rng);
  d.treatments = ag::Tensor(6, 1);
  d.treatments[0] = d.treatments[2] = d.treatments[5] = 1.0;
  d.outcomes = random_tensor(6, 1, rng, -2.0, 2.0);
  d.split.train = {0, 1, 2, 3, 4, 5};
  return d;
}

void total_loss(Suite& s) {
  const data::Dataset d = six_nodes(s.rng());
  struct Setup {
    model::Variant variant;
    layers::AttentionForm form;
  };
  const Setup setups[] = {
      {model::Variant::full, layers::AttentionForm::gat}, {model::Variant::full, layers::AttentionForm::qk},
      {model::Variant::v, layers::AttentionForm::gat},    {model::Variant::bs, layers::AttentionForm::gat},
      {model::Variant::natt, layers::AttentionForm::gat}, {model::Variant::na, layers::AttentionForm::gat},
      {model::Variant::ns, layers::AttentionForm::gat},   {model::Variant::np, layers::AttentionForm::gat},
  };
  for (const Setup& setup : setups) {
    model::ModelConfig c;
    c.variant = setup.variant;
    c.attention = setup.form;
    c.layers = 2;
    c.hidden = 4;
    c.proxy_width = 3;
    c.dropout = 0.0;
    c.beta = 0.1;
    c.lambda = 0.01;
    c.lambda_d = 0.5;
    c.lambda_p = 1.0;
    c.pi_eta_learnable = true;
    c.sinkhorn.tol = 1e-12;
    c.sinkhorn.max_iter = 10000;
    c.seed = 3;
    model::GiteModel m(c, d);
    model::PlanCache plans;
    {
      ag::Tape t;
      m.loss(t, d, nullptr, false, &plans);
    }
    plans.frozen = true;
    s.check("total_loss." + model::to_string(setup.variant) + "." + layers::to_string(setup.form),
            m.parameters(), [&](ag::Tape& t) { return m.loss(t, d, nullptr, false, &plans).total; },
            kCompositeTol);
  }
}

}  // namespace

GradientReport run_gradient_suite(std::uint64_t seed) {
  Suite s(seed);
  primitives(s);
  layers_and_balance(s);
  total_loss(s);
  return s.report;
}

void write_gradient_report(std::ostream& out, const GradientReport& report) {
  for (const GradientCase& c : report.cases) {
    out << (c.passed ? "ok   " : "FAIL ") << c.name << "  max_rel_error=" << config::format_double(c.max_error)
        << " tol=" << config::format_double(c.tolerance) << " entries=" << c.entries << '\n';
  }
  out << "max relative error " << config::format_double(report.max_error()) << "; "
      << (report.passed() ? "all cases passed" : "some cases failed") << '\n';
}

}  // namespace gite::metrics
