// gite: simulate, train, eval, ablate, propcheck, gradcheck.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "gite/config/key_value.hpp"
#include "gite/data/dataset_io.hpp"
#include "gite/data/simulate.hpp"
#include "gite/error.hpp"
#include "gite/metrics/gradient_suite.hpp"
#include "gite/metrics/propcheck.hpp"
#include "gite/model/checkpoint.hpp"
#include "gite/train/ablation.hpp"
#include "gite/train/fit.hpp"

namespace fs = std::filesystem;
using namespace gite;

namespace {

/// Flag values collected before the config file is merged.
struct Overrides {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant, attention, pi_eta;
  std::optional<double> beta, lambda, lambda_d, lambda_p, xi;
  std::optional<std::size_t> layers, hidden, n, iterations, seeds, workers;
  std::vector<std::string> sets;
};

void add_model_flags(CLI::App* app, Overrides& o) {
  app->add_option("--variant", o.variant, "full, nr, nb, ns, nm, natt, na, np, bs or v");
  app->add_option("--beta", o.beta, "balancing weight");
  app->add_option("--lambda", o.lambda, "parameter norm weight");
  app->add_option("--lambda-d", o.lambda_d, "outcome weight inside the transport cost");
  app->add_option("--lambda-p", o.lambda_p, "proxy reconstruction weight");
  app->add_option("--xi", o.xi, "entropic regularization");
  app->add_option("--layers", o.layers, "NIM layers");
  app->add_option("--hidden", o.hidden, "hidden width");
  app->add_option("--pi-eta", o.pi_eta, "fixed:<value> or learnable");
  app->add_option("--attention", o.attention, "gat or qk");
  app->add_option("--iterations", o.iterations, "maximum training iterations");
}

void add_common_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_file, "key = value file");
  app->add_option("--seed", o.seed, "seed for simulation, split, initialization and dropout");
  app->add_option("--set", o.sets, "extra key=value override (repeatable)");
}

config::KeyValue resolve(const Overrides& o, const std::vector<std::string>& known) {
  config::KeyValue kv;
  if (!o.config_file.empty()) kv = config::KeyValue::read(o.config_file);
  config::KeyValue flags;
  if (o.seed) {
    for (const std::string k : {"sim.seed", "model.seed", "train.seed"})
      if (std::find(known.begin(), known.end(), k) != known.end()) flags.set(k, std::to_string(*o.seed));
  }
  if (o.variant) flags.set("model.variant", *o.variant);
  if (o.attention) flags.set("model.attention", *o.attention);
  if (o.beta) flags.set("model.beta", *o.beta);
  if (o.lambda) flags.set("model.lambda", *o.lambda);
  if (o.lambda_d) flags.set("model.lambda_d", *o.lambda_d);
  if (o.lambda_p) flags.set("model.lambda_p", *o.lambda_p);
  if (o.xi) flags.set("model.sinkhorn_xi", *o.xi);
  if (o.layers) flags.set("model.layers", *o.layers);
  if (o.hidden) {
    flags.set("model.hidden", *o.hidden);
    flags.set("model.proxy_width", *o.hidden);
  }
  if (o.pi_eta) {
    if (*o.pi_eta == "learnable") {
      flags.set("model.pi_eta_learnable", true);
    } else if (o.pi_eta->rfind("fixed:", 0) == 0) {
      flags.set("model.pi_eta_learnable", false);
      flags.set("model.pi_eta", config::parse_double(o.pi_eta->substr(6), "--pi-eta"));
    } else {
      throw ConfigError("--pi-eta must be fixed:<value> or learnable, got '" + *o.pi_eta + "'");
    }
  }
  if (o.n) flags.set("sim.n", *o.n);
  if (o.iterations) flags.set("train.max_iterations", *o.iterations);
  if (o.seeds) flags.set("ablate.seeds", *o.seeds);
  if (o.workers) flags.set("ablate.workers", *o.workers);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    flags.set(s.substr(0, eq), s.substr(eq + 1));
  }
  kv.merge(flags);
  kv.require_known(known);
  return kv;
}

std::vector<std::string> join_keys(std::initializer_list<const std::vector<std::string>*> lists) {
  std::vector<std::string> out;
  for (const auto* l : lists) out.insert(out.end(), l->begin(), l->end());
  return out;
}

/// Resolved config with every default filled in, as the manifest records it.
std::string config_echo(const std::string& command, const config::KeyValue& resolved) {
  return "# gite manifest\ncommand = " + command + "\n" + resolved.serialize();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

std::string metrics_csv(model::GiteModel& m, const data::Dataset& d, const std::vector<data::Part>& parts) {
  std::ostringstream out;
  out << "part,sqrt_mse,sqrt_pehe\n";
  for (data::Part p : parts) {
    const metrics::MetricsRecord r = train::evaluate(m, d, p);
    out << data::to_string(p) << ',' << config::format_double(r.sqrt_mse) << ','
        << (r.sqrt_pehe ? config::format_double(*r.sqrt_pehe) : std::string("NA")) << '\n';
  }
  return out.str();
}

data::Dataset load_or_simulate(const std::string& data_dir, const data::SimConfig& sim) {
  if (data_dir.empty()) return data::simulate(sim);
  return data::ingest(data::DatasetFiles::in_directory(data_dir), sim.seed);
}

int cmd_simulate(const Overrides& o, const std::string& out_dir) {
  const config::KeyValue kv = resolve(o, data::SimConfig::keys());
  const data::SimConfig sim = data::SimConfig::read(kv);
  const data::Dataset d = data::simulate(sim);
  config::KeyValue echo;
  sim.write(echo);
  data::write_dataset(out_dir, d);
  double treated = 0.0;
  for (double t : d.treatments.data()) treated += t;
  std::ostringstream m;
  m << config_echo("simulate", echo) << "[dataset]\nnodes = " << d.num_nodes()
    << "\nedges = " << d.graph.num_edges() << "\ntreated = " << static_cast<std::size_t>(treated)
    << "\ntrain = " << d.split.train.size() << "\nval = " << d.split.val.size()
    << "\ntest = " << d.split.test.size() << '\n';
  write_file(fs::path(out_dir) / "manifest.txt", m.str());
  std::cout << "wrote " << d.num_nodes() << "-node dataset to " << out_dir << '\n';
  return 0;
}

int cmd_train(const Overrides& o, const std::string& out_dir, const std::string& data_dir) {
  const config::KeyValue kv =
      resolve(o, join_keys({&data::SimConfig::keys(), &model::ModelConfig::keys(), &train::TrainConfig::keys()}));
  const data::SimConfig sim = data::SimConfig::read(kv);
  const model::ModelConfig mc = model::ModelConfig::read(kv);
  const train::TrainConfig tc = train::TrainConfig::read(kv);
  const data::Dataset d = load_or_simulate(data_dir, sim);

  model::GiteModel m(mc, d);
  const train::History h = train::fit(m, d, tc);

  config::KeyValue echo;
  if (data_dir.empty()) {
    sim.write(echo);
  } else {
    echo.set("data.dir", data_dir);
    echo.set("data.split_seed", std::to_string(sim.seed));
  }
  mc.write(echo);
  tc.write(echo);
  std::ostringstream man;
  man << config_echo("train", echo) << "[history]\niterations = " << h.iterations
      << "\nbest_iteration = " << h.best_iteration << "\nstopped_early = " << (h.stopped_early ? "true" : "false")
      << "\nsinkhorn_unconverged = " << h.sinkhorn_unconverged << "\n[loss]\niteration,loss\n";
  for (std::size_t i = 0; i < h.loss.size(); ++i) man << i << ',' << config::format_double(h.loss[i]) << '\n';
  man << "[validation]\niteration,sqrt_mse\n";
  for (const auto& v : h.validation) man << v.iteration << ',' << config::format_double(v.sqrt_mse) << '\n';
  const std::string metrics = metrics_csv(m, d, {data::Part::train, data::Part::val, data::Part::test});
  man << "[metrics]\n" << metrics;

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  model::save_checkpoint(dir / "checkpoint.txt", m);
  write_file(dir / "manifest.txt", man.str());
  std::cout << metrics;
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& out_dir, const std::string& data_dir,
             const std::string& checkpoint, const std::string& split) {
  if (checkpoint.empty()) throw UsageError("eval: --checkpoint is required");
  const config::KeyValue kv = resolve(o, data::SimConfig::keys());
  const data::Dataset d = load_or_simulate(data_dir, data::SimConfig::read(kv));
  model::GiteModel m = model::load_checkpoint(checkpoint, d);
  std::vector<data::Part> parts;
  if (split == "each") {
    parts = {data::Part::train, data::Part::val, data::Part::test};
  } else {
    parts = {data::parse_part(split)};
  }
  const std::string metrics = metrics_csv(m, d, parts);
  if (!out_dir.empty()) write_file(fs::path(out_dir) / "metrics.csv", metrics);
  std::cout << metrics;
  return 0;
}

int cmd_ablate(const Overrides& o, const std::string& out_dir) {
  const config::KeyValue kv = resolve(o, train::AblationConfig::keys());
  const train::AblationConfig ac = train::AblationConfig::read(kv);
  const train::AblationResult r = train::run_ablation(ac, [](const train::AblationRun& run) {
    std::cerr << model::display_name(run.variant) << " seed " << run.seed << ": sqrt_pehe "
              << (run.test.sqrt_pehe ? config::format_double(*run.test.sqrt_pehe) : std::string("NA")) << '\n';
  });
  config::KeyValue echo;
  ac.write(echo);
  std::ostringstream table, runs;
  train::write_ablation_table(table, r);
  train::write_ablation_runs(runs, r);
  const fs::path dir(out_dir);
  write_file(dir / "ablation.csv", table.str());
  write_file(dir / "runs.csv", runs.str());
  write_file(dir / "manifest.txt", config_echo("ablate", echo) + "[runs]\n" + runs.str() + "[table]\n" + table.str());
  std::cout << table.str();
  return 0;
}

std::vector<std::pair<std::size_t, std::size_t>> propcheck_sizes(std::uint64_t seed, std::size_t random_pairs) {
  std::vector<std::pair<std::size_t, std::size_t>> sizes{{2, 7}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(1, 12);
  while (sizes.size() < 1 + random_pairs) {
    const std::size_t m = pick(rng), n = pick(rng);
    if (m != n) sizes.emplace_back(m, n);
  }
  return sizes;
}

int cmd_propcheck(const Overrides& o, const std::string& out_dir, std::size_t random_pairs) {
  metrics::PropcheckOptions opts;
  if (o.seed) opts.seed = *o.seed;
  const metrics::PropReport r =
      metrics::run_propcheck(metrics::all_aggregators(), propcheck_sizes(opts.seed, random_pairs), opts);
  if (!out_dir.empty()) {
    std::ostringstream csv;
    metrics::write_report_csv(csv, r);
    write_file(fs::path(out_dir) / "propcheck.csv", csv.str());
  }
  metrics::write_report_summary(std::cout, r);
  return r.passed() ? 0 : 1;
}

int cmd_gradcheck(const Overrides& o, const std::string& out_dir) {
  const metrics::GradientReport r = metrics::run_gradient_suite(o.seed.value_or(11));
  std::ostringstream text;
  metrics::write_gradient_report(text, r);
  if (!out_dir.empty()) write_file(fs::path(out_dir) / "gradcheck.txt", text.str());
  std::cout << text.str();
  return r.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GITE individual treatment effect estimation under networked interference"};
  app.require_subcommand(1);
  Overrides o;
  std::string out_dir, data_dir, checkpoint, split = "test";
  std::size_t random_pairs = 4;

  CLI::App* sim = app.add_subcommand("simulate", "write a synthetic dataset");
  add_common_flags(sim, o);
  sim->add_option("--n", o.n, "number of nodes");
  sim->add_option("--out-dir", out_dir, "dataset directory")->required();

  CLI::App* tr = app.add_subcommand("train", "train one model; writes checkpoint.txt and manifest.txt");
  add_common_flags(tr, o);
  add_model_flags(tr, o);
  tr->add_option("--n", o.n, "nodes when simulating");
  tr->add_option("--data-dir", data_dir, "dataset directory (simulates when omitted)");
  tr->add_option("--out-dir", out_dir, "run directory")->required();

  CLI::App* ev = app.add_subcommand("eval", "metrics of a checkpoint");
  add_common_flags(ev, o);
  ev->add_option("--n", o.n, "nodes when simulating");
  ev->add_option("--data-dir", data_dir, "dataset directory (simulates when omitted)");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--split", split, "train, val, test, all or each");
  ev->add_option("--out-dir", out_dir, "writes metrics.csv here");

  CLI::App* ab = app.add_subcommand("ablate", "every variant over k seeds; writes ablation.csv");
  add_common_flags(ab, o);
  add_model_flags(ab, o);
  ab->add_option("--n", o.n, "nodes per simulated dataset");
  ab->add_option("--seeds", o.seeds, "number of seeds (1..k)");
  ab->add_option("--workers", o.workers, "parallel runs");
  ab->add_option("--out-dir", out_dir, "output directory")->required();

  CLI::App* pc = app.add_subcommand("propcheck", "degeneracy and separation checks");
  pc->add_option("--seed", o.seed, "parameter and size seed");
  pc->add_option("--random-pairs", random_pairs, "random (m, n) pairs besides (2, 7)");
  pc->add_option("--out-dir", out_dir, "writes propcheck.csv here");

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient sweep");
  gc->add_option("--seed", o.seed, "seed of the random instances");
  gc->add_option("--out-dir", out_dir, "writes gradcheck.txt here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(o, out_dir);
    if (*tr) return cmd_train(o, out_dir, data_dir);
    if (*ev) return cmd_eval(o, out_dir, data_dir, checkpoint, split);
    if (*ab) return cmd_ablate(o, out_dir);
    if (*pc) return cmd_propcheck(o, out_dir, random_pairs);
    if (*gc) return cmd_gradcheck(o, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "gite: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
