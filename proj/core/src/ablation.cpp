#include "gite/train/ablation.hpp"

#include <algorithm>
#include <mutex>
#include <ostream>
#include <sstream>

#include "gite/error.hpp"
#include "gite/train/parallel.hpp"

namespace gite::train {

void AblationConfig::write(config::KeyValue& kv) const {
  sim.write(kv);
  model.write(kv);
  train.write(kv);
  std::string names;
  for (model::Variant v : variants) names += (names.empty() ? "" : ",") + model::to_string(v);
  kv.set("ablate.variants", names);
  kv.set("ablate.seeds", seeds.size());
  kv.set("ablate.workers", workers);
}

AblationConfig AblationConfig::read(const config::KeyValue& kv) {
  AblationConfig c;
  c.sim = data::SimConfig::read(kv);
  c.model = model::ModelConfig::read(kv);
  c.train = TrainConfig::read(kv);
  std::string names = kv.get("ablate.variants", "full,nr,nb,ns,nm,natt,na,np,bs,v");
  std::stringstream in(names);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) c.variants.push_back(model::parse_variant(item));
  }
  if (c.variants.empty()) throw ConfigError("ablate.variants is empty");
  const std::size_t k = kv.get_size("ablate.seeds", 10);
  if (k == 0) throw ConfigError("ablate.seeds must be positive");
  for (std::uint64_t s = 1; s <= k; ++s) c.seeds.push_back(s);
  c.workers = kv.get_size("ablate.workers", 1);
  return c;
}

const std::vector<std::string>& AblationConfig::keys() {
  static const std::vector<std::string> k = [] {
    config::KeyValue kv;
    AblationConfig c;
    c.variants = {model::Variant::full};
    c.seeds = {1};
    c.write(kv);
    std::vector<std::string> out;
    for (const auto& [key, v] : kv.entries()) out.push_back(key);
    return out;
  }();
  return k;
}

const AblationRun& AblationResult::run(model::Variant v, std::uint64_t seed) const {
  for (const AblationRun& r : runs)
    if (r.variant == v && r.seed == seed) return r;
  throw UsageError("ablation: no run for " + model::to_string(v) + " seed " + std::to_string(seed));
}

AblationResult run_ablation(const AblationConfig& config, const RunDone& done) {
  const std::size_t ns = config.seeds.size(), nv = config.variants.size();
  std::vector<data::Dataset> datasets(ns);
  parallel_for(ns, config.workers, [&](std::size_t k) {
    data::SimConfig sim = config.sim;
    sim.seed = config.seeds[k];
    datasets[k] = data::simulate(sim);
  });

  AblationResult result;
  result.runs.resize(nv * ns);
  std::mutex done_mutex;
  parallel_for(nv * ns, config.workers, [&](std::size_t job) {
    const std::size_t vi = job / ns, k = job % ns;
    model::ModelConfig mc = config.model;
    mc.variant = config.variants[vi];
    mc.seed = config.seeds[k];
    TrainConfig tc = config.train;
    tc.seed = config.seeds[k];
    model::GiteModel m(mc, datasets[k]);
    const History h = fit(m, datasets[k], tc);
    AblationRun& r = result.runs[job];
    r.variant = mc.variant;
    r.seed = mc.seed;
    r.test = evaluate(m, datasets[k], data::Part::test);
    r.iterations = h.iterations;
    r.best_iteration = h.best_iteration;
    if (!h.loss.empty()) {
      r.first_loss = h.loss.front();
      r.last_loss = h.loss.back();
    }
    if (done) {
      std::lock_guard lock(done_mutex);
      done(r);
    }
  });

  for (std::size_t vi = 0; vi < nv; ++vi) {
    std::vector<double> mse, pehe;
    for (std::size_t k = 0; k < ns; ++k) {
      const AblationRun& r = result.runs[vi * ns + k];
      mse.push_back(r.test.sqrt_mse);
      if (r.test.sqrt_pehe) pehe.push_back(*r.test.sqrt_pehe);
    }
    VariantSummary s;
    s.variant = config.variants[vi];
    s.sqrt_mse = metrics::summarize(mse);
    if (pehe.size() == ns) s.sqrt_pehe = metrics::summarize(pehe);
    result.summary.push_back(s);
  }
  return result;
}

void write_ablation_table(std::ostream& out, const AblationResult& result) {
  using config::format_double;
  out << "variant,sqrt_mse_mean,sqrt_mse_se,sqrt_pehe_mean,sqrt_pehe_se,runs\n";
  for (const VariantSummary& s : result.summary) {
    out << model::display_name(s.variant) << ',' << format_double(s.sqrt_mse.mean) << ','
        << format_double(s.sqrt_mse.std_error) << ',';
    if (s.sqrt_pehe) {
      out << format_double(s.sqrt_pehe->mean) << ',' << format_double(s.sqrt_pehe->std_error);
    } else {
      out << "NA,NA";
    }
    out << ',' << s.sqrt_mse.count << '\n';
  }
}

void write_ablation_runs(std::ostream& out, const AblationResult& result) {
  using config::format_double;
  out << "variant,seed,sqrt_mse,sqrt_pehe,iterations,best_iteration,first_loss,last_loss\n";
  for (const AblationRun& r : result.runs) {
    out << model::display_name(r.variant) << ',' << r.seed << ',' << format_double(r.test.sqrt_mse) << ','
        << (r.test.sqrt_pehe ? format_double(*r.test.sqrt_pehe) : std::string("NA")) << ',' << r.iterations
        << ',' << r.best_iteration << ',' << format_double(r.first_loss) << ',' << format_double(r.last_loss)
        << '\n';
  }
}

}  // namespace gite::train
