#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gite/ag/ops.hpp"
#include "gite/balance/proxy.hpp"
#include "gite/balance/sinkhorn.hpp"
#include "gite/config/key_value.hpp"
#include "gite/data/dataset.hpp"
#include "gite/layers/attention.hpp"
#include "gite/layers/mlp.hpp"
#include "gite/layers/nim.hpp"
#include "gite/model/variant.hpp"

namespace gite::model {

struct ModelConfig {
  Variant variant = Variant::full;
  std::size_t layers = 3;
  std::size_t hidden = 100;
  std::size_t proxy_width = 100;
  layers::AttentionForm attention = layers::AttentionForm::gat;
  double pi_eta = 1.0;
  bool pi_eta_learnable = false;
  /// Weight of the balancing term.
  double beta = 0.01;
  /// Weight of the squared parameter norm.
  double lambda = 1e-4;
  /// Weight of the outcome terms in the transport cost.
  double lambda_d = 1.0;
  /// Weight of the proxy reconstruction penalty (MLP proxy only).
  double lambda_p = 1.0;
  double dropout = 0.1;
  balance::SinkhornOptions sinkhorn;
  bool zscore_outcomes = false;
  /// Seeds parameter initialization.
  std::uint64_t seed = 0;

  void write(config::KeyValue& kv) const;
  /// Reads the keys written by write(); missing keys keep their defaults.
  static ModelConfig read(const config::KeyValue& kv);
  static const std::vector<std::string>& keys();
};

struct ForwardPass {
  layers::NimState state;
  ag::Var z;
  /// (z, z_X, z_T) per node.
  ag::Var joint;
  ag::Var y0;
  ag::Var y1;
  std::vector<layers::AttentionRecord> attention;
};

struct LossTerms {
  ag::Var total;
  double factual = 0.0;
  double balance = 0.0;
  double penalty = 0.0;
  double reconstruction = 0.0;
  bool balance_skipped = false;
  std::size_t sinkhorn_iterations = 0;
  bool sinkhorn_converged = true;
};

/// Transport plans of the latest loss evaluation, one per balancing term.
/// When `frozen`, loss() reuses the stored plans instead of solving, which
/// makes the loss a smooth function of the parameters for finite-difference
/// checks. Otherwise the stored potentials warm-start the next solve.
struct PlanCache {
  std::vector<ag::Tensor> plans;
  std::vector<balance::Potentials> potentials;
  bool frozen = false;
};

struct Predictions {
  ag::Tensor y0;
  ag::Tensor y1;
  ag::Tensor tau;
  /// Outcome under the observed treatment.
  ag::Tensor factual;
};

/// Full estimator: covariate encoder, NIM stack, proxy and two outcome heads.
/// Built for one dataset: the amplifier and outcome normalization use its
/// training split.
class GiteModel {
 public:
  GiteModel(const ModelConfig& config, const data::Dataset& dataset);

  const ModelConfig& config() const { return config_; }
  const VariantTraits& traits() const { return traits_; }
  const data::ZScore& outcome_scale() const { return zscore_; }
  void set_outcome_scale(const data::ZScore& z) { zscore_ = z; }
  layers::Amplifier& amplifier() { return amplifier_; }

  ForwardPass forward(ag::Tape& tape, const data::Dataset& dataset, const layers::Mode& mode,
                      bool record_attention = false);

  /// Training objective on the training split. `rng` drives dropout when
  /// `training` is set.
  LossTerms loss(ag::Tape& tape, const data::Dataset& dataset, ag::Rng* rng, bool training,
                 PlanCache* plans = nullptr);

  /// Evaluation-mode predictions in original outcome units.
  Predictions predict(const data::Dataset& dataset);

  /// Every trainable parameter in a fixed order.
  std::vector<ag::Parameter*> parameters();

  layers::Mlp& encoder() { return encoder_; }
  std::vector<layers::NimLayer>& nim_layers() { return nim_; }
  layers::Mlp& head(int t) { return t == 0 ? head0_ : head1_; }
  balance::Proxy& proxy() { return proxy_; }

 private:
  ModelConfig config_;
  VariantTraits traits_;
  data::ZScore zscore_;
  layers::Mlp encoder_;
  std::vector<layers::NimLayer> nim_;
  layers::Mlp head0_;
  layers::Mlp head1_;
  balance::Proxy proxy_;
  layers::Amplifier amplifier_;
};

}  // namespace gite::model
