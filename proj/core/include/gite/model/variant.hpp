#pragma once

#include <string>
#include <vector>

#include "gite/balance/proxy.hpp"
#include "gite/layers/nim.hpp"

namespace gite::model {

/// Ablation variants of the full estimator.
enum class Variant {
  full,
  nr,    // no parameter norm penalty
  nb,    // no balancing term
  ns,    // interference attention only, no amplifier
  nm,    // no amplifier
  natt,  // uniform neighbor weights, amplifier kept
  na,    // unweighted neighbor sums, amplifier kept
  np,    // balance the raw joint representation
  bs,    // balance z, z_X, z_T separately
  v,     // MLP proxy with reconstruction penalty
};

Variant parse_variant(const std::string& text);
std::string to_string(Variant v);
/// Report label, e.g. "GITE" or "GITE_NATT".
std::string display_name(Variant v);
const std::vector<Variant>& all_variants();

/// What a variant switches on or off.
struct VariantTraits {
  layers::NimWiring wiring;
  bool regularize = true;
  bool balance = true;
  bool use_proxy = true;
  bool separate_balance = false;
  balance::ProxyKind proxy = balance::ProxyKind::projection;
  bool reconstruction = false;
};

VariantTraits traits(Variant v);

}  // namespace gite::model
