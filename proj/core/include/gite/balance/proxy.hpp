#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gite/ag/ops.hpp"
#include "gite/layers/mlp.hpp"

namespace gite::balance {

enum class ProxyKind {
  /// Row normalization, then one affine projection.
  projection,
  /// Nonlinear MLP whose output width equals its input width, trained with
  /// a reconstruction penalty.
  mlp,
};

/// Maps the joint representation r = (z, z_X, z_T) to the space where the
/// treated and control groups are balanced.
class Proxy {
 public:
  static constexpr double kNormEps = 1e-5;

  Proxy() = default;
  /// projection: in_width -> out_width. mlp: widths {in, h, 2h, in}, where h
  /// is `hidden`.
  Proxy(ProxyKind kind, std::size_t in_width, std::size_t out_width, std::size_t hidden,
        ag::Rng& rng);

  ag::Var forward(ag::Tape& tape, const ag::Var& r, const layers::Mode& mode = {});

  ProxyKind kind() const { return kind_; }
  void collect(std::vector<ag::Parameter*>& out) { net_.collect(out); }
  layers::Mlp& network() { return net_; }

 private:
  ProxyKind kind_ = ProxyKind::projection;
  layers::Mlp net_;
};

/// Mean over rows of |r - r'|^2.
ag::Var reconstruction_loss(const ag::Var& r, const ag::Var& r_proxy);

}  // namespace gite::balance
