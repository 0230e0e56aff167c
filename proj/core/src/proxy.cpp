#include "gite/balance/proxy.hpp"

#include "gite/error.hpp"

namespace gite::balance {

Proxy::Proxy(ProxyKind kind, std::size_t in_width, std::size_t out_width, std::size_t hidden,
             ag::Rng& rng)
    : kind_(kind) {
  if (kind == ProxyKind::projection) {
    net_ = layers::Mlp("proxy", {in_width, out_width}, false, rng);
  } else {
    net_ = layers::Mlp("proxy", {in_width, hidden, 2 * hidden, in_width}, false, rng);
  }
}

ag::Var Proxy::forward(ag::Tape& tape, const ag::Var& r, const layers::Mode& mode) {
  if (kind_ == ProxyKind::mlp) return net_.forward(tape, r, mode);
  ag::Var h = ag::layer_norm(r, kNormEps);
  if (mode.training && mode.dropout > 0.0) {
    if (mode.rng == nullptr) throw UsageError("proxy: dropout requested without an rng");
    h = ag::dropout(h, mode.dropout, *mode.rng, true);
  }
  return net_.forward(tape, h, mode);
}

ag::Var reconstruction_loss(const ag::Var& r, const ag::Var& r_proxy) {
  const ag::Var diff = ag::sub(r, r_proxy);
  return ag::scale(ag::sum(ag::mul(diff, diff)), 1.0 / static_cast<double>(r.rows()));
}

}  // namespace gite::balance
