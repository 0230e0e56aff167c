#pragma once

#include "gite/ag/ops.hpp"

namespace gite::balance {

/// Transport cost between treated rows i and control rows j:
///   |r1_i - r0_j|^2 + lambda_d * ((y1_i - yhat1_j)^2 + (yhat0_i - y0_j)^2)
/// where yhat1_j is control unit j's predicted outcome under treatment and
/// yhat0_i is treated unit i's predicted outcome under control. Outcome
/// terms are dropped when lambda_d is 0.
ag::Var pfor_cost(const ag::Var& r1, const ag::Var& r0, const ag::Var& y1, const ag::Var& y0,
                  const ag::Var& yhat1_control, const ag::Var& yhat0_treated, double lambda_d);

}  // namespace gite::balance
