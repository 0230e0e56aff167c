#include "gite/balance/pfor.hpp"

#include "gite/error.hpp"

namespace gite::balance {

ag::Var pfor_cost(const ag::Var& r1, const ag::Var& r0, const ag::Var& y1, const ag::Var& y0,
                  const ag::Var& yhat1_control, const ag::Var& yhat0_treated, double lambda_d) {
  if (y1.rows() != r1.rows() || yhat0_treated.rows() != r1.rows() || y0.rows() != r0.rows() ||
      yhat1_control.rows() != r0.rows()) {
    throw ShapeError("pfor_cost: outcome columns do not match representation rows");
  }
  const ag::Var distance = ag::pairwise_sq_dist(r1, r0);
  if (lambda_d == 0.0) return distance;
  const ag::Var outcome =
      ag::add(ag::pairwise_sq_diff(y1, yhat1_control), ag::pairwise_sq_diff(yhat0_treated, y0));
  return ag::add(distance, ag::scale(outcome, lambda_d));
}

}  // namespace gite::balance
