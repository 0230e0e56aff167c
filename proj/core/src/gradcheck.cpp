#include "gite/ag/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace gite::ag {

GradCheckResult check_gradient(const std::string& name, const std::vector<Parameter*>& params,
                               const LossBuilder& loss, const GradCheckOptions& options) {
  GradCheckResult r;
  r.name = name;
  std::vector<Tensor> analytic;
  {
    Tape tape;
    const Var l = loss(tape);
    tape.backward(l);
    for (const Parameter* p : params) analytic.push_back(tape.gradient(*p));
  }
  auto eval = [&] {
    Tape tape;
    return loss(tape).value().item();
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& v = params[k]->value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + options.step;
      const double up = eval();
      v[i] = saved - options.step;
      const double down = eval();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double scale = std::max({std::abs(a), std::abs(numeric), options.floor});
      r.max_error = std::max(r.max_error, std::abs(a - numeric) / scale);
      ++r.entries;
    }
  }
  return r;
}

}  // namespace gite::ag
