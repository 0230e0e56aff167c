#include "gite/ag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "gite/ag/accurate_sum.hpp"
#include "gite/error.hpp"

namespace gite::ag {
namespace {

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

// C (n x m) (+)= A (n x k) * B (k x m). Every output element is the same
// sequential sum over k regardless of its row, so identical rows of A give
// bitwise identical rows of C.
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C (k x m) += A^T B with A (n x k), B (n x m).
void gemm_tn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += aip * bi[j];
    }
  }
}

Tensor transpose(const Tensor& t) {
  Tensor out(t.cols(), t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) out(j, i) = t(i, j);
  return out;
}

// C (n x k) += A (n x m) * B^T with B (k x m).
void gemm_nt(const double* a, const Tensor& b, double* c, std::size_t n, std::size_t m) {
  const Tensor bt = transpose(b);
  gemm_nn(a, bt.data().data(), c, n, m, b.rows());
}

void require_same_tape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw UsageError(std::string(op) + ": operands on different tapes");
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  require_same_tape(op, a, b);
  if (!a.value().same_shape(b.value())) shape_fail(op, a.value(), b.value());
}

void require_column(const char* op, const Tensor& t, std::size_t rows) {
  if (t.cols() != 1 || t.rows() != rows) {
    shape_fail(op, "expected column of " + std::to_string(rows) + " rows, got " +
                       shape_string(t));
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_same_tape("matmul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_fail("matmul", av, bv);
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Tensor out(n, m);
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), n, k, m);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b},
                         [ia, ib, n, k, m](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           if (t.requires_grad(ia)) {
                             Tensor& ga = t.grad_accumulator(ia);
                             gemm_nt(g.data().data(), t.value(ib), ga.data().data(), n, m);
                           }
                           if (t.requires_grad(ib)) {
                             Tensor& gb = t.grad_accumulator(ib);
                             gemm_tn(t.value(ia).data().data(), g.data().data(),
                                     gb.data().data(), n, k, m);
                           }
                         });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t id : {ia, ib}) {
      if (!t.requires_grad(id)) continue;
      Tensor& gx = t.grad_accumulator(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gx = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& gx = t.grad_accumulator(ia);
      const Tensor& y = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gx = t.grad_accumulator(ib);
      const Tensor& x = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * x[i];
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  require_same_tape("add_row", a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) shape_fail("add_row", av, rv);
  Tensor out(av.rows(), av.cols());
  const std::size_t m = av.cols();
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = av(i, j) + rv[j];
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape().record("add_row", std::move(out), {a, row},
                         [ia, ir, m](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           if (t.requires_grad(ia)) {
                             Tensor& gx = t.grad_accumulator(ia);
                             for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                           }
                           if (t.requires_grad(ir)) {
                             Tensor& gr = t.grad_accumulator(ir);
                             for (std::size_t i = 0; i < g.rows(); ++i)
                               for (std::size_t j = 0; j < m; ++j) gr[j] += g(i, j);
                           }
                         });
}

Var scale(const Var& a, double s) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  const std::size_t ia = a.id();
  return a.tape().record("scale", std::move(out), {a}, [ia, s](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
  });
}

Var scale_by(const Var& a, const Var& s) {
  require_same_tape("scale_by", a, s);
  const Tensor& av = a.value();
  const Tensor& sv = s.value();
  if (sv.rows() != 1 || sv.cols() != 1) shape_fail("scale_by", av, sv);
  const double c = sv[0];
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  const std::size_t ia = a.id(), is = s.id();
  return a.tape().record("scale_by", std::move(out), {a, s},
                         [ia, is](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const double c = t.value(is)[0];
                           if (t.requires_grad(ia)) {
                             Tensor& gx = t.grad_accumulator(ia);
                             for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * c;
                           }
                           if (t.requires_grad(is)) {
                             const Tensor& x = t.value(ia);
                             double acc = 0.0;
                             for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
                             t.grad_accumulator(is)[0] += acc;
                           }
                         });
}

Var add_scalar(const Var& a, double c) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + c;
  const std::size_t ia = a.id();
  return a.tape().record("add_scalar", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var row_scale(const Var& a, const Var& s) {
  require_same_tape("row_scale", a, s);
  const Tensor& av = a.value();
  const Tensor& sv = s.value();
  require_column("row_scale", sv, av.rows());
  const std::size_t m = av.cols();
  Tensor out(av.rows(), m);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = av(i, j) * sv[i];
  const std::size_t ia = a.id(), is = s.id();
  return a.tape().record("row_scale", std::move(out), {a, s},
                         [ia, is, m](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           if (t.requires_grad(ia)) {
                             const Tensor& sv = t.value(is);
                             Tensor& gx = t.grad_accumulator(ia);
                             for (std::size_t i = 0; i < g.rows(); ++i)
                               for (std::size_t j = 0; j < m; ++j) gx(i, j) += g(i, j) * sv[i];
                           }
                           if (t.requires_grad(is)) {
                             const Tensor& x = t.value(ia);
                             Tensor& gs = t.grad_accumulator(is);
                             for (std::size_t i = 0; i < g.rows(); ++i) {
                               double acc = 0.0;
                               for (std::size_t j = 0; j < m; ++j) acc += g(i, j) * x(i, j);
                               gs[i] += acc;
                             }
                           }
                         });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) shape_fail("concat_cols", "no operands");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape("concat_cols", parts.front(), p);
    if (p.rows() != n) shape_fail("concat_cols", parts.front().value(), p.value());
    widths.push_back(p.cols());
    ids.push_back(p.id());
    total += p.cols();
  }
  Tensor out(n, total);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < n; ++i)
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + offset);
    offset += v.cols();
  }
  return parts.front().tape().record(
      "concat_cols", std::move(out), parts,
      [ids, widths](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t p = 0; p < ids.size(); ++p) {
          if (t.requires_grad(ids[p])) {
            Tensor& gx = t.grad_accumulator(ids[p]);
            for (std::size_t i = 0; i < g.rows(); ++i)
              for (std::size_t j = 0; j < widths[p]; ++j) gx(i, j) += g(i, offset + j);
          }
          offset += widths[p];
        }
      });
}

Var relu(const Var& a) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  const std::size_t ia = a.id();
  return a.tape().record("relu", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    Tensor& gx = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) gx[i] += g[i];
  });
}

Var leaky_relu(const Var& a, double slope) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : slope * av[i];
  const std::size_t ia = a.id();
  return a.tape().record("leaky_relu", std::move(out), {a},
                         [ia, slope](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const Tensor& x = t.value(ia);
                           Tensor& gx = t.grad_accumulator(ia);
                           for (std::size_t i = 0; i < g.size(); ++i)
                             gx[i] += x[i] > 0.0 ? g[i] : slope * g[i];
                         });
}

Var sigmoid(const Var& a) {
  const Tensor& av = a.value();
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i];
    // Branches keep exp() from overflowing for large |x|.
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  const std::size_t ia = a.id();
  return a.tape().record("sigmoid", std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_over_group(const Var& scores, std::vector<std::size_t> group,
                       std::size_t num_groups) {
  const Tensor& s = scores.value();
  require_column("softmax_over_group", s, group.size());
  const double lowest = -std::numeric_limits<double>::infinity();
  std::vector<double> max_score(num_groups, lowest);
  for (std::size_t e = 0; e < group.size(); ++e) {
    if (group[e] >= num_groups) {
      shape_fail("softmax_over_group", "group index " + std::to_string(group[e]) +
                                           " out of range " + std::to_string(num_groups));
    }
    max_score[group[e]] = std::max(max_score[group[e]], s[e]);
  }
  Tensor out(s.rows(), 1);
  std::vector<double> denom(num_groups, 0.0);
  for (std::size_t e = 0; e < group.size(); ++e) {
    out[e] = std::exp(s[e] - max_score[group[e]]);
    denom[group[e]] += out[e];
  }
  for (std::size_t e = 0; e < group.size(); ++e) out[e] /= denom[group[e]];
  const std::size_t is = scores.id();
  return scores.tape().record(
      "softmax_over_group", std::move(out), {scores},
      [is, group = std::move(group), num_groups](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        std::vector<double> dot(num_groups, 0.0);
        for (std::size_t e = 0; e < group.size(); ++e) dot[group[e]] += g[e] * y[e];
        Tensor& gx = t.grad_accumulator(is);
        for (std::size_t e = 0; e < group.size(); ++e) gx[e] += y[e] * (g[e] - dot[group[e]]);
      });
}

Var softmax_over_group(const Var& scores, const std::shared_ptr<const EdgeList>& edges) {
  return softmax_over_group(scores, edges->dst, edges->num_nodes);
}

Var layer_norm(const Var& a, double eps) {
  const Tensor& x = a.value();
  const std::size_t n = x.rows(), m = x.cols();
  if (m == 0) shape_fail("layer_norm", "zero-width rows");
  Tensor out(n, m);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += x(i, j);
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) out(i, j) = (x(i, j) - mu) * inv_std[i];
  }
  const std::size_t ia = a.id();
  return a.tape().record("layer_norm", std::move(out), {a},
                     [ia, inv_std = std::move(inv_std), m](Tape& t, std::size_t self) {
                       const Tensor& g = t.grad(self);
                       const Tensor& y = t.value(self);
                       Tensor& gx = t.grad_accumulator(ia);
                       const double inv_m = 1.0 / static_cast<double>(m);
                       for (std::size_t i = 0; i < g.rows(); ++i) {
                         double mean_g = 0.0, mean_gy = 0.0;
                         for (std::size_t j = 0; j < m; ++j) {
                           mean_g += g(i, j);
                           mean_gy += g(i, j) * y(i, j);
                         }
                         mean_g *= inv_m;
                         mean_gy *= inv_m;
                         for (std::size_t j = 0; j < m; ++j)
                           gx(i, j) += inv_std[i] * (g(i, j) - mean_g - y(i, j) * mean_gy);
                       }
                     });
}

Var mse(const Var& prediction, const Var& target) {
  require_same_shape("mse", prediction, target);
  const Tensor& p = prediction.value();
  const Tensor& y = target.value();
  if (p.size() == 0) shape_fail("mse", "empty operands");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - y[i]) * (p[i] - y[i]);
  const double inv_n = 1.0 / static_cast<double>(p.size());
  const std::size_t ip = prediction.id(), iy = target.id();
  return prediction.tape().record(
      "mse", Tensor::scalar(acc * inv_n), {prediction, target},
      [ip, iy, inv_n](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor& p = t.value(ip);
        const Tensor& y = t.value(iy);
        if (t.requires_grad(ip)) {
          Tensor& gp = t.grad_accumulator(ip);
          for (std::size_t i = 0; i < p.size(); ++i) gp[i] += 2.0 * g * inv_n * (p[i] - y[i]);
        }
        if (t.requires_grad(iy)) {
          Tensor& gy = t.grad_accumulator(iy);
          for (std::size_t i = 0; i < p.size(); ++i) gy[i] -= 2.0 * g * inv_n * (p[i] - y[i]);
        }
      });
}

Var l2_norm_sq(const std::vector<Var>& tensors) {
  if (tensors.empty()) shape_fail("l2_norm_sq", "no operands");
  double acc = 0.0;
  std::vector<std::size_t> ids;
  for (const Var& v : tensors) {
    require_same_tape("l2_norm_sq", tensors.front(), v);
    for (double x : v.value().data()) acc += x * x;
    ids.push_back(v.id());
  }
  return tensors.front().tape().record(
      "l2_norm_sq", Tensor::scalar(acc), tensors, [ids](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (std::size_t id : ids) {
          if (!t.requires_grad(id)) continue;
          const Tensor& x = t.value(id);
          Tensor& gx = t.grad_accumulator(id);
          for (std::size_t i = 0; i < x.size(); ++i) gx[i] += 2.0 * g * x[i];
        }
      });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double x : a.value().data()) acc += x;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(acc), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) shape_fail("mean", "empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  const Tensor& x = a.value();
  const std::size_t m = x.cols();
  Tensor out(index.size(), m);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= x.rows()) {
      shape_fail("gather_rows", "row " + std::to_string(index[r]) + " out of range for " +
                                    shape_string(x));
    }
    std::copy(x.row(index[r]).begin(), x.row(index[r]).end(), out.row(r).begin());
  }
  const std::size_t ia = a.id();
  return a.tape().record("gather_rows", std::move(out), {a},
                         [ia, index = std::move(index), m](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad_accumulator(ia);
                           for (std::size_t r = 0; r < index.size(); ++r)
                             for (std::size_t j = 0; j < m; ++j) gx(index[r], j) += g(r, j);
                         });
}

Var edge_aggregate(const Var& h, const Var* weights,
                   const std::shared_ptr<const EdgeList>& edges) {
  const Tensor& hv = h.value();
  const EdgeList& el = *edges;
  const std::size_t m = hv.cols();
  if (el.offsets.size() != el.num_nodes + 1) shape_fail("edge_aggregate", "malformed edge list");
  for (std::size_t s : el.src) {
    if (s >= hv.rows()) {
      shape_fail("edge_aggregate", "source " + std::to_string(s) + " out of range for " +
                                       shape_string(hv));
    }
  }
  const Tensor* wv = nullptr;
  if (weights != nullptr) {
    require_same_tape("edge_aggregate", h, *weights);
    wv = &weights->value();
    require_column("edge_aggregate", *wv, el.num_edges());
  }
  Tensor out(el.num_nodes, m);
  std::vector<double> hi(m), lo(m);
  for (std::size_t i = 0; i < el.num_nodes; ++i) {
    std::fill(hi.begin(), hi.end(), 0.0);
    std::fill(lo.begin(), lo.end(), 0.0);
    for (std::size_t e = el.offsets[i]; e < el.offsets[i + 1]; ++e) {
      const double w = wv != nullptr ? (*wv)[e] : 1.0;
      compensated_axpy(w, hv.row(el.src[e]).data(), hi.data(), lo.data(), m);
    }
    compensated_finish(hi.data(), lo.data(), out.row(i).data(), m);
  }
  const std::size_t ih = h.id();
  const bool weighted = weights != nullptr;
  const std::size_t iw = weighted ? weights->id() : 0;
  std::vector<Var> parents{h};
  if (weighted) parents.push_back(*weights);
  return h.tape().record(
      "edge_aggregate", std::move(out), parents,
      [ih, iw, weighted, edges, m](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const EdgeList& el = *edges;
        if (t.requires_grad(ih)) {
          Tensor& gh = t.grad_accumulator(ih);
          const Tensor* wv = weighted ? &t.value(iw) : nullptr;
          for (std::size_t e = 0; e < el.num_edges(); ++e) {
            const double w = wv != nullptr ? (*wv)[e] : 1.0;
            const double* gd = g.row(el.dst[e]).data();
            double* out = gh.row(el.src[e]).data();
            for (std::size_t j = 0; j < m; ++j) out[j] += w * gd[j];
          }
        }
        if (weighted && t.requires_grad(iw)) {
          const Tensor& hv = t.value(ih);
          Tensor& gw = t.grad_accumulator(iw);
          for (std::size_t e = 0; e < el.num_edges(); ++e) {
            const double* gd = g.row(el.dst[e]).data();
            const double* hs = hv.row(el.src[e]).data();
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += gd[j] * hs[j];
            gw[e] += acc;
          }
        }
      });
}

Var edge_dot(const Var& q, const Var& k, const std::shared_ptr<const EdgeList>& edges) {
  require_same_shape("edge_dot", q, k);
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const EdgeList& el = *edges;
  const std::size_t m = qv.cols();
  Tensor out(el.num_edges(), 1);
  for (std::size_t e = 0; e < el.num_edges(); ++e) {
    if (el.dst[e] >= qv.rows() || el.src[e] >= kv.rows()) {
      shape_fail("edge_dot", "edge endpoint out of range for " + shape_string(qv));
    }
    const double* a = qv.row(el.dst[e]).data();
    const double* b = kv.row(el.src[e]).data();
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += a[j] * b[j];
    out[e] = acc;
  }
  const std::size_t iq = q.id(), ik = k.id();
  return q.tape().record("edge_dot", std::move(out), {q, k},
                         [iq, ik, edges, m](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const EdgeList& el = *edges;
                           const Tensor& qv = t.value(iq);
                           const Tensor& kv = t.value(ik);
                           if (t.requires_grad(iq)) {
                             Tensor& gq = t.grad_accumulator(iq);
                             for (std::size_t e = 0; e < el.num_edges(); ++e) {
                               const double* b = kv.row(el.src[e]).data();
                               double* out = gq.row(el.dst[e]).data();
                               for (std::size_t j = 0; j < m; ++j) out[j] += g[e] * b[j];
                             }
                           }
                           if (t.requires_grad(ik)) {
                             Tensor& gk = t.grad_accumulator(ik);
                             for (std::size_t e = 0; e < el.num_edges(); ++e) {
                               const double* a = qv.row(el.dst[e]).data();
                               double* out = gk.row(el.src[e]).data();
                               for (std::size_t j = 0; j < m; ++j) out[j] += g[e] * a[j];
                             }
                           }
                         });
}

Var pairwise_sq_dist(const Var& a, const Var& b) {
  require_same_tape("pairwise_sq_dist", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) shape_fail("pairwise_sq_dist", av, bv);
  const std::size_t n1 = av.rows(), n0 = bv.rows(), m = av.cols();
  Tensor out(n1, n0);
  for (std::size_t i = 0; i < n1; ++i) {
    const double* x = av.row(i).data();
    for (std::size_t j = 0; j < n0; ++j) {
      const double* y = bv.row(j).data();
      double acc = 0.0;
      for (std::size_t d = 0; d < m; ++d) {
        const double diff = x[d] - y[d];
        acc += diff * diff;
      }
      out(i, j) = acc;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      "pairwise_sq_dist", std::move(out), {a, b},
      [ia, ib, n1, n0, m](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        // dA_i = 2 (rowsum(G)_i a_i - (G B)_i); dB_j = 2 (colsum(G)_j b_j - (G^T A)_j)
        if (t.requires_grad(ia)) {
          Tensor gb(n1, m);
          gemm_nn(g.data().data(), bv.data().data(), gb.data().data(), n1, n0, m);
          Tensor& ga = t.grad_accumulator(ia);
          for (std::size_t i = 0; i < n1; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < n0; ++j) rs += g(i, j);
            for (std::size_t d = 0; d < m; ++d) ga(i, d) += 2.0 * (rs * av(i, d) - gb(i, d));
          }
        }
        if (t.requires_grad(ib)) {
          Tensor gta(n0, m);
          gemm_tn(g.data().data(), av.data().data(), gta.data().data(), n1, n0, m);
          std::vector<double> cs(n0, 0.0);
          for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t j = 0; j < n0; ++j) cs[j] += g(i, j);
          Tensor& gbv = t.grad_accumulator(ib);
          for (std::size_t j = 0; j < n0; ++j)
            for (std::size_t d = 0; d < m; ++d) gbv(j, d) += 2.0 * (cs[j] * bv(j, d) - gta(j, d));
        }
      });
}

Var pairwise_sq_diff(const Var& a, const Var& b) {
  require_same_tape("pairwise_sq_diff", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != 1 || bv.cols() != 1) shape_fail("pairwise_sq_diff", av, bv);
  const std::size_t n1 = av.rows(), n0 = bv.rows();
  Tensor out(n1, n0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n0; ++j) {
      const double d = av[i] - bv[j];
      out(i, j) = d * d;
    }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("pairwise_sq_diff", std::move(out), {a, b},
                         [ia, ib, n1, n0](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const Tensor& av = t.value(ia);
                           const Tensor& bv = t.value(ib);
                           const bool ga_on = t.requires_grad(ia);
                           const bool gb_on = t.requires_grad(ib);
                           std::vector<double> da(n1, 0.0), db(n0, 0.0);
                           for (std::size_t i = 0; i < n1; ++i)
                             for (std::size_t j = 0; j < n0; ++j) {
                               const double v = 2.0 * g(i, j) * (av[i] - bv[j]);
                               da[i] += v;
                               db[j] -= v;
                             }
                           if (ga_on) {
                             Tensor& gx = t.grad_accumulator(ia);
                             for (std::size_t i = 0; i < n1; ++i) gx[i] += da[i];
                           }
                           if (gb_on) {
                             Tensor& gx = t.grad_accumulator(ib);
                             for (std::size_t j = 0; j < n0; ++j) gx[j] += db[j];
                           }
                         });
}

Var frobenius_dot(const Var& a, const Tensor& weight) {
  const Tensor& av = a.value();
  if (!av.same_shape(weight)) shape_fail("frobenius_dot", av, weight);
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * weight[i];
  const std::size_t ia = a.id();
  return a.tape().record("frobenius_dot", Tensor::scalar(acc), {a},
                         [ia, weight](Tape& t, std::size_t self) {
                           const double g = t.grad(self)[0];
                           Tensor& gx = t.grad_accumulator(ia);
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * weight[i];
                         });
}

Var dropout(const Var& a, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  const Tensor& av = a.value();
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv_keep = 1.0 / (1.0 - rate);
  Tensor mask(av.rows(), av.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? inv_keep : 0.0;
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * mask[i];
  const std::size_t ia = a.id();
  return a.tape().record("dropout", std::move(out), {a},
                         [ia, mask = std::move(mask)](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& gx = t.grad_accumulator(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                         });
}

}  // namespace gite::ag
