#pragma once

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "gite/ag/edge_list.hpp"
#include "gite/ag/tape.hpp"

namespace gite::ag {

using Rng = std::mt19937_64;

// Every op checks operand shapes (ShapeError naming the op) and rejects
// non-finite results (NumericError). Operands must share one tape.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product.
Var mul(const Var& a, const Var& b);
/// a + row, with `row` of shape [1, cols] broadcast over rows of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
/// a * s for a [1, 1] variable s.
Var scale_by(const Var& a, const Var& s);
Var add_scalar(const Var& a, double c);
/// Multiplies row i of a by s[i]; s is [rows, 1].
Var row_scale(const Var& a, const Var& s);
Var concat_cols(const std::vector<Var>& parts);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);

/// Softmax of a column of scores within each group; group[e] < num_groups.
/// Subtracts the per-group maximum first. Every listed group must be
/// non-empty.
Var softmax_over_group(const Var& scores, std::vector<std::size_t> group,
                       std::size_t num_groups);
/// Softmax of per-edge scores over each destination's incoming edges.
Var softmax_over_group(const Var& scores, const std::shared_ptr<const EdgeList>& edges);

/// Row-wise normalization to zero mean and unit variance, no affine part.
Var layer_norm(const Var& a, double eps = 1e-5);

Var mse(const Var& prediction, const Var& target);
Var l2_norm_sq(const std::vector<Var>& tensors);
Var sum(const Var& a);
Var mean(const Var& a);

Var gather_rows(const Var& a, std::vector<std::size_t> index);

/// out[dst[e]] += w[e] * h[src[e]]; unweighted when `weights` is null.
/// Accumulation is compensated (see accurate_sum.hpp).
Var edge_aggregate(const Var& h, const Var* weights,
                   const std::shared_ptr<const EdgeList>& edges);
/// Per-edge dot product q[dst[e]] . k[src[e]], shape [num_edges, 1].
Var edge_dot(const Var& q, const Var& k, const std::shared_ptr<const EdgeList>& edges);

/// D[i][j] = |a_i - b_j|^2 for rows of a and b.
Var pairwise_sq_dist(const Var& a, const Var& b);
/// D[i][j] = (a_i - b_j)^2 for column vectors a and b.
Var pairwise_sq_diff(const Var& a, const Var& b);
/// sum(a * weight) with a constant weight tensor.
Var frobenius_dot(const Var& a, const Tensor& weight);

/// Inverted dropout. Identity unless `training`.
Var dropout(const Var& a, double rate, Rng& rng, bool training);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace gite::ag
