#pragma once

#include <cstddef>
#include <span>

#include "posecast/nn/tape.hpp"

// Differentiable primitives. Matrix ops view rank-1 tensors as a single row.
// Every backward is expressed with these same ops, so second derivatives are
// available for all of them except where noted (sqrt, softmax_cross_entropy).
namespace posecast::nn {

// op(a) * op(b), op = transpose when the flag is set.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);
Var reshape(const Var& a, Shape shape);

// x[n,m] + row[m]
Var add_row(const Var& x, const Var& row);
// [n,m] -> [m]
Var sum_rows(const Var& x);
// [m] -> [n,m]
Var broadcast_rows(const Var& row, std::size_t n);
// [n,m] -> [n,1]
Var sum_cols(const Var& x);

// -> shape {1}
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var broadcast_scalar(const Var& s, Shape shape);

Var leaky_relu(const Var& x, float slope);

// First-order only: the recorded backward treats 1/sqrt(x) as a constant.
Var sqrt(const Var& x);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);

// Mean softmax cross-entropy of logits[n, C] against class indices. First-order only.
Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> targets);

// Weight decay, clipping and other parameter-space helpers work on plain tensors.
Tensor matmul_values(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

}  // namespace posecast::nn
