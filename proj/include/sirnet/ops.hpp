#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sirnet/tensor.hpp"

// Differentiable tensor operations. Every op records itself on the tape when
// any operand requires grad, and throws DimensionError (naming both shapes)
// on incompatible operands.
namespace sirnet {

// Elementwise arithmetic. `add` also accepts a rank-1 `b` matching the last
// axis of `a` (row bias).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// (m x k) * (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, std::size_t axis);
Tensor l1_norm(const Tensor& a);
Tensor l2_norm_sq(const Tensor& a);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

// Structural.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);

/// Elementwise product with a constant mask of identical shape; the mask
/// never receives gradient.
Tensor mask_mul(const Tensor& a, std::span<const double> mask);

/// squash(v) = (|v|^2 / (1 + |v|^2)) * v / |v| along the last axis, with
/// squash(0) = 0.
Tensor squash(const Tensor& a);

/// out[i] = a[i, index[i]] for a rank-2 `a`.
Tensor select_per_row(const Tensor& a, std::span<const std::size_t> index);

/// out[i, j] = |a_i - b_j|^2 for rows of a (m x d) and b (n x d).
Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b);

}  // namespace sirnet
