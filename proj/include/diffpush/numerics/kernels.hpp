#pragma once

#include <cstddef>
#include <span>

#include "diffpush/numerics/tensor.hpp"

// Dense kernels shared by inference and the autodiff tape.
//
// Every output element is accumulated in a fixed order (ascending reduction
// index, one fused multiply-add per term) that does not depend on the batch
// size or on which rows are processed together. A row therefore produces the
// same bits whether it is evaluated alone or inside a larger batch.
namespace diffpush::numerics::kernels {

// y[r] = b + x[r] * W   with x: [rows x in], W: [in x out], b: [out].
void affine(const Tensor& x, const Tensor& weight, const Tensor& bias,
            Tensor& y);

// dx[r] = dy[r] * W^T
void affine_input_grad(const Tensor& dy, const Tensor& weight, Tensor& dx);

// dW += x^T dy,  db += column sums of dy.
void affine_param_grad(const Tensor& x, const Tensor& dy, Tensor& dweight,
                       Tensor& dbias);

// Algebraic sigmoid 0.5 * (1 + v / sqrt(1 + v^2)); smooth, in (0, 1).
double gate(double v);
// Sigmoid-weighted linear unit using the algebraic gate: y = x * gate(x).
void gated_linear(std::span<const double> x, std::span<double> y);
// dx = dy * d/dx [x * gate(x)]
void gated_linear_grad(std::span<const double> x, std::span<const double> dy,
                       std::span<double> dx);

}  // namespace diffpush::numerics::kernels
