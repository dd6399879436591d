#pragma once

// Differentiable operations on Tensor. Spatio-temporal tensors are laid out
// [channels, time, height, width]; convolution kernels [c_out, c_in, kt, kh, kw].

#include <vector>

#include "hpnet/tensor.hpp"

namespace hpnet {

/// Kernel weights plus an optional per-output-channel bias.
struct ConvKernel3D {
  Tensor weight;  // [c_out, c_in, kt, kh, kw], all extents odd
  Tensor bias;    // [c_out] or undefined

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
};

// ---- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// min(p_max, x); gradient 1 strictly below the ceiling, 0 at and above it.
Tensor satlu(const Tensor& x, double p_max);

// ---- reductions ------------------------------------------------------------
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// mean((a - b)^2) as a single node.
Tensor mean_squared_error(const Tensor& a, const Tensor& b);

// ---- structure -------------------------------------------------------------
/// Stacks along axis 0 in argument order; remaining dims must match.
Tensor concat_channels(const std::vector<Tensor>& parts);
/// Rows [begin, begin + count) of axis 0.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

// ---- spatial resampling ----------------------------------------------------
/// 2x2 max over (H, W); ties send the gradient to the lowest flat index.
Tensor maxpool_spatial(const Tensor& x);
/// Nearest-neighbour 2x expansion over (H, W).
Tensor upsample_spatial(const Tensor& x);

// ---- convolution -----------------------------------------------------------
/// "Same"-padded 3D cross-correlation with optional bias.
Tensor conv3d(const Tensor& input, const ConvKernel3D& kernel);
/// Bias-free conv3d that only visits non-zero input sites (scatter form).
/// Bias, if present on the kernel, is ignored so the map stays linear.
Tensor sparse_conv3d(const Tensor& delta_input, const ConvKernel3D& kernel);

}  // namespace hpnet
