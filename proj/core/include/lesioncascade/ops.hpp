#pragma once

#include <cstdint>
#include <vector>

#include "lesioncascade/tensor.hpp"

namespace lc {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Multiply by a compile-time constant (not a learnable input).
Tensor scale(const Tensor& x, double factor);

Tensor sum(const Tensor& x);   // scalar output
Tensor mean(const Tensor& x);  // scalar output

// Copying reshape; the element count must be preserved.
Tensor reshape(const Tensor& x, Shape shape);

// Rank-1 concatenation.
Tensor concat(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

// Numerically stabilized softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& x, int axis);

// x:[N,Din] weight:[Dout,Din] bias:[Dout] -> [N,Dout]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// x:[N,Cin,H,W] weight:[Cout,Cin,KH,KW] bias:[Cout] -> [N,Cout,OH,OW]
// OH = (H + 2*padding - KH) / stride + 1, and likewise for OW; the division
// must be exact or a ShapeError is raised.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

// Bilinear resize with corner alignment over the trailing two axes.
// Accepts rank >= 2; leading axes are treated as channels.
Tensor upsample_bilinear(const Tensor& x, std::int64_t out_h, std::int64_t out_w);

// Mean negative log-likelihood over rows of x:[N,C] at the target classes.
// With from_logits the rows pass through a fused log-softmax first; otherwise
// rows must already be probabilities (clamped at 1e-12 inside the log).
Tensor cross_entropy(const Tensor& x, const std::vector<std::int64_t>& targets,
                     bool from_logits = false);

// Same loss for a dense per-pixel map x:[C,H,W] with labels of length H*W.
Tensor pixel_cross_entropy(const Tensor& x, const std::vector<std::int64_t>& labels,
                           bool from_logits = false);

// x:[K,H,W] -> [K], the spatial mean of each channel.
Tensor channel_mean(const Tensor& x);

// x:[K,H,W] scaled per channel by s:[K].
Tensor channel_scale(const Tensor& x, const Tensor& s);

// wa*a + wb*b with learnable weights; wa and wb are either scalars or
// per-channel vectors of length a.dim(0).
Tensor weighted_sum(const Tensor& a, const Tensor& b, const Tensor& wa, const Tensor& wb);

// x:[C,H,W] divided per pixel by the channel sum, so channels sum to one at
// every pixel. The divisor is clamped at 1e-12.
Tensor normalize_channels(const Tensor& x);

}  // namespace lc
