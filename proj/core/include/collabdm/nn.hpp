#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "collabdm/tensor.hpp"

namespace collabdm::nn {

/// Cross-correlation (no kernel flip). input [N,Cin,H,W], weights
/// [Cout,Cin,k,k], square odd kernel. Output [N,Cout,H',W'] with
/// H' = (H + 2*pad - k)/stride + 1.
template <typename S>
BasicTensor<S> conv2d(const BasicTensor<S>& input,
                      const BasicTensor<S>& weights, int stride, int pad);

/// Exact adjoint of conv2d with respect to the input.
template <typename S>
BasicTensor<S> conv2d_input_grad(const BasicTensor<S>& weights,
                                 const BasicTensor<S>& out_grad, int in_h,
                                 int in_w, int stride, int pad);

/// Exact adjoint of conv2d with respect to the weights.
template <typename S>
BasicTensor<S> conv2d_weight_grad(const BasicTensor<S>& input,
                                  const BasicTensor<S>& out_grad, int kernel,
                                  int stride, int pad);

/// Per-(n,c) slice normalization: (x - mean) / sqrt(var + eps), no affine.
template <typename S>
BasicTensor<S> instance_norm(const BasicTensor<S>& input, double epsilon);

template <typename S>
BasicTensor<S> instance_norm_input_grad(const BasicTensor<S>& input,
                                        const BasicTensor<S>& upstream,
                                        double epsilon);

template <typename S>
BasicTensor<S> relu(const BasicTensor<S>& input);

template <typename S>
BasicTensor<S> relu_input_grad(const BasicTensor<S>& input,
                               const BasicTensor<S>& upstream);

/// 2x2 average pooling, stride 2. Requires even H and W.
template <typename S>
BasicTensor<S> avg_pool2(const BasicTensor<S>& input);

template <typename S>
BasicTensor<S> avg_pool2_input_grad(int in_h, int in_w,
                                    const BasicTensor<S>& upstream);

/// Fully connected layer: input [N,D], weights [K,D], bias [K] -> [N,K].
template <typename S>
BasicTensor<S> linear(const BasicTensor<S>& input, const BasicTensor<S>& weights,
                      const BasicTensor<S>& bias);

template <typename S>
BasicTensor<S> linear_input_grad(const BasicTensor<S>& weights,
                                 const BasicTensor<S>& upstream);

template <typename S>
BasicTensor<S> linear_weight_grad(const BasicTensor<S>& input,
                                  const BasicTensor<S>& upstream);

template <typename S>
BasicTensor<S> linear_bias_grad(const BasicTensor<S>& upstream);

/// Bilinear resize of [N,C,H,W] to (out_h, out_w), align_corners = false:
/// source coordinate of output pixel o is (o + 0.5) * (in/out) - 0.5,
/// clamped to the valid range.
template <typename S>
BasicTensor<S> bilinear_upsample(const BasicTensor<S>& input, int out_h,
                                 int out_w);

template <typename S>
BasicTensor<S> bilinear_upsample_input_grad(int in_h, int in_w,
                                            const BasicTensor<S>& upstream);

/// Mean negative log-likelihood over the batch and its gradient
/// (softmax - onehot)/N. logits [N,K], labels in [0,K).
template <typename S>
std::pair<double, BasicTensor<S>>
softmax_cross_entropy(const BasicTensor<S>& logits,
                      const std::vector<int>& labels);

/// Row-major matrix product C[M,N] += A[M,K] * B[K,N]. C must be
/// pre-sized and zeroed by the caller.
template <typename S>
void matmul_accum(const S* a, const S* b, S* c, int m, int k, int n);

} // namespace collabdm::nn
