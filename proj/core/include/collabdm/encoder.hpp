#pragma once

#include <cstdint>
#include <vector>

#include "collabdm/rng.hpp"
#include "collabdm/tensor.hpp"

namespace collabdm {

/// Architecture of the random embedding ConvNets: num_blocks repetitions of
/// conv(kernel, channels) -> instance_norm -> relu -> avg_pool2, then a
/// flatten of the final feature map. Spatial extents must be divisible by
/// 2^num_blocks. Default is the desk-scale 2-block/16-channel network; the
/// full-scale configuration is 3 blocks of 128 channels.
struct EncoderSpec {
  int num_blocks = 2;
  int channels = 16;
  int kernel = 3;
  int in_channels = 1;
  int in_h = 16;
  int in_w = 16;
  double epsilon = 1e-5;

  int out_h() const { return in_h >> num_blocks; }
  int out_w() const { return in_w >> num_blocks; }
  int embedding_dim() const { return channels * out_h() * out_w(); }
  void validate() const;
};

/// Frozen convolution weights of one random encoder plus the seed that
/// produced them. materialize() is a pure function of (seed, spec).
template <typename S>
struct EncoderParamsT {
  uint64_t seed = 0;
  EncoderSpec spec;
  std::vector<BasicTensor<S>> weights; // per block: [Cout,Cin,k,k]
};

using EncoderParams = EncoderParamsT<float>;
using DEncoderParams = EncoderParamsT<double>;

/// Draws Kaiming-normal weights (std = sqrt(2 / (Cin * k^2))) from
/// RngStream(seed), block-major then in tensor index order (output channel
/// major). Gaussians are generated at 64-bit and narrowed to S, so float
/// and double encoders of the same seed agree.
template <typename S>
EncoderParamsT<S> materialize(uint64_t seed, const EncoderSpec& spec);

/// Runs the block stack and flattens: batch [N,C,H,W] -> [N,embedding_dim].
template <typename S>
BasicTensor<S> embed(const EncoderParamsT<S>& params,
                     const BasicTensor<S>& batch);

/// Vector-Jacobian product of embed with respect to the batch.
template <typename S>
BasicTensor<S> embed_input_grad(const EncoderParamsT<S>& params,
                                const BasicTensor<S>& batch,
                                const BasicTensor<S>& upstream);

} // namespace collabdm
