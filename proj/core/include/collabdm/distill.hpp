#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "collabdm/data.hpp"
#include "collabdm/encoder.hpp"
#include "collabdm/rng.hpp"
#include "collabdm/serialize.hpp"
#include "collabdm/tensor.hpp"

namespace collabdm {

/// The learnable synthetic set: per-class image tensors plus matching
/// momentum buffers. The stored budget (num_classes * ipc * C * H * W
/// scalars) is independent of the partition-and-expand factor pae_l.
template <typename S>
struct SyntheticSetT {
  int num_classes = 0;
  int ipc = 0;
  int pae_l = 1;
  int channels = 0, height = 0, width = 0;
  std::vector<BasicTensor<S>> images;   // per class [ipc,C,H,W]
  std::vector<BasicTensor<S>> momentum; // same shapes, zero-initialized

  int64_t stored_scalars() const {
    return static_cast<int64_t>(num_classes) * ipc * channels * height *
           width;
  }
  /// Samples per class after expansion.
  int expanded_per_class() const { return ipc * pae_l * pae_l; }
  void validate() const;

  template <typename T>
  SyntheticSetT<T> cast() const {
    SyntheticSetT<T> out;
    out.num_classes = num_classes;
    out.ipc = ipc;
    out.pae_l = pae_l;
    out.channels = channels;
    out.height = height;
    out.width = width;
    for (const auto& t : images) {
      out.images.push_back(t.template cast<T>());
    }
    for (const auto& t : momentum) {
      out.momentum.push_back(t.template cast<T>());
    }
    return out;
  }
};

using SyntheticSet = SyntheticSetT<float>;

/// Distillation hyperparameters. Defaults follow the reference training
/// regime: local lr 1.0, server lr 10, 1000 local iterations, real-data
/// batch 512, momentum 0.5.
struct DMConfig {
  double local_lr = 1.0;
  double server_lr = 10.0;
  int local_iters = 1000;
  int batch = 512;
  double momentum = 0.5;
  int ipc = 10;
  int pae_l = 1;
  int max_syn_batch = 256; // per-class synthetic batch cap in dm_grad
  void validate() const;
};

/// Per-class mean-embedding targets; absent entries mean the class
/// contributes nothing this round and is skipped in the loss.
template <typename S>
using ClassMeansT = std::vector<std::optional<std::vector<S>>>;

using ClassMeans = ClassMeansT<float>;

struct DmLoss {
  double total = 0;
  std::vector<double> per_class; // 0 for skipped classes
};

/// Per-class IPC real examples sampled without replacement from the shard;
/// classes the shard lacks (or exhausts) are padded with uniform noise.
SyntheticSet init_synthetic(const ClientShard& shard, const Dataset& dataset,
                            int ipc, int pae_l, RngStream& rng);

/// Splits each image into l x l crops and bilinearly upsamples each crop
/// back to (H, W). Output rows are ordered (image, crop row, crop col).
/// l = 1 is the identity.
template <typename S>
BasicTensor<S> pae_expand(const BasicTensor<S>& images, int l);

/// Adjoint of pae_expand: routes gradients on expanded samples back to the
/// stored pixels.
template <typename S>
BasicTensor<S> pae_expand_adjoint(const BasicTensor<S>& out_grad, int l,
                                  int in_h, int in_w);

/// Column mean of embed(params, batch), accumulated at 64-bit.
template <typename S>
std::vector<S> embedding_mean(const EncoderParamsT<S>& params,
                              const BasicTensor<S>& batch);

/// Sum over classes of || real_mean_y - mean(embed(syn_batch_y)) ||^2.
/// Classes with an absent real mean or an empty synthetic batch are
/// skipped.
template <typename S>
DmLoss dm_loss(const ClassMeansT<S>& real_means,
               const std::vector<BasicTensor<S>>& syn_batches,
               const EncoderParamsT<S>& params);

/// Loss and exact gradient with respect to the stored pixels, chaining
/// through pae_expand. Per class the synthetic batch is the full expanded
/// set when it holds <= max_syn_batch samples, else a uniform subsample.
template <typename S>
struct DmGradT {
  DmLoss loss;
  std::vector<BasicTensor<S>> grads; // per class, stored-pixel shape
};

template <typename S>
DmGradT<S> dm_grad(const SyntheticSetT<S>& synthetic,
                   const ClassMeansT<S>& real_means,
                   const EncoderParamsT<S>& params, RngStream& rng,
                   int max_syn_batch = 256);

/// Momentum SGD on the stored pixels with clamping to [0,1]:
/// v <- momentum * v + g; x <- clamp(x - lr * v, 0, 1).
template <typename S>
void sgd_step(SyntheticSetT<S>& synthetic,
              const std::vector<BasicTensor<S>>& grads, double lr,
              double momentum);

/// Client-local distillation: init from real examples, then local_iters
/// rounds of (fresh random encoder, per-class real batch means, dm_grad,
/// sgd_step). Classes absent from the shard stay at initialization.
SyntheticSet local_distill(const ClientShard& shard, const Dataset& dataset,
                           const DMConfig& config, const EncoderSpec& spec,
                           RngStream& rng);

// Synthetic-set file ("CDS1"): num_classes u32, ipc u32, pae_l u32, then an
// embedded CDT1 tensor record of shape [num_classes*ipc, C, H, W] in class-
// major row order. Momentum buffers are not persisted.
void encode_synthetic(ByteWriter& w, const SyntheticSet& set);
SyntheticSet decode_synthetic(ByteReader& r);
void save_synthetic(const std::filesystem::path& path,
                    const SyntheticSet& set);
SyntheticSet load_synthetic(const std::filesystem::path& path);

} // namespace collabdm
