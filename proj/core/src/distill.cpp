#include "collabdm/distill.hpp"

#include <algorithm>
#include <cmath>

#include "collabdm/errors.hpp"
#include "collabdm/nn.hpp"

namespace collabdm {

template <typename S>
void SyntheticSetT<S>::validate() const {
  if (num_classes < 1 || ipc < 1) {
    throw ConfigError("synthetic set: num_classes and ipc must be >= 1");
  }
  if (pae_l < 1 || height % pae_l != 0 || width % pae_l != 0) {
    throw ConfigError("synthetic set: pae factor " + std::to_string(pae_l) +
                      " must divide extents " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  if (static_cast<int>(images.size()) != num_classes ||
      static_cast<int>(momentum.size()) != num_classes) {
    throw ConfigError("synthetic set: per-class tensor count mismatch");
  }
}

template struct SyntheticSetT<float>;
template struct SyntheticSetT<double>;

void DMConfig::validate() const {
  if (local_lr <= 0 || server_lr <= 0 || local_iters < 0 || batch < 1 ||
      momentum < 0 || ipc < 1 || pae_l < 1 || max_syn_batch < 1) {
    throw ConfigError("distillation config: all parameters must be positive "
                      "(local_iters may be 0)");
  }
}

SyntheticSet init_synthetic(const ClientShard& shard, const Dataset& dataset,
                            int ipc, int pae_l, RngStream& rng) {
  if (ipc < 1) {
    throw ConfigError("init_synthetic: ipc must be >= 1");
  }
  SyntheticSet set;
  set.num_classes = dataset.num_classes;
  set.ipc = ipc;
  set.pae_l = pae_l;
  set.channels = dataset.images.dim(1);
  set.height = dataset.images.dim(2);
  set.width = dataset.images.dim(3);
  const int64_t stride =
      static_cast<int64_t>(set.channels) * set.height * set.width;
  for (int y = 0; y < set.num_classes; ++y) {
    Tensor cls({ipc, set.channels, set.height, set.width});
    const auto picks = sample_class_indices(shard, y, ipc, rng);
    for (size_t i = 0; i < picks.size(); ++i) {
      copy_image(dataset.images, picks[i], cls, static_cast<int>(i));
    }
    for (size_t i = picks.size(); i < static_cast<size_t>(ipc); ++i) {
      for (int64_t j = 0; j < stride; ++j) {
        cls[static_cast<int64_t>(i) * stride + j] =
            static_cast<float>(rng.next_double());
      }
    }
    set.images.push_back(std::move(cls));
    set.momentum.emplace_back(
        std::vector<int>{ipc, set.channels, set.height, set.width});
  }
  set.validate();
  return set;
}

template <typename S>
BasicTensor<S> pae_expand(const BasicTensor<S>& images, int l) {
  require_rank(images, 4, "pae_expand images");
  const int n = images.dim(0), c = images.dim(1);
  const int h = images.dim(2), w = images.dim(3);
  if (l < 1 || h % l != 0 || w % l != 0) {
    throw ConfigError("pae_expand: factor " + std::to_string(l) +
                      " must divide extents " + std::to_string(h) + "x" +
                      std::to_string(w));
  }
  if (l == 1) {
    return images;
  }
  const int ch = h / l, cw = w / l;
  BasicTensor<S> crop({1, c, ch, cw});
  BasicTensor<S> out({n * l * l, c, h, w});
  const int64_t out_stride = static_cast<int64_t>(c) * h * w;
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < l; ++r) {
      for (int s = 0; s < l; ++s) {
        for (int cc = 0; cc < c; ++cc) {
          for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
              crop.at(0, cc, y, x) = images.at(i, cc, r * ch + y, s * cw + x);
            }
          }
        }
        BasicTensor<S> up = nn::bilinear_upsample(crop, h, w);
        const int row = (i * l + r) * l + s;
        for (int64_t j = 0; j < out_stride; ++j) {
          out[row * out_stride + j] = up[j];
        }
      }
    }
  }
  return out;
}

template <typename S>
BasicTensor<S> pae_expand_adjoint(const BasicTensor<S>& out_grad, int l,
                                  int in_h, int in_w) {
  require_rank(out_grad, 4, "pae_expand adjoint upstream");
  if (l == 1) {
    return out_grad;
  }
  const int rows = out_grad.dim(0), c = out_grad.dim(1);
  if (rows % (l * l) != 0) {
    throw DimensionError("pae_expand_adjoint: " + std::to_string(rows) +
                         " rows not a multiple of l^2 = " +
                         std::to_string(l * l));
  }
  const int n = rows / (l * l);
  const int ch = in_h / l, cw = in_w / l;
  BasicTensor<S> grad({n, c, in_h, in_w});
  BasicTensor<S> up({1, c, out_grad.dim(2), out_grad.dim(3)});
  const int64_t row_stride =
      static_cast<int64_t>(c) * out_grad.dim(2) * out_grad.dim(3);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < l; ++r) {
      for (int s = 0; s < l; ++s) {
        const int row = (i * l + r) * l + s;
        for (int64_t j = 0; j < row_stride; ++j) {
          up[j] = out_grad[row * row_stride + j];
        }
        BasicTensor<S> g = nn::bilinear_upsample_input_grad(ch, cw, up);
        for (int cc = 0; cc < c; ++cc) {
          for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
              grad.at(i, cc, r * ch + y, s * cw + x) += g.at(0, cc, y, x);
            }
          }
        }
      }
    }
  }
  return grad;
}

template <typename S>
std::vector<S> embedding_mean(const EncoderParamsT<S>& params,
                              const BasicTensor<S>& batch) {
  const BasicTensor<S> emb = embed(params, batch);
  const int n = emb.dim(0), d = emb.dim(1);
  std::vector<double> acc(static_cast<size_t>(d), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      acc[static_cast<size_t>(j)] += emb.at(i, j);
    }
  }
  std::vector<S> mean(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) {
    mean[static_cast<size_t>(j)] =
        static_cast<S>(n > 0 ? acc[static_cast<size_t>(j)] / n : 0.0);
  }
  return mean;
}

template <typename S>
DmLoss dm_loss(const ClassMeansT<S>& real_means,
               const std::vector<BasicTensor<S>>& syn_batches,
               const EncoderParamsT<S>& params) {
  const size_t classes = syn_batches.size();
  if (real_means.size() != classes) {
    throw DimensionError("dm_loss: " + std::to_string(real_means.size()) +
                         " real means vs " + std::to_string(classes) +
                         " synthetic batches");
  }
  DmLoss out;
  out.per_class.assign(classes, 0.0);
  for (size_t y = 0; y < classes; ++y) {
    if (!real_means[y].has_value() || syn_batches[y].empty()) {
      continue;
    }
    const auto& target = *real_means[y];
    if (static_cast<int>(target.size()) != params.spec.embedding_dim()) {
      throw DimensionError("dm_loss: class " + std::to_string(y) +
                           " real mean has dimension " +
                           std::to_string(target.size()) + ", encoder emits " +
                           std::to_string(params.spec.embedding_dim()));
    }
    const auto syn_mean = embedding_mean(params, syn_batches[y]);
    double acc = 0;
    for (size_t j = 0; j < target.size(); ++j) {
      const double d = static_cast<double>(target[j]) - syn_mean[j];
      acc += d * d;
    }
    out.per_class[y] = acc;
    out.total += acc;
  }
  return out;
}

template <typename S>
DmGradT<S> dm_grad(const SyntheticSetT<S>& synthetic,
                   const ClassMeansT<S>& real_means,
                   const EncoderParamsT<S>& params, RngStream& rng,
                   int max_syn_batch) {
  if (static_cast<int>(real_means.size()) != synthetic.num_classes) {
    throw DimensionError("dm_grad: " + std::to_string(real_means.size()) +
                         " real means vs " +
                         std::to_string(synthetic.num_classes) + " classes");
  }
  DmGradT<S> out;
  out.loss.per_class.assign(static_cast<size_t>(synthetic.num_classes), 0.0);
  const int edim = params.spec.embedding_dim();
  for (int y = 0; y < synthetic.num_classes; ++y) {
    const auto& stored = synthetic.images[static_cast<size_t>(y)];
    out.grads.emplace_back(stored.shape());
    if (!real_means[static_cast<size_t>(y)].has_value()) {
      continue; // absent class: zero gradient, skipped in the loss
    }
    const auto& target = *real_means[static_cast<size_t>(y)];
    if (static_cast<int>(target.size()) != edim) {
      throw DimensionError("dm_grad: class " + std::to_string(y) +
                           " real mean dimension " +
                           std::to_string(target.size()) + " != " +
                           std::to_string(edim));
    }

    BasicTensor<S> expanded = pae_expand(stored, synthetic.pae_l);
    const int total = expanded.dim(0);
    std::vector<int> selected(static_cast<size_t>(total));
    for (int i = 0; i < total; ++i) {
      selected[static_cast<size_t>(i)] = i;
    }
    if (total > max_syn_batch) {
      for (int i = 0; i < max_syn_batch; ++i) {
        const int j = i + static_cast<int>(rng.next_below(
                              static_cast<uint64_t>(total - i)));
        std::swap(selected[static_cast<size_t>(i)],
                  selected[static_cast<size_t>(j)]);
      }
      selected.resize(static_cast<size_t>(max_syn_batch));
    }
    const int b = static_cast<int>(selected.size());

    const int64_t stride = static_cast<int64_t>(expanded.dim(1)) *
                           expanded.dim(2) * expanded.dim(3);
    BasicTensor<S> batch({b, expanded.dim(1), expanded.dim(2),
                          expanded.dim(3)});
    for (int i = 0; i < b; ++i) {
      copy_image(expanded, selected[static_cast<size_t>(i)], batch, i);
    }

    const BasicTensor<S> emb = embed(params, batch);
    std::vector<double> mean(static_cast<size_t>(edim), 0.0);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < edim; ++j) {
        mean[static_cast<size_t>(j)] += emb.at(i, j);
      }
    }
    double loss_y = 0;
    std::vector<S> dmean(static_cast<size_t>(edim));
    for (int j = 0; j < edim; ++j) {
      mean[static_cast<size_t>(j)] /= b;
      const double diff =
          mean[static_cast<size_t>(j)] - static_cast<double>(target[j]);
      loss_y += diff * diff;
      // d loss / d emb[i,j] = 2 * (mean_j - target_j) / b
      dmean[static_cast<size_t>(j)] = static_cast<S>(2.0 * diff / b);
    }
    out.loss.per_class[static_cast<size_t>(y)] = loss_y;
    out.loss.total += loss_y;

    BasicTensor<S> upstream({b, edim});
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < edim; ++j) {
        upstream.at(i, j) = dmean[static_cast<size_t>(j)];
      }
    }
    const BasicTensor<S> batch_grad = embed_input_grad(params, batch, upstream);

    BasicTensor<S> expanded_grad(expanded.shape());
    for (int i = 0; i < b; ++i) {
      const int row = selected[static_cast<size_t>(i)];
      for (int64_t j = 0; j < stride; ++j) {
        expanded_grad[row * stride + j] = batch_grad[i * stride + j];
      }
    }
    out.grads[static_cast<size_t>(y)] = pae_expand_adjoint(
        expanded_grad, synthetic.pae_l, synthetic.height, synthetic.width);
  }
  return out;
}

template <typename S>
void sgd_step(SyntheticSetT<S>& synthetic,
              const std::vector<BasicTensor<S>>& grads, double lr,
              double momentum) {
  if (grads.size() != synthetic.images.size()) {
    throw DimensionError("sgd_step: gradient class count mismatch");
  }
  for (size_t y = 0; y < grads.size(); ++y) {
    auto& x = synthetic.images[y];
    auto& v = synthetic.momentum[y];
    const auto& g = grads[y];
    if (!g.same_shape(x)) {
      throw DimensionError("sgd_step: class " + std::to_string(y) +
                           " gradient " + g.shape_str() + " vs images " +
                           x.shape_str());
    }
    for (int64_t i = 0; i < x.size(); ++i) {
      v[i] = static_cast<S>(momentum * v[i] + g[i]);
      x[i] = static_cast<S>(
          std::clamp(static_cast<double>(x[i]) - lr * v[i], 0.0, 1.0));
    }
  }
}

SyntheticSet local_distill(const ClientShard& shard, const Dataset& dataset,
                           const DMConfig& config, const EncoderSpec& spec,
                           RngStream& rng) {
  config.validate();
  spec.validate();
  SyntheticSet set =
      init_synthetic(shard, dataset, config.ipc, config.pae_l, rng);
  for (int iter = 0; iter < config.local_iters; ++iter) {
    const uint64_t seed = rng.next_u64();
    const EncoderParams params = materialize<float>(seed, spec);
    ClassMeans means(static_cast<size_t>(dataset.num_classes));
    for (int y = 0; y < dataset.num_classes; ++y) {
      if (!shard.has_class(y)) {
        continue;
      }
      const Tensor batch =
          sample_class_batch(shard, dataset, y, config.batch, rng);
      means[static_cast<size_t>(y)] = embedding_mean(params, batch);
    }
    const auto result =
        dm_grad(set, means, params, rng, config.max_syn_batch);
    sgd_step(set, result.grads, config.local_lr, config.momentum);
  }
  return set;
}

void encode_synthetic(ByteWriter& w, const SyntheticSet& set) {
  w.u32(static_cast<uint32_t>(set.num_classes));
  w.u32(static_cast<uint32_t>(set.ipc));
  w.u32(static_cast<uint32_t>(set.pae_l));
  Tensor all({set.num_classes * set.ipc, set.channels, set.height,
              set.width});
  const int64_t stride =
      static_cast<int64_t>(set.channels) * set.height * set.width;
  for (int y = 0; y < set.num_classes; ++y) {
    const auto& cls = set.images[static_cast<size_t>(y)];
    for (int i = 0; i < set.ipc; ++i) {
      for (int64_t j = 0; j < stride; ++j) {
        all[(static_cast<int64_t>(y) * set.ipc + i) * stride + j] =
            cls[i * stride + j];
      }
    }
  }
  encode_tensor(w, all);
}

SyntheticSet decode_synthetic(ByteReader& r) {
  SyntheticSet set;
  set.num_classes = static_cast<int>(r.u32());
  set.ipc = static_cast<int>(r.u32());
  set.pae_l = static_cast<int>(r.u32());
  const Tensor all = decode_tensor(r);
  if (all.rank() != 4 ||
      all.dim(0) != set.num_classes * set.ipc) {
    throw FormatError("synthetic set: tensor shape " + all.shape_str() +
                      " inconsistent with header (" +
                      std::to_string(set.num_classes) + " classes x " +
                      std::to_string(set.ipc) + " ipc)");
  }
  set.channels = all.dim(1);
  set.height = all.dim(2);
  set.width = all.dim(3);
  const int64_t stride =
      static_cast<int64_t>(set.channels) * set.height * set.width;
  for (int y = 0; y < set.num_classes; ++y) {
    Tensor cls({set.ipc, set.channels, set.height, set.width});
    for (int i = 0; i < set.ipc; ++i) {
      for (int64_t j = 0; j < stride; ++j) {
        cls[i * stride + j] =
            all[(static_cast<int64_t>(y) * set.ipc + i) * stride + j];
      }
    }
    set.images.push_back(std::move(cls));
    set.momentum.emplace_back(
        std::vector<int>{set.ipc, set.channels, set.height, set.width});
  }
  set.validate();
  return set;
}

void save_synthetic(const std::filesystem::path& path,
                    const SyntheticSet& set) {
  ByteWriter w;
  w.magic("CDS1");
  encode_synthetic(w, set);
  write_file_bytes(path, w.bytes());
}

SyntheticSet load_synthetic(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path.string());
  r.expect_magic("CDS1", "synthetic set file");
  SyntheticSet set = decode_synthetic(r);
  r.expect_end("synthetic set");
  return set;
}

#define COLLABDM_INSTANTIATE_DISTILL(S)                                       \
  template BasicTensor<S> pae_expand<S>(const BasicTensor<S>&, int);          \
  template BasicTensor<S> pae_expand_adjoint<S>(const BasicTensor<S>&, int,   \
                                                int, int);                    \
  template std::vector<S> embedding_mean<S>(const EncoderParamsT<S>&,         \
                                            const BasicTensor<S>&);           \
  template DmLoss dm_loss<S>(const ClassMeansT<S>&,                           \
                             const std::vector<BasicTensor<S>>&,              \
                             const EncoderParamsT<S>&);                       \
  template DmGradT<S> dm_grad<S>(const SyntheticSetT<S>&,                     \
                                 const ClassMeansT<S>&,                       \
                                 const EncoderParamsT<S>&, RngStream&, int);  \
  template void sgd_step<S>(SyntheticSetT<S>&,                                \
                            const std::vector<BasicTensor<S>>&, double,       \
                            double);

COLLABDM_INSTANTIATE_DISTILL(float)
COLLABDM_INSTANTIATE_DISTILL(double)

#undef COLLABDM_INSTANTIATE_DISTILL

} // namespace collabdm
