#include "collabdm/encoder.hpp"

#include <cmath>
#include <string>

#include "collabdm/errors.hpp"
#include "collabdm/nn.hpp"

namespace collabdm {

void EncoderSpec::validate() const {
  if (num_blocks < 1 || channels < 1 || in_channels < 1) {
    throw ConfigError("encoder spec: blocks, channels and input channels "
                      "must be positive");
  }
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("encoder spec: kernel must be odd and positive, got " +
                      std::to_string(kernel));
  }
  const int div = 1 << num_blocks;
  if (in_h % div != 0 || in_w % div != 0) {
    throw ConfigError("encoder spec: input extents " + std::to_string(in_h) +
                      "x" + std::to_string(in_w) + " not divisible by 2^" +
                      std::to_string(num_blocks));
  }
  if (embedding_dim() <= 0) {
    throw ConfigError("encoder spec: empty embedding");
  }
  if (epsilon <= 0) {
    throw ConfigError("encoder spec: epsilon must be positive");
  }
}

template <typename S>
EncoderParamsT<S> materialize(uint64_t seed, const EncoderSpec& spec) {
  spec.validate();
  EncoderParamsT<S> params;
  params.seed = seed;
  params.spec = spec;
  RngStream rng(seed);
  int cin = spec.in_channels;
  for (int b = 0; b < spec.num_blocks; ++b) {
    BasicTensor<S> w({spec.channels, cin, spec.kernel, spec.kernel});
    const double std_dev = std::sqrt(2.0 / (cin * spec.kernel * spec.kernel));
    for (int64_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<S>(rng.next_gaussian() * std_dev);
    }
    params.weights.push_back(std::move(w));
    cin = spec.channels;
  }
  return params;
}

namespace {

template <typename S>
void check_batch(const EncoderParamsT<S>& params, const BasicTensor<S>& batch) {
  require_rank(batch, 4, "embed batch");
  const EncoderSpec& s = params.spec;
  if (batch.dim(1) != s.in_channels || batch.dim(2) != s.in_h ||
      batch.dim(3) != s.in_w) {
    throw DimensionError("embed: batch " + batch.shape_str() +
                         " does not match encoder input [*," +
                         std::to_string(s.in_channels) + "," +
                         std::to_string(s.in_h) + "," +
                         std::to_string(s.in_w) + "]");
  }
}

template <typename S>
BasicTensor<S> flatten2(const BasicTensor<S>& t) {
  BasicTensor<S> out({t.dim(0), static_cast<int>(t.size() / std::max<int64_t>(
                                    t.dim(0), 1))});
  for (int64_t i = 0; i < t.size(); ++i) {
    out[i] = t[i];
  }
  return out;
}

} // namespace

template <typename S>
BasicTensor<S> embed(const EncoderParamsT<S>& params,
                     const BasicTensor<S>& batch) {
  check_batch(params, batch);
  const int pad = params.spec.kernel / 2;
  BasicTensor<S> x = batch;
  for (const auto& w : params.weights) {
    x = nn::conv2d(x, w, 1, pad);
    x = nn::instance_norm(x, params.spec.epsilon);
    x = nn::relu(x);
    x = nn::avg_pool2(x);
  }
  if (batch.dim(0) == 0) {
    return BasicTensor<S>({0, params.spec.embedding_dim()});
  }
  return flatten2(x);
}

template <typename S>
BasicTensor<S> embed_input_grad(const EncoderParamsT<S>& params,
                                const BasicTensor<S>& batch,
                                const BasicTensor<S>& upstream) {
  check_batch(params, batch);
  if (upstream.rank() != 2 || upstream.dim(0) != batch.dim(0) ||
      upstream.dim(1) != params.spec.embedding_dim()) {
    throw DimensionError("embed_input_grad: upstream " +
                         upstream.shape_str() + " does not match [" +
                         std::to_string(batch.dim(0)) + "," +
                         std::to_string(params.spec.embedding_dim()) + "]");
  }
  const int pad = params.spec.kernel / 2;
  const int blocks = params.spec.num_blocks;

  // Forward pass, keeping the activations each backward step needs.
  std::vector<BasicTensor<S>> conv_in;   // input to each block's conv
  std::vector<BasicTensor<S>> conv_out;  // conv output (pre-norm)
  std::vector<BasicTensor<S>> norm_out;  // instance-norm output (pre-relu)
  BasicTensor<S> x = batch;
  for (int b = 0; b < blocks; ++b) {
    conv_in.push_back(x);
    BasicTensor<S> c = nn::conv2d(x, params.weights[b], 1, pad);
    BasicTensor<S> n = nn::instance_norm(c, params.spec.epsilon);
    BasicTensor<S> r = nn::relu(n);
    x = nn::avg_pool2(r);
    conv_out.push_back(std::move(c));
    norm_out.push_back(std::move(n));
  }

  // Reshape the flat upstream to the final pooled feature map.
  BasicTensor<S> g({batch.dim(0), params.spec.channels, params.spec.out_h(),
                    params.spec.out_w()});
  for (int64_t i = 0; i < g.size(); ++i) {
    g[i] = upstream[i];
  }

  for (int b = blocks - 1; b >= 0; --b) {
    const int h = norm_out[b].dim(2), w = norm_out[b].dim(3);
    g = nn::avg_pool2_input_grad(h, w, g);
    g = nn::relu_input_grad(norm_out[b], g);
    g = nn::instance_norm_input_grad(conv_out[b], g, params.spec.epsilon);
    g = nn::conv2d_input_grad(params.weights[b], g, conv_in[b].dim(2),
                              conv_in[b].dim(3), 1, pad);
  }
  return g;
}

#define COLLABDM_INSTANTIATE_ENCODER(S)                                       \
  template EncoderParamsT<S> materialize<S>(uint64_t, const EncoderSpec&);    \
  template BasicTensor<S> embed<S>(const EncoderParamsT<S>&,                  \
                                   const BasicTensor<S>&);                    \
  template BasicTensor<S> embed_input_grad<S>(const EncoderParamsT<S>&,       \
                                              const BasicTensor<S>&,          \
                                              const BasicTensor<S>&);

COLLABDM_INSTANTIATE_ENCODER(float)
COLLABDM_INSTANTIATE_ENCODER(double)

#undef COLLABDM_INSTANTIATE_ENCODER

} // namespace collabdm
