#include "collabdm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "collabdm/errors.hpp"
#include "collabdm/nn.hpp"

namespace collabdm {

Arch arch_from_string(const std::string& name) {
  if (name == "convnet") {
    return Arch::convnet;
  }
  if (name == "mlp") {
    return Arch::mlp;
  }
  throw ConfigError("unknown architecture '" + name +
                    "' (expected convnet or mlp)");
}

std::string arch_name(Arch arch) {
  return arch == Arch::convnet ? "convnet" : "mlp";
}

void ClassifierSpec::validate() const {
  if (num_classes < 1) {
    throw ConfigError("classifier: num_classes must be >= 1");
  }
  if (epochs < 1 || lr <= 0 || momentum < 0 || batch_size < 1) {
    throw ConfigError("classifier: bad training parameters");
  }
  if (arch == Arch::convnet) {
    conv.validate();
  } else if (mlp_hidden < 1) {
    throw ConfigError("classifier: mlp hidden width must be >= 1");
  }
}

namespace {

Tensor kaiming(RngStream& rng, std::vector<int> shape, int fan_in) {
  Tensor t(std::move(shape));
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (int64_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<float>(rng.next_gaussian() * std_dev);
  }
  return t;
}

struct TrainingBatch {
  Tensor images;
  std::vector<int> labels;
};

// Expanded synthetic samples with inherited labels.
TrainingBatch expand_synthetic(const SyntheticSet& set) {
  TrainingBatch out;
  const int per_class = set.expanded_per_class();
  const int total = set.num_classes * per_class;
  out.images = Tensor({total, set.channels, set.height, set.width});
  out.labels.resize(static_cast<size_t>(total));
  int row = 0;
  for (int y = 0; y < set.num_classes; ++y) {
    const Tensor expanded =
        pae_expand(set.images[static_cast<size_t>(y)], set.pae_l);
    for (int i = 0; i < per_class; ++i, ++row) {
      copy_image(expanded, i, out.images, row);
      out.labels[static_cast<size_t>(row)] = y;
    }
  }
  return out;
}

struct ConvActivations {
  std::vector<Tensor> conv_in, conv_out, norm_out;
  Tensor flat; // input to the head
};

Tensor conv_forward(const ClassifierParams& p, const Tensor& images,
                    ConvActivations* acts) {
  const int pad = p.conv.kernel / 2;
  Tensor x = images;
  for (const auto& w : p.conv_weights) {
    if (acts) {
      acts->conv_in.push_back(x);
    }
    Tensor c = nn::conv2d(x, w, 1, pad);
    Tensor n = nn::instance_norm(c, p.conv.epsilon);
    Tensor r = nn::relu(n);
    x = nn::avg_pool2(r);
    if (acts) {
      acts->conv_out.push_back(std::move(c));
      acts->norm_out.push_back(std::move(n));
    }
  }
  Tensor flat({x.dim(0), static_cast<int>(x.size() / std::max<int64_t>(
                             x.dim(0), 1))});
  for (int64_t i = 0; i < x.size(); ++i) {
    flat[i] = x[i];
  }
  if (acts) {
    acts->flat = flat;
  }
  return nn::linear(flat, p.head_w, p.head_b);
}

Tensor mlp_flatten(const Tensor& images) {
  Tensor flat({images.dim(0),
               static_cast<int>(images.size() /
                                std::max<int64_t>(images.dim(0), 1))});
  for (int64_t i = 0; i < images.size(); ++i) {
    flat[i] = images[i];
  }
  return flat;
}

ClassifierParams init_params(const ClassifierSpec& spec, int channels,
                             int height, int width) {
  ClassifierParams p;
  p.arch = spec.arch;
  p.conv = spec.conv;
  p.mlp_hidden = spec.mlp_hidden;
  p.num_classes = spec.num_classes;
  RngStream rng(spec.seed);
  if (spec.arch == Arch::convnet) {
    int cin = spec.conv.in_channels;
    for (int b = 0; b < spec.conv.num_blocks; ++b) {
      const int fan = cin * spec.conv.kernel * spec.conv.kernel;
      p.conv_weights.push_back(kaiming(
          rng, {spec.conv.channels, cin, spec.conv.kernel, spec.conv.kernel},
          fan));
      cin = spec.conv.channels;
    }
    const int d = spec.conv.embedding_dim();
    p.head_w = kaiming(rng, {spec.num_classes, d}, d);
    p.head_b = Tensor({spec.num_classes});
  } else {
    const int d = channels * height * width;
    p.w1 = kaiming(rng, {spec.mlp_hidden, d}, d);
    p.b1 = Tensor({spec.mlp_hidden});
    p.w2 = kaiming(rng, {spec.num_classes, spec.mlp_hidden}, spec.mlp_hidden);
    p.b2 = Tensor({spec.num_classes});
  }
  return p;
}

struct Momentum {
  std::vector<Tensor> bufs;
  Tensor& at(size_t i) { return bufs[i]; }
};

void sgd_update(Tensor& w, Tensor& v, const Tensor& g, double lr,
                double momentum) {
  for (int64_t i = 0; i < w.size(); ++i) {
    v[i] = static_cast<float>(momentum * v[i] + g[i]);
    w[i] = static_cast<float>(w[i] - lr * v[i]);
  }
}

} // namespace

Tensor classifier_logits(const ClassifierParams& params,
                         const Tensor& images) {
  if (params.arch == Arch::convnet) {
    return conv_forward(params, images, nullptr);
  }
  const Tensor flat = mlp_flatten(images);
  Tensor h = nn::linear(flat, params.w1, params.b1);
  h = nn::relu(h);
  return nn::linear(h, params.w2, params.b2);
}

ClassifierParams train_classifier(const SyntheticSet& synthetic,
                                  const ClassifierSpec& spec) {
  spec.validate();
  synthetic.validate();
  if (spec.arch == Arch::convnet &&
      (spec.conv.in_channels != synthetic.channels ||
       spec.conv.in_h != synthetic.height ||
       spec.conv.in_w != synthetic.width)) {
    throw ConfigError("classifier conv geometry does not match the "
                      "synthetic set");
  }
  const TrainingBatch data = expand_synthetic(synthetic);
  const int n = data.images.dim(0);
  ClassifierParams p = init_params(spec, synthetic.channels, synthetic.height,
                                   synthetic.width);

  Momentum vel;
  if (spec.arch == Arch::convnet) {
    for (const auto& w : p.conv_weights) {
      vel.bufs.emplace_back(w.shape());
    }
    vel.bufs.emplace_back(p.head_w.shape());
    vel.bufs.emplace_back(p.head_b.shape());
  } else {
    vel.bufs.emplace_back(p.w1.shape());
    vel.bufs.emplace_back(p.b1.shape());
    vel.bufs.emplace_back(p.w2.shape());
    vel.bufs.emplace_back(p.b2.shape());
  }

  RngStream shuffle_rng = RngStream(spec.seed).substream("shuffle");
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    order[static_cast<size_t>(i)] = i;
  }

  double best_loss = std::numeric_limits<double>::infinity();
  int stall = 0;
  const int pad = spec.conv.kernel / 2;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0;
    int batches = 0;
    for (int start = 0; start < n; start += spec.batch_size) {
      const int b = std::min(spec.batch_size, n - start);
      Tensor images({b, synthetic.channels, synthetic.height,
                     synthetic.width});
      std::vector<int> labels(static_cast<size_t>(b));
      for (int i = 0; i < b; ++i) {
        const int src = order[static_cast<size_t>(start + i)];
        copy_image(data.images, src, images, i);
        labels[static_cast<size_t>(i)] = data.labels[static_cast<size_t>(src)];
      }

      if (spec.arch == Arch::convnet) {
        ConvActivations acts;
        const Tensor logits = conv_forward(p, images, &acts);
        auto [loss, dlogits] = nn::softmax_cross_entropy(logits, labels);
        epoch_loss += loss;
        ++batches;

        const Tensor dhead_w = nn::linear_weight_grad(acts.flat, dlogits);
        const Tensor dhead_b = nn::linear_bias_grad(dlogits);
        Tensor dflat = nn::linear_input_grad(p.head_w, dlogits);

        const int blocks = spec.conv.num_blocks;
        Tensor g({b, spec.conv.channels, spec.conv.out_h(),
                  spec.conv.out_w()});
        for (int64_t i = 0; i < g.size(); ++i) {
          g[i] = dflat[i];
        }
        std::vector<Tensor> dw(static_cast<size_t>(blocks));
        for (int blk = blocks - 1; blk >= 0; --blk) {
          const int h = acts.norm_out[static_cast<size_t>(blk)].dim(2);
          const int w = acts.norm_out[static_cast<size_t>(blk)].dim(3);
          g = nn::avg_pool2_input_grad(h, w, g);
          g = nn::relu_input_grad(acts.norm_out[static_cast<size_t>(blk)], g);
          g = nn::instance_norm_input_grad(
              acts.conv_out[static_cast<size_t>(blk)], g, spec.conv.epsilon);
          dw[static_cast<size_t>(blk)] = nn::conv2d_weight_grad(
              acts.conv_in[static_cast<size_t>(blk)], g, spec.conv.kernel, 1,
              pad);
          if (blk > 0) {
            g = nn::conv2d_input_grad(
                p.conv_weights[static_cast<size_t>(blk)], g,
                acts.conv_in[static_cast<size_t>(blk)].dim(2),
                acts.conv_in[static_cast<size_t>(blk)].dim(3), 1, pad);
          }
        }
        for (int blk = 0; blk < blocks; ++blk) {
          sgd_update(p.conv_weights[static_cast<size_t>(blk)],
                     vel.at(static_cast<size_t>(blk)),
                     dw[static_cast<size_t>(blk)], spec.lr, spec.momentum);
        }
        sgd_update(p.head_w, vel.at(static_cast<size_t>(blocks)), dhead_w,
                   spec.lr, spec.momentum);
        sgd_update(p.head_b, vel.at(static_cast<size_t>(blocks) + 1), dhead_b,
                   spec.lr, spec.momentum);
      } else {
        const Tensor flat = mlp_flatten(images);
        const Tensor pre1 = nn::linear(flat, p.w1, p.b1);
        const Tensor h1 = nn::relu(pre1);
        const Tensor logits = nn::linear(h1, p.w2, p.b2);
        auto [loss, dlogits] = nn::softmax_cross_entropy(logits, labels);
        epoch_loss += loss;
        ++batches;

        const Tensor dw2 = nn::linear_weight_grad(h1, dlogits);
        const Tensor db2 = nn::linear_bias_grad(dlogits);
        Tensor dh1 = nn::linear_input_grad(p.w2, dlogits);
        dh1 = nn::relu_input_grad(pre1, dh1);
        const Tensor dw1 = nn::linear_weight_grad(flat, dh1);
        const Tensor db1 = nn::linear_bias_grad(dh1);

        sgd_update(p.w1, vel.at(0), dw1, spec.lr, spec.momentum);
        sgd_update(p.b1, vel.at(1), db1, spec.lr, spec.momentum);
        sgd_update(p.w2, vel.at(2), dw2, spec.lr, spec.momentum);
        sgd_update(p.b2, vel.at(3), db2, spec.lr, spec.momentum);
      }
    }
    epoch_loss /= std::max(batches, 1);
    if (epoch_loss < best_loss - spec.plateau_tol) {
      best_loss = epoch_loss;
      stall = 0;
    } else if (++stall >= spec.plateau_patience) {
      break;
    }
    if (epoch_loss < 1e-4) {
      break;
    }
  }
  return p;
}

double test_accuracy(const ClassifierParams& params, const Dataset& test) {
  const int n = test.size();
  if (n == 0) {
    throw InputError("test_accuracy: empty test set");
  }
  int hits = 0;
  const int chunk = 256;
  for (int start = 0; start < n; start += chunk) {
    const int b = std::min(chunk, n - start);
    Tensor images({b, test.images.dim(1), test.images.dim(2),
                   test.images.dim(3)});
    for (int i = 0; i < b; ++i) {
      copy_image(test.images, start + i, images, i);
    }
    const Tensor logits = classifier_logits(params, images);
    const int k = logits.dim(1);
    for (int i = 0; i < b; ++i) {
      int arg = 0;
      for (int j = 1; j < k; ++j) {
        if (logits.at(i, j) > logits.at(i, arg)) {
          arg = j; // strict > keeps ties at the lowest class index
        }
      }
      if (arg == test.labels[static_cast<size_t>(start + i)]) {
        ++hits;
      }
    }
  }
  return static_cast<double>(hits) / n;
}

AccuracyStats repeated_accuracy(const SyntheticSet& synthetic,
                                const ClassifierSpec& spec,
                                const Dataset& test, int repeats) {
  if (repeats < 1) {
    throw ConfigError("repeated_accuracy: repeats must be >= 1");
  }
  std::vector<double> accs;
  accs.reserve(static_cast<size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    ClassifierSpec s = spec;
    s.seed = RngStream(spec.seed).substream("repeat").substream(
        static_cast<uint64_t>(r)).key();
    const auto params = train_classifier(synthetic, s);
    accs.push_back(test_accuracy(params, test));
  }
  AccuracyStats stats;
  for (double a : accs) {
    stats.mean += a;
  }
  stats.mean /= repeats;
  double var = 0;
  for (double a : accs) {
    var += (a - stats.mean) * (a - stats.mean);
  }
  stats.stddev = std::sqrt(var / repeats);
  return stats;
}

std::vector<AccuracyStats>
cross_arch_eval(const SyntheticSet& synthetic,
                const std::vector<ClassifierSpec>& test_archs,
                const Dataset& test, int repeats) {
  std::vector<AccuracyStats> row;
  row.reserve(test_archs.size());
  for (const auto& spec : test_archs) {
    row.push_back(repeated_accuracy(synthetic, spec, test, repeats));
  }
  return row;
}

} // namespace collabdm
