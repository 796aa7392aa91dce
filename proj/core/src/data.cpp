#include "collabdm/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "collabdm/errors.hpp"
#include "collabdm/nn.hpp"
#include "collabdm/serialize.hpp"

namespace collabdm {

void Dataset::validate(bool require_all_classes) const {
  if (images.rank() != 4) {
    throw FormatError("dataset images must be rank 4 (N,C,H,W), got " +
                      images.shape_str());
  }
  const int n = images.dim(0);
  if (n == 0) {
    throw FormatError("empty dataset (N = 0)");
  }
  if (static_cast<int>(labels.size()) != n) {
    throw FormatError("dataset has " + std::to_string(n) + " images but " +
                      std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 1) {
    throw FormatError("dataset num_classes must be >= 1");
  }
  std::vector<int> seen(static_cast<size_t>(num_classes), 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw FormatError("label " + std::to_string(labels[i]) + " at index " +
                        std::to_string(i) + " out of range [0," +
                        std::to_string(num_classes) + ")");
    }
    seen[static_cast<size_t>(labels[i])] = 1;
  }
  if (require_all_classes) {
    for (int y = 0; y < num_classes; ++y) {
      if (!seen[static_cast<size_t>(y)]) {
        throw FormatError("class " + std::to_string(y) +
                          " has no examples in the " + split + " split");
      }
    }
  }
  for (int64_t i = 0; i < images.size(); ++i) {
    const float v = images[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw FormatError("pixel " + std::to_string(i) + " = " +
                        std::to_string(v) + " outside [0,1]");
    }
  }
}

std::vector<std::vector<int>> Dataset::indices_by_class() const {
  std::vector<std::vector<int>> by_class(static_cast<size_t>(num_classes));
  for (size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  return by_class;
}

Dataset load_raw(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 const DatasetMeta& meta) {
  Dataset ds;
  ds.images = read_tensor_file(images_path);
  ds.labels = read_label_file(labels_path);
  ds.split = meta.split;
  if (meta.num_classes > 0) {
    ds.num_classes = meta.num_classes;
  } else {
    int mx = -1;
    for (int v : ds.labels) {
      mx = std::max(mx, v);
    }
    ds.num_classes = mx + 1;
  }
  ds.validate(meta.split == "train");
  return ds;
}

void save_raw(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
  write_tensor_file(images_path, ds.images);
  write_label_file(labels_path, ds.labels);
}

namespace {

// Smooth class prototype: coarse uniform grid upsampled to full size.
// Coarse extents are capped so templates stay low-frequency.
Tensor toy_template(const ToyConfig& cfg, RngStream& rng) {
  const int ch = std::max(2, cfg.height / 4);
  const int cw = std::max(2, cfg.width / 4);
  Tensor coarse({1, cfg.channels, ch, cw});
  for (int64_t i = 0; i < coarse.size(); ++i) {
    coarse[i] = static_cast<float>(rng.next_double());
  }
  return nn::bilinear_upsample(coarse, cfg.height, cfg.width);
}

Dataset toy_split(const ToyConfig& cfg, const std::vector<Tensor>& templates,
                  int per_class, const char* split, const char* tag,
                  RngStream base) {
  const int n = cfg.num_classes * per_class;
  Dataset ds;
  ds.images = Tensor({n, cfg.channels, cfg.height, cfg.width});
  ds.labels.resize(static_cast<size_t>(n));
  ds.num_classes = cfg.num_classes;
  ds.split = split;
  const int64_t stride = static_cast<int64_t>(cfg.channels) * cfg.height *
                         cfg.width;
  int row = 0;
  for (int y = 0; y < cfg.num_classes; ++y) {
    RngStream rng = base.substream(tag).substream(static_cast<uint64_t>(y));
    const Tensor& tpl = templates[static_cast<size_t>(y)];
    for (int i = 0; i < per_class; ++i, ++row) {
      ds.labels[static_cast<size_t>(row)] = y;
      for (int64_t j = 0; j < stride; ++j) {
        const double v =
            tpl[j] + cfg.spread * (cfg.spread > 0 ? rng.next_gaussian() : 0.0);
        ds.images[row * stride + j] =
            static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return ds;
}

} // namespace

ToyData generate_toy(const ToyConfig& cfg) {
  if (cfg.num_classes < 1 || cfg.per_class < 2 || cfg.per_class_test < 1) {
    throw ConfigError("toy config: need num_classes >= 1, per_class >= 2, "
                      "per_class_test >= 1");
  }
  if (cfg.spread < 0) {
    throw ConfigError("toy config: spread must be >= 0");
  }
  RngStream base(cfg.seed);
  std::vector<Tensor> templates;
  templates.reserve(static_cast<size_t>(cfg.num_classes));
  for (int y = 0; y < cfg.num_classes; ++y) {
    RngStream rng = base.substream("template").substream(
        static_cast<uint64_t>(y));
    templates.push_back(toy_template(cfg, rng));
  }
  ToyData out;
  out.train = toy_split(cfg, templates, cfg.per_class, "train", "train", base);
  out.test =
      toy_split(cfg, templates, cfg.per_class_test, "test", "test", base);
  return out;
}

void PartitionSpec::validate() const {
  if (clients < 1) {
    throw ConfigError("partition: client count must be >= 1");
  }
  if (!(beta > 0)) {
    throw ConfigError("partition: beta must be > 0");
  }
}

double sample_gamma(RngStream& rng, double alpha) {
  if (alpha < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
    const double u = 1.0 - rng.next_double(); // (0,1]
    return sample_gamma(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.next_gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - rng.next_double();
    if (u < 1.0 - 0.0331 * x * x * x * x) {
      return d * v;
    }
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

std::vector<double> sample_dirichlet(RngStream& rng, double beta, int k) {
  std::vector<double> p(static_cast<size_t>(k));
  double sum = 0;
  for (auto& v : p) {
    v = sample_gamma(rng, beta);
    sum += v;
  }
  if (sum <= 0) {
    // All gammas underflowed (possible for tiny beta); fall back to a
    // deterministic point mass on one component.
    const size_t j = static_cast<size_t>(rng.next_below(
        static_cast<uint64_t>(k)));
    std::fill(p.begin(), p.end(), 0.0);
    p[j] = 1.0;
    return p;
  }
  for (auto& v : p) {
    v /= sum;
  }
  return p;
}

std::vector<int> largest_remainder_counts(const std::vector<double>& p,
                                          int total) {
  const size_t k = p.size();
  std::vector<int> counts(k);
  std::vector<std::pair<double, size_t>> rem(k);
  int assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double exact = p[i] * total;
    counts[i] = static_cast<int>(std::floor(exact));
    rem[i] = {exact - counts[i], i};
    assigned += counts[i];
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) {
      return a.first > b.first;
    }
    return a.second < b.second;
  });
  for (int i = 0; i < total - assigned; ++i) {
    ++counts[rem[static_cast<size_t>(i)].second];
  }
  return counts;
}

std::vector<ClientShard> dirichlet_partition(const Dataset& dataset,
                                             const PartitionSpec& spec) {
  spec.validate();
  const int k = spec.clients;
  std::vector<ClientShard> shards(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    shards[static_cast<size_t>(c)].client_id = c;
    shards[static_cast<size_t>(c)].class_indices.resize(
        static_cast<size_t>(dataset.num_classes));
  }
  const auto by_class = dataset.indices_by_class();
  RngStream base(spec.seed);
  for (int y = 0; y < dataset.num_classes; ++y) {
    RngStream rng = base.substream(static_cast<uint64_t>(y));
    const auto p = sample_dirichlet(rng, spec.beta, k);
    std::vector<int> order = by_class[static_cast<size_t>(y)];
    // Fisher-Yates shuffle before the contiguous split.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }
    const auto counts =
        largest_remainder_counts(p, static_cast<int>(order.size()));
    size_t pos = 0;
    for (int c = 0; c < k; ++c) {
      auto& slot =
          shards[static_cast<size_t>(c)].class_indices[static_cast<size_t>(y)];
      slot.assign(order.begin() + static_cast<long>(pos),
                  order.begin() + static_cast<long>(pos) +
                      counts[static_cast<size_t>(c)]);
      pos += static_cast<size_t>(counts[static_cast<size_t>(c)]);
    }
  }
  return shards;
}

int ClientShard::total() const {
  int n = 0;
  for (const auto& c : class_indices) {
    n += static_cast<int>(c.size());
  }
  return n;
}

std::vector<int> sample_class_indices(const ClientShard& shard, int y,
                                      int batch, RngStream& rng) {
  if (batch < 1) {
    throw InputError("sample_class_batch: batch must be >= 1");
  }
  std::vector<int> pool = shard.class_indices[static_cast<size_t>(y)];
  const size_t take = std::min(pool.size(), static_cast<size_t>(batch));
  // Partial Fisher-Yates: the first `take` slots become the sample.
  for (size_t i = 0; i < take; ++i) {
    const size_t j =
        i + static_cast<size_t>(rng.next_below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

Tensor gather_images(const Dataset& dataset, const std::vector<int>& indices) {
  Tensor out({static_cast<int>(indices.size()), dataset.images.dim(1),
              dataset.images.dim(2), dataset.images.dim(3)});
  for (size_t i = 0; i < indices.size(); ++i) {
    copy_image(dataset.images, indices[i], out, static_cast<int>(i));
  }
  return out;
}

Tensor sample_class_batch(const ClientShard& shard, const Dataset& dataset,
                          int y, int batch, RngStream& rng) {
  return gather_images(dataset, sample_class_indices(shard, y, batch, rng));
}

} // namespace collabdm
