#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "collabdm/rng.hpp"
#include "collabdm/tensor.hpp"

namespace collabdm {

struct DatasetMeta {
  std::string split = "train";
  int num_classes = 0; // 0 = derive from labels (max + 1)
};

/// Labeled image set. Pixels live in [0,1]; labels in [0, num_classes).
struct Dataset {
  Tensor images; // [N,C,H,W]
  std::vector<int> labels;
  int num_classes = 0;
  std::string split;

  int size() const { return images.empty() ? 0 : images.dim(0); }
  void validate(bool require_all_classes) const;
  /// Example indices grouped by class, ascending within each class.
  std::vector<std::vector<int>> indices_by_class() const;
};

/// Loads images (.cdt) + labels (.cdl) into a validated Dataset.
Dataset load_raw(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 const DatasetMeta& meta = {});

void save_raw(const Dataset& ds, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path);

struct ToyConfig {
  int num_classes = 4;
  int per_class = 64;       // training examples per class
  int per_class_test = 16;  // held-out examples per class
  int channels = 1;
  int height = 16;
  int width = 16;
  double spread = 0.15; // noise std around the class template
  uint64_t seed = 0;
};

struct ToyData {
  Dataset train;
  Dataset test;
};

/// Synthesizes a classification toy task: each class is a Gaussian blob
/// around a distinct smooth random template (a coarse random grid upsampled
/// bilinearly), clamped to [0,1]. Deterministic in the seed; train and test
/// are disjoint draws.
ToyData generate_toy(const ToyConfig& cfg);

struct PartitionSpec {
  int clients = 1;
  double beta = 0.5; // Dirichlet concentration
  uint64_t seed = 0;
  void validate() const;
};

/// One client's slice of a dataset: example indices grouped by class.
struct ClientShard {
  int client_id = 0;
  std::vector<std::vector<int>> class_indices; // [num_classes][...]

  int total() const;
  bool has_class(int y) const {
    return !class_indices[static_cast<size_t>(y)].empty();
  }
};

/// Gamma(alpha, 1) variate via Marsaglia-Tsang, boosted for alpha < 1.
double sample_gamma(RngStream& rng, double alpha);

/// Dirichlet(beta * 1_K) proportions for one class.
std::vector<double> sample_dirichlet(RngStream& rng, double beta, int k);

/// Converts proportions to integer counts summing to total using
/// largest-remainder rounding (ties broken toward lower index).
std::vector<int> largest_remainder_counts(const std::vector<double>& p,
                                          int total);

/// Non-IID split of the training set: for each class y, draws
/// p ~ Dir(beta * 1_K) from RngStream(spec.seed).substream(y), shuffles the
/// class's examples with the same stream, and hands them out in contiguous
/// runs of largest-remainder sizes. Shards partition the dataset exactly.
std::vector<ClientShard> dirichlet_partition(const Dataset& dataset,
                                             const PartitionSpec& spec);

/// Samples class-y images from the shard: B without replacement when the
/// shard holds >= B, everything it holds otherwise (possibly an empty
/// [0,C,H,W] batch). Order is randomized.
Tensor sample_class_batch(const ClientShard& shard, const Dataset& dataset,
                          int y, int batch, RngStream& rng);

/// Index-level variant of sample_class_batch (order randomized).
std::vector<int> sample_class_indices(const ClientShard& shard, int y,
                                      int batch, RngStream& rng);

/// Gathers dataset rows into an image batch tensor.
Tensor gather_images(const Dataset& dataset, const std::vector<int>& indices);

} // namespace collabdm
