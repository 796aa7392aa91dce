#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collabdm/data.hpp"
#include "collabdm/distill.hpp"
#include "collabdm/encoder.hpp"

namespace collabdm {

enum class Arch { convnet, mlp };

Arch arch_from_string(const std::string& name);
std::string arch_name(Arch arch);

/// Training recipe for a fresh classifier fitted to a synthetic set.
/// convnet = trainable variant of the encoder stack plus a linear head;
/// mlp = flatten -> hidden -> relu -> output.
struct ClassifierSpec {
  Arch arch = Arch::convnet;
  EncoderSpec conv;     // geometry for the convnet variant
  int mlp_hidden = 128;
  int num_classes = 0;
  int epochs = 300;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  uint64_t seed = 0;
  // Early stop once the epoch loss has not improved by more than
  // plateau_tol for plateau_patience consecutive epochs.
  int plateau_patience = 25;
  double plateau_tol = 1e-5;

  void validate() const;
};

struct ClassifierParams {
  Arch arch = Arch::convnet;
  EncoderSpec conv;
  int mlp_hidden = 0;
  int num_classes = 0;
  std::vector<Tensor> conv_weights; // convnet blocks
  Tensor head_w, head_b;            // convnet linear head
  Tensor w1, b1, w2, b2;            // mlp layers
};

/// Expands the synthetic set (labels inherited per source image) and fits a
/// classifier with minibatch momentum SGD on softmax cross-entropy.
/// Deterministic in spec.seed.
ClassifierParams train_classifier(const SyntheticSet& synthetic,
                                  const ClassifierSpec& spec);

Tensor classifier_logits(const ClassifierParams& params, const Tensor& images);

/// Argmax match rate on the test split; ties resolve to the lowest class.
double test_accuracy(const ClassifierParams& params, const Dataset& test);

struct AccuracyStats {
  double mean = 0;
  double stddev = 0; // population std over repeats
};

/// Mean accuracy over `repeats` freshly seeded trainings.
AccuracyStats repeated_accuracy(const SyntheticSet& synthetic,
                                const ClassifierSpec& spec,
                                const Dataset& test, int repeats);

/// One row of a cross-architecture table: the synthetic set (distilled
/// under some training architecture) evaluated on each test architecture.
std::vector<AccuracyStats>
cross_arch_eval(const SyntheticSet& synthetic,
                const std::vector<ClassifierSpec>& test_archs,
                const Dataset& test, int repeats);

} // namespace collabdm
