#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "collabdm/data.hpp"
#include "collabdm/distill.hpp"
#include "collabdm/eval.hpp"
#include "collabdm/protocol.hpp"

namespace collabdm {

enum class Mode { collabdm, localdm, centralized };

Mode mode_from_string(const std::string& name);
std::string mode_name(Mode mode);

/// Full experiment configuration.
struct RunConfig {
  DMConfig dm;
  EncoderSpec encoder;
  PartitionSpec partition;
  int rounds = 200;      // T, global server iterations
  double epsilon = 1.0;  // participation fraction per round
  uint64_t master_seed = 0;
  Mode mode = Mode::collabdm;
  int eval_every = 50;   // accuracy checkpoint cadence (0 = final only)
  int eval_repeats = 1;  // classifiers per checkpoint
  Arch eval_arch = Arch::convnet;
  int mlp_hidden = 128;
  // Per-class size of the server's initial union: 0 = dm.ipc (subsample the
  // union of local sets down to the configured budget), -1 = keep the full
  // union, >0 = explicit target.
  int global_ipc = 0;
  bool keep_messages = true; // retain encoded wire messages in the report

  void validate(const Dataset& train) const;
  int resolved_global_ipc() const;
};

struct AccuracyPoint {
  int iteration = 0;          // server iterations completed
  size_t bytes_per_client = 0; // mean uplink bytes needed through here
  double mean = 0;
  double stddev = 0;
};

struct RunReport {
  Mode mode = Mode::collabdm;
  std::vector<double> loss_trace; // per server iteration, t = 1..T
  std::vector<AccuracyPoint> accuracy;
  std::vector<size_t> downlink_bytes; // per client
  std::vector<size_t> uplink_bytes;   // per client
  SyntheticSet synthetic;
  std::vector<std::vector<uint8_t>> seed_batch_messages; // per client
  std::vector<std::vector<uint8_t>> payload_messages;    // per client
};

/// ClientDM: local distillation plus one mean-embedding vector per
/// (assigned round, class) the shard can serve. The rng stream drives batch
/// sampling and the per-iteration encoder seeds of the local distillation.
ClientPayload client_run(const ClientShard& shard, const Dataset& dataset,
                         const SeedBatch& seed_batch, const RunConfig& config,
                         RngStream rng);

/// Per-round per-class targets: the unweighted mean of participating
/// clients' vectors, absent when no participant could contribute.
std::vector<ClassMeans>
round_targets(const std::vector<ClientPayload>& payloads,
              const SeedSchedule& schedule, int num_classes);

using RefineCheckpoint =
    std::function<void(int iteration, const SyntheticSet&)>;

struct RefineResult {
  SyntheticSet synthetic;
  std::vector<double> loss_trace;
};

/// ServerDM refinement. Consumes only payloads and the pre-committed
/// schedule — the server never touches raw datasets. The checkpoint hook
/// fires every eval_every iterations (and at the end).
RefineResult server_refine(const std::vector<ClientPayload>& payloads,
                           const SeedSchedule& schedule,
                           const RunConfig& config,
                           const RefineCheckpoint& checkpoint = {});

/// Runs an experiment end to end. Protocol traffic is appended to `trace`
/// when given (collabdm and localdm; centralized exchanges no messages).
RunReport run(const RunConfig& config, const Dataset& train,
              const Dataset& test, ProtocolTrace* trace = nullptr);

} // namespace collabdm
