#include "collabdm/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "collabdm/errors.hpp"

namespace collabdm {

Mode mode_from_string(const std::string& name) {
  if (name == "collabdm") {
    return Mode::collabdm;
  }
  if (name == "localdm") {
    return Mode::localdm;
  }
  if (name == "centralized") {
    return Mode::centralized;
  }
  throw ConfigError("unknown mode '" + name +
                    "' (expected collabdm, localdm or centralized)");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::collabdm: return "collabdm";
    case Mode::localdm: return "localdm";
    case Mode::centralized: return "centralized";
  }
  return "?";
}

void RunConfig::validate(const Dataset& train) const {
  dm.validate();
  encoder.validate();
  partition.validate();
  if (rounds < 0) {
    throw ConfigError("run config: rounds must be >= 0");
  }
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw ConfigError("run config: epsilon must be in (0, 1]");
  }
  if (eval_every < 0 || eval_repeats < 1) {
    throw ConfigError("run config: bad evaluation cadence");
  }
  if (global_ipc < -1) {
    throw ConfigError("run config: global_ipc must be -1, 0 or positive");
  }
  if (encoder.in_channels != train.images.dim(1) ||
      encoder.in_h != train.images.dim(2) ||
      encoder.in_w != train.images.dim(3)) {
    throw ConfigError("run config: encoder input " +
                      std::to_string(encoder.in_channels) + "x" +
                      std::to_string(encoder.in_h) + "x" +
                      std::to_string(encoder.in_w) +
                      " does not match dataset images " +
                      train.images.shape_str());
  }
  if (encoder.in_h % dm.pae_l != 0 || encoder.in_w % dm.pae_l != 0) {
    throw ConfigError("run config: pae factor " + std::to_string(dm.pae_l) +
                      " does not divide image extents " +
                      std::to_string(encoder.in_h) + "x" +
                      std::to_string(encoder.in_w));
  }
}

int RunConfig::resolved_global_ipc() const {
  return global_ipc == 0 ? dm.ipc : global_ipc;
}

namespace {

RngStream client_stream(uint64_t master, int k) {
  return RngStream(master).substream("client").substream(
      static_cast<uint64_t>(k));
}

std::vector<float> to_f32(const std::vector<double>& acc, int count) {
  std::vector<float> out(acc.size());
  for (size_t i = 0; i < acc.size(); ++i) {
    out[i] = static_cast<float>(acc[i] / count);
  }
  return out;
}

/// Per-class union of the local sets, optionally subsampled to a global
/// per-class budget. Selection order is ascending to keep the union stable.
SyntheticSet init_from_payloads(const std::vector<ClientPayload>& payloads,
                                const RunConfig& config) {
  const SyntheticSet& first = payloads.front().synthetic;
  for (const auto& p : payloads) {
    const SyntheticSet& s = p.synthetic;
    if (s.num_classes != first.num_classes || s.channels != first.channels ||
        s.height != first.height || s.width != first.width) {
      throw ProtocolError("client " + std::to_string(p.client_id) +
                          " synthetic geometry differs from client " +
                          std::to_string(payloads.front().client_id));
    }
  }
  SyntheticSet set;
  set.num_classes = first.num_classes;
  set.pae_l = config.dm.pae_l;
  set.channels = first.channels;
  set.height = first.height;
  set.width = first.width;
  const int64_t stride =
      static_cast<int64_t>(set.channels) * set.height * set.width;

  int union_rows = 0;
  for (const auto& p : payloads) {
    union_rows += p.synthetic.ipc;
  }
  const int target = config.resolved_global_ipc();
  const int keep = target == -1 ? union_rows : std::min(target, union_rows);
  set.ipc = keep;

  RngStream init_base = RngStream(config.master_seed).substream("server-init");
  for (int y = 0; y < set.num_classes; ++y) {
    Tensor all({union_rows, set.channels, set.height, set.width});
    int row = 0;
    for (const auto& p : payloads) {
      const auto& cls = p.synthetic.images[static_cast<size_t>(y)];
      for (int i = 0; i < p.synthetic.ipc; ++i, ++row) {
        copy_image(cls, i, all, row);
      }
    }
    std::vector<int> picks(static_cast<size_t>(union_rows));
    for (int i = 0; i < union_rows; ++i) {
      picks[static_cast<size_t>(i)] = i;
    }
    if (keep < union_rows) {
      RngStream rng = init_base.substream(static_cast<uint64_t>(y));
      for (int i = 0; i < keep; ++i) {
        const int j = i + static_cast<int>(rng.next_below(
                              static_cast<uint64_t>(union_rows - i)));
        std::swap(picks[static_cast<size_t>(i)], picks[static_cast<size_t>(j)]);
      }
      picks.resize(static_cast<size_t>(keep));
      std::sort(picks.begin(), picks.end());
    }
    Tensor cls({keep, set.channels, set.height, set.width});
    for (int i = 0; i < keep; ++i) {
      copy_image(all, picks[static_cast<size_t>(i)], cls, i);
    }
    (void)stride;
    set.images.push_back(std::move(cls));
    set.momentum.emplace_back(
        std::vector<int>{keep, set.channels, set.height, set.width});
  }
  set.validate();
  return set;
}

} // namespace

ClientPayload client_run(const ClientShard& shard, const Dataset& dataset,
                         const SeedBatch& seed_batch, const RunConfig& config,
                         RngStream rng) {
  if (shard.total() == 0) {
    throw InputError("client " + std::to_string(seed_batch.client_id) +
                     ": empty shard");
  }
  ClientPayload payload;
  payload.client_id = seed_batch.client_id;
  payload.num_classes = dataset.num_classes;
  payload.embedding_dim = config.encoder.embedding_dim();
  payload.synthetic =
      local_distill(shard, dataset, config.dm, config.encoder, rng);

  for (const auto& [t, alpha] : seed_batch.seeds) {
    const EncoderParams params = materialize<float>(alpha, config.encoder);
    RoundMeans round;
    round.t = t;
    round.present.assign(static_cast<size_t>(dataset.num_classes), 0);
    round.means.assign(static_cast<size_t>(dataset.num_classes), {});
    round.batch_sizes.assign(static_cast<size_t>(dataset.num_classes), 0);
    for (int y = 0; y < dataset.num_classes; ++y) {
      const auto picks =
          sample_class_indices(shard, y, config.dm.batch, rng);
      if (picks.empty()) {
        continue;
      }
      const Tensor batch = gather_images(dataset, picks);
      round.present[static_cast<size_t>(y)] = 1;
      round.batch_sizes[static_cast<size_t>(y)] =
          static_cast<uint32_t>(picks.size());
      round.means[static_cast<size_t>(y)] = embedding_mean(params, batch);
    }
    payload.rounds.push_back(std::move(round));
  }
  return payload;
}

std::vector<ClassMeans>
round_targets(const std::vector<ClientPayload>& payloads,
              const SeedSchedule& schedule, int num_classes) {
  // Index payload rounds by t, checking each client sent exactly its
  // assigned rounds.
  std::vector<std::vector<const RoundMeans*>> by_round(
      static_cast<size_t>(schedule.rounds));
  for (const auto& p : payloads) {
    const SeedBatch expected = schedule.batch_for(p.client_id);
    if (expected.seeds.size() != p.rounds.size()) {
      throw ProtocolError("client " + std::to_string(p.client_id) + " sent " +
                          std::to_string(p.rounds.size()) +
                          " rounds, schedule assigns " +
                          std::to_string(expected.seeds.size()));
    }
    for (size_t i = 0; i < p.rounds.size(); ++i) {
      if (p.rounds[i].t != expected.seeds[i].first) {
        throw ProtocolError("client " + std::to_string(p.client_id) +
                            " round " + std::to_string(p.rounds[i].t) +
                            " not in its schedule");
      }
      by_round[static_cast<size_t>(p.rounds[i].t)].push_back(&p.rounds[i]);
    }
  }

  std::vector<ClassMeans> targets(static_cast<size_t>(schedule.rounds));
  for (int t = 0; t < schedule.rounds; ++t) {
    ClassMeans& cm = targets[static_cast<size_t>(t)];
    cm.assign(static_cast<size_t>(num_classes), std::nullopt);
    for (int y = 0; y < num_classes; ++y) {
      std::vector<double> acc;
      int count = 0;
      for (const RoundMeans* r : by_round[static_cast<size_t>(t)]) {
        if (!r->present[static_cast<size_t>(y)]) {
          continue;
        }
        const auto& mean = r->means[static_cast<size_t>(y)];
        if (acc.empty()) {
          acc.assign(mean.size(), 0.0);
        }
        for (size_t j = 0; j < mean.size(); ++j) {
          acc[j] += mean[j];
        }
        ++count;
      }
      if (count > 0) {
        cm[static_cast<size_t>(y)] = to_f32(acc, count);
      }
    }
  }
  return targets;
}

RefineResult server_refine(const std::vector<ClientPayload>& payloads,
                           const SeedSchedule& schedule,
                           const RunConfig& config,
                           const RefineCheckpoint& checkpoint) {
  if (static_cast<int>(payloads.size()) != schedule.clients) {
    throw ProtocolError("server got " + std::to_string(payloads.size()) +
                        " payloads for " + std::to_string(schedule.clients) +
                        " clients");
  }
  std::vector<ClientPayload> ordered(payloads);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) {
              return a.client_id < b.client_id;
            });
  for (int k = 0; k < schedule.clients; ++k) {
    if (ordered[static_cast<size_t>(k)].client_id != k) {
      throw ProtocolError("payload client ids are not exactly 0.." +
                          std::to_string(schedule.clients - 1));
    }
    if (ordered[static_cast<size_t>(k)].embedding_dim !=
        config.encoder.embedding_dim()) {
      throw ProtocolError("client " + std::to_string(k) +
                          " embedding dimension " +
                          std::to_string(
                              ordered[static_cast<size_t>(k)].embedding_dim) +
                          " != encoder " +
                          std::to_string(config.encoder.embedding_dim()));
    }
  }

  RefineResult result;
  result.synthetic = init_from_payloads(ordered, config);
  const int num_classes = result.synthetic.num_classes;
  const auto targets = round_targets(ordered, schedule, num_classes);

  RngStream server_rng = RngStream(config.master_seed).substream("server");
  for (int t = 0; t < schedule.rounds; ++t) {
    const EncoderParams params =
        materialize<float>(schedule.alphas[static_cast<size_t>(t)],
                           config.encoder);
    const auto g = dm_grad(result.synthetic, targets[static_cast<size_t>(t)],
                           params, server_rng, config.dm.max_syn_batch);
    sgd_step(result.synthetic, g.grads, config.dm.server_lr,
             config.dm.momentum);
    result.loss_trace.push_back(g.loss.total);
    if (checkpoint) {
      const int done = t + 1;
      const bool periodic =
          config.eval_every > 0 && done % config.eval_every == 0;
      if (periodic || done == schedule.rounds) {
        checkpoint(done, result.synthetic);
      }
    }
  }
  if (schedule.rounds == 0 && checkpoint) {
    checkpoint(0, result.synthetic);
  }
  return result;
}

namespace {

size_t uplink_bytes_through(const ClientPayload& p, int iterations) {
  std::vector<int> presence;
  for (const auto& round : p.rounds) {
    if (round.t >= iterations) {
      break;
    }
    int count = 0;
    for (uint8_t b : round.present) {
      count += b;
    }
    presence.push_back(count);
  }
  const auto& s = p.synthetic;
  return payload_bytes(
      static_cast<int>(presence.size()), p.num_classes, p.embedding_dim,
      synthetic_bytes(s.num_classes, s.ipc, s.channels, s.height, s.width),
      presence);
}

ClassifierSpec eval_spec(const RunConfig& config, const Dataset& train,
                         uint64_t seed) {
  ClassifierSpec spec;
  spec.arch = config.eval_arch;
  spec.conv = config.encoder;
  spec.mlp_hidden = config.mlp_hidden;
  spec.num_classes = train.num_classes;
  spec.seed = seed;
  return spec;
}

} // namespace

RunReport run(const RunConfig& config, const Dataset& train,
              const Dataset& test, ProtocolTrace* trace) {
  config.validate(train);
  RunReport report;
  report.mode = config.mode;

  const auto evaluate = [&](int iteration, const SyntheticSet& set,
                            const std::vector<ClientPayload>* payloads) {
    const uint64_t seed = RngStream(config.master_seed)
                              .substream("eval")
                              .substream(static_cast<uint64_t>(iteration))
                              .key();
    const auto stats = repeated_accuracy(
        set, eval_spec(config, train, seed), test, config.eval_repeats);
    AccuracyPoint point;
    point.iteration = iteration;
    if (payloads) {
      size_t total = 0;
      for (const auto& p : *payloads) {
        total += uplink_bytes_through(p, iteration);
      }
      point.bytes_per_client = total / payloads->size();
    }
    point.mean = stats.mean;
    point.stddev = stats.stddev;
    report.accuracy.push_back(point);
  };

  if (config.mode == Mode::centralized) {
    // Plain distribution matching on the pooled data: the no-protocol
    // reference the collaborative decomposition must reproduce exactly.
    // The single "client" holds the whole dataset via a K=1 partition so
    // that per-class example order matches a K=1 collaborative run.
    const SeedSchedule schedule =
        build_schedule(config.master_seed, config.rounds, 1, 1.0);
    RngStream rng = client_stream(config.master_seed, 0);
    PartitionSpec single = config.partition;
    single.clients = 1;
    const ClientShard shard =
        std::move(dirichlet_partition(train, single).front());
    if (shard.total() == 0) {
      throw InputError("centralized: empty dataset");
    }
    SyntheticSet set =
        local_distill(shard, train, config.dm, config.encoder, rng);
    // Fresh momentum for the refinement stage, as on the server.
    for (auto& m : set.momentum) {
      m.fill(0.0f);
    }
    set.pae_l = config.dm.pae_l;

    RngStream server_rng =
        RngStream(config.master_seed).substream("server");
    for (int t = 0; t < config.rounds; ++t) {
      const EncoderParams params = materialize<float>(
          schedule.alphas[static_cast<size_t>(t)], config.encoder);
      ClassMeans targets(static_cast<size_t>(train.num_classes));
      for (int y = 0; y < train.num_classes; ++y) {
        const auto picks =
            sample_class_indices(shard, y, config.dm.batch, rng);
        if (picks.empty()) {
          continue;
        }
        targets[static_cast<size_t>(y)] =
            embedding_mean(params, gather_images(train, picks));
      }
      const auto g = dm_grad(set, targets, params, server_rng,
                             config.dm.max_syn_batch);
      sgd_step(set, g.grads, config.dm.server_lr, config.dm.momentum);
      report.loss_trace.push_back(g.loss.total);
      const int done = t + 1;
      if ((config.eval_every > 0 && done % config.eval_every == 0) ||
          done == config.rounds) {
        evaluate(done, set, nullptr);
      }
    }
    if (config.rounds == 0) {
      evaluate(0, set, nullptr);
    }
    report.synthetic = std::move(set);
    return report;
  }

  // collabdm / localdm: partition, broadcast, collect, then refine.
  const int clients = config.partition.clients;
  const int rounds = config.mode == Mode::localdm ? 0 : config.rounds;
  const auto shards = dirichlet_partition(train, config.partition);
  const SeedSchedule schedule =
      build_schedule(config.master_seed, rounds, clients, config.epsilon);

  report.downlink_bytes.resize(static_cast<size_t>(clients));
  report.uplink_bytes.resize(static_cast<size_t>(clients));
  std::vector<std::vector<uint8_t>> seed_msgs(static_cast<size_t>(clients));
  std::vector<std::vector<uint8_t>> payload_msgs(
      static_cast<size_t>(clients));
  std::vector<ClientPayload> payloads(static_cast<size_t>(clients));

  const auto one_client = [&](int k) {
    const std::vector<uint8_t> down =
        encode_seed_batch(schedule.batch_for(k));
    if (trace) {
      trace->record(ProtocolTrace::Direction::downlink, k, down.size(),
                    "broadcast");
    }
    const SeedBatch batch = decode_seed_batch(down);
    const ClientPayload payload =
        client_run(shards[static_cast<size_t>(k)], train, batch, config,
                   client_stream(config.master_seed, k));
    const std::vector<uint8_t> up = encode_payload(payload);
    if (trace) {
      trace->record(ProtocolTrace::Direction::uplink, k, up.size(),
                    "collect");
    }
    report.downlink_bytes[static_cast<size_t>(k)] = down.size();
    report.uplink_bytes[static_cast<size_t>(k)] = up.size();
    payloads[static_cast<size_t>(k)] = decode_payload(up);
    seed_msgs[static_cast<size_t>(k)] = std::move(down);
    payload_msgs[static_cast<size_t>(k)] = up;
  };

  std::vector<std::future<void>> futures;
  futures.reserve(static_cast<size_t>(clients));
  for (int k = 0; k < clients; ++k) {
    futures.push_back(std::async(std::launch::async, one_client, k));
  }
  for (auto& f : futures) {
    f.get();
  }

  RefineResult refined = server_refine(
      payloads, schedule, config,
      [&](int iteration, const SyntheticSet& set) {
        evaluate(iteration, set, &payloads);
      });
  report.loss_trace = std::move(refined.loss_trace);
  report.synthetic = std::move(refined.synthetic);
  if (config.keep_messages) {
    report.seed_batch_messages = std::move(seed_msgs);
    report.payload_messages = std::move(payload_msgs);
  }
  return report;
}

} // namespace collabdm
