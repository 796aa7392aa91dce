#include "collabdm/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "collabdm/errors.hpp"

namespace collabdm {

namespace {

constexpr uint8_t kVersion = 1;
constexpr uint8_t kMsgSeedBatch = 1;
constexpr uint8_t kMsgPayload = 2;

void write_header(ByteWriter& w, uint8_t msg_type) {
  w.magic("CDM1");
  w.u8(kVersion);
  w.u8(msg_type);
}

void read_header(ByteReader& r, uint8_t msg_type, const char* what) {
  r.expect_magic("CDM1", what);
  const uint8_t version = r.u8();
  if (version != kVersion) {
    throw ProtocolError(std::string(what) + ": unsupported version " +
                        std::to_string(version));
  }
  const uint8_t type = r.u8();
  if (type != msg_type) {
    throw ProtocolError(std::string(what) + ": unexpected message type " +
                        std::to_string(type));
  }
}

int participant_count(double epsilon, int clients) {
  // ceil(eps*K) with a guard against FP round-up noise (e.g. 0.3 * 10).
  const int m = static_cast<int>(std::ceil(epsilon * clients - 1e-9));
  return std::clamp(m, 1, clients);
}

} // namespace

bool SeedSchedule::participates(int t, int k) const {
  const auto& z = participants[static_cast<size_t>(t)];
  return std::binary_search(z.begin(), z.end(), k);
}

SeedBatch SeedSchedule::batch_for(int k) const {
  SeedBatch batch;
  batch.client_id = k;
  for (int t = 0; t < rounds; ++t) {
    if (participates(t, k)) {
      batch.seeds.emplace_back(t, alphas[static_cast<size_t>(t)]);
    }
  }
  return batch;
}

SeedSchedule build_schedule(uint64_t master_seed, int rounds, int clients,
                            double epsilon) {
  if (rounds < 0) {
    throw ConfigError("schedule: rounds must be >= 0");
  }
  if (clients < 1) {
    throw ConfigError("schedule: clients must be >= 1");
  }
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw ConfigError("schedule: epsilon must be in (0, 1]");
  }
  SeedSchedule s;
  s.master_seed = master_seed;
  s.rounds = rounds;
  s.clients = clients;
  s.epsilon = epsilon;

  RngStream base(master_seed);
  RngStream alpha_stream = base.substream("alpha");
  s.alphas.resize(static_cast<size_t>(rounds));
  for (auto& a : s.alphas) {
    a = alpha_stream.next_u64();
  }

  const int m = participant_count(epsilon, clients);
  const RngStream client_base = base.substream("clients");
  s.participants.resize(static_cast<size_t>(rounds));
  for (int t = 0; t < rounds; ++t) {
    RngStream rng = client_base.substream(static_cast<uint64_t>(t));
    std::vector<int> ids(static_cast<size_t>(clients));
    for (int i = 0; i < clients; ++i) {
      ids[static_cast<size_t>(i)] = i;
    }
    for (int i = 0; i < m; ++i) {
      const int j = i + static_cast<int>(rng.next_below(
                            static_cast<uint64_t>(clients - i)));
      std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
    }
    ids.resize(static_cast<size_t>(m));
    std::sort(ids.begin(), ids.end());
    s.participants[static_cast<size_t>(t)] = std::move(ids);
  }
  return s;
}

std::vector<uint8_t> encode_seed_batch(const SeedBatch& batch) {
  ByteWriter w;
  write_header(w, kMsgSeedBatch);
  w.u32(static_cast<uint32_t>(batch.client_id));
  w.u32(static_cast<uint32_t>(batch.seeds.size()));
  for (const auto& [t, alpha] : batch.seeds) {
    w.u32(static_cast<uint32_t>(t));
    w.u64(alpha);
  }
  return w.take();
}

SeedBatch decode_seed_batch(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes, "seed batch");
  read_header(r, kMsgSeedBatch, "seed batch");
  SeedBatch batch;
  batch.client_id = static_cast<int>(r.u32());
  const uint32_t count = r.u32();
  int prev_t = -1;
  for (uint32_t i = 0; i < count; ++i) {
    const int t = static_cast<int>(r.u32());
    const uint64_t alpha = r.u64();
    if (t <= prev_t) {
      throw ProtocolError("seed batch: round indices must be strictly "
                          "increasing (saw " + std::to_string(t) +
                          " after " + std::to_string(prev_t) + ")");
    }
    prev_t = t;
    batch.seeds.emplace_back(t, alpha);
  }
  r.expect_end("seed batch");
  return batch;
}

std::vector<uint8_t> encode_payload(const ClientPayload& payload) {
  ByteWriter w;
  write_header(w, kMsgPayload);
  w.u32(static_cast<uint32_t>(payload.client_id));
  w.u32(static_cast<uint32_t>(payload.num_classes));
  w.u32(static_cast<uint32_t>(payload.embedding_dim));
  encode_synthetic(w, payload.synthetic);
  w.u32(static_cast<uint32_t>(payload.rounds.size()));
  const int nc = payload.num_classes;
  const size_t mask_bytes = static_cast<size_t>((nc + 7) / 8);
  for (const auto& round : payload.rounds) {
    w.u32(static_cast<uint32_t>(round.t));
    std::vector<uint8_t> mask(mask_bytes, 0);
    for (int y = 0; y < nc; ++y) {
      if (round.present[static_cast<size_t>(y)]) {
        mask[static_cast<size_t>(y / 8)] |=
            static_cast<uint8_t>(1u << (y % 8));
      }
    }
    w.raw(mask.data(), mask.size());
    for (int y = 0; y < nc; ++y) {
      if (!round.present[static_cast<size_t>(y)]) {
        continue;
      }
      w.u32(round.batch_sizes[static_cast<size_t>(y)]);
      for (float v : round.means[static_cast<size_t>(y)]) {
        w.f32(v);
      }
    }
  }
  return w.take();
}

ClientPayload decode_payload(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes, "client payload");
  read_header(r, kMsgPayload, "client payload");
  ClientPayload p;
  p.client_id = static_cast<int>(r.u32());
  p.num_classes = static_cast<int>(r.u32());
  p.embedding_dim = static_cast<int>(r.u32());
  p.synthetic = decode_synthetic(r);
  if (p.synthetic.num_classes != p.num_classes) {
    throw ProtocolError("client payload: synthetic set has " +
                        std::to_string(p.synthetic.num_classes) +
                        " classes, header says " +
                        std::to_string(p.num_classes));
  }
  const uint32_t num_rounds = r.u32();
  const int nc = p.num_classes;
  const size_t mask_bytes = static_cast<size_t>((nc + 7) / 8);
  int prev_t = -1;
  for (uint32_t i = 0; i < num_rounds; ++i) {
    RoundMeans round;
    round.t = static_cast<int>(r.u32());
    if (round.t <= prev_t) {
      throw ProtocolError("client payload: duplicate or unordered round " +
                          std::to_string(round.t));
    }
    prev_t = round.t;
    std::vector<uint8_t> mask(mask_bytes);
    r.raw(mask.data(), mask.size());
    round.present.assign(static_cast<size_t>(nc), 0);
    round.means.assign(static_cast<size_t>(nc), {});
    round.batch_sizes.assign(static_cast<size_t>(nc), 0);
    // Canonical masks: padding bits beyond num_classes must be zero.
    for (size_t bit = static_cast<size_t>(nc); bit < mask_bytes * 8; ++bit) {
      if (mask[bit / 8] & (1u << (bit % 8))) {
        throw ProtocolError("client payload: nonzero padding bit in "
                            "presence mask");
      }
    }
    for (int y = 0; y < nc; ++y) {
      if (!(mask[static_cast<size_t>(y / 8)] & (1u << (y % 8)))) {
        continue;
      }
      round.present[static_cast<size_t>(y)] = 1;
      round.batch_sizes[static_cast<size_t>(y)] = r.u32();
      if (round.batch_sizes[static_cast<size_t>(y)] == 0) {
        throw ProtocolError("client payload: present mean for class " +
                            std::to_string(y) + " has batch size 0");
      }
      auto& mean = round.means[static_cast<size_t>(y)];
      mean.resize(static_cast<size_t>(p.embedding_dim));
      for (auto& v : mean) {
        v = r.f32();
      }
    }
    p.rounds.push_back(std::move(round));
  }
  r.expect_end("client payload");
  return p;
}

size_t synthetic_bytes(int num_classes, int ipc, int channels, int height,
                       int width) {
  // 3 header u32s + embedded CDT1 record (magic, dtype, rank, 4 dims, f32s).
  return 12 + (4 + 1 + 1 + 16) +
         4ull * num_classes * ipc * channels * height * width;
}

size_t payload_bytes(int assigned_rounds, int num_classes, int embedding_dim,
                     size_t synthetic_block_bytes,
                     const std::vector<int>& presence_counts) {
  if (static_cast<int>(presence_counts.size()) != assigned_rounds) {
    throw InputError("payload_bytes: presence_counts must have one entry "
                     "per assigned round");
  }
  size_t total = 4 + 1 + 1;          // magic, version, type
  total += 4 + 4 + 4;                // client id, num_classes, embedding_dim
  total += synthetic_block_bytes;
  total += 4;                        // round count
  const size_t mask_bytes = static_cast<size_t>((num_classes + 7) / 8);
  for (int t = 0; t < assigned_rounds; ++t) {
    total += 4 + mask_bytes;
    total += static_cast<size_t>(presence_counts[static_cast<size_t>(t)]) *
             (4 + 4ull * static_cast<size_t>(embedding_dim));
  }
  return total;
}

void ProtocolTrace::record(Direction direction, int client_id, size_t bytes,
                           std::string phase) {
  std::lock_guard<std::mutex> lock(mutex_);
  events_.push_back({direction, client_id, bytes, std::move(phase)});
}

std::vector<ProtocolTrace::Event> ProtocolTrace::events() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_;
}

bool single_round_ok(const ProtocolTrace& trace, int clients,
                     std::string* detail) {
  std::vector<int> down(static_cast<size_t>(clients), 0);
  std::vector<int> up(static_cast<size_t>(clients), 0);
  for (const auto& e : trace.events()) {
    if (e.phase == "refine") {
      if (detail) {
        *detail = "message recorded during server refinement";
      }
      return false;
    }
    if (e.client_id < 0 || e.client_id >= clients) {
      if (detail) {
        *detail = "message for unknown client " + std::to_string(e.client_id);
      }
      return false;
    }
    auto& counter = e.direction == ProtocolTrace::Direction::downlink
                        ? down[static_cast<size_t>(e.client_id)]
                        : up[static_cast<size_t>(e.client_id)];
    ++counter;
  }
  for (int k = 0; k < clients; ++k) {
    if (down[static_cast<size_t>(k)] != 1 || up[static_cast<size_t>(k)] != 1) {
      if (detail) {
        *detail = "client " + std::to_string(k) + " saw " +
                  std::to_string(down[static_cast<size_t>(k)]) +
                  " downlinks and " +
                  std::to_string(up[static_cast<size_t>(k)]) + " uplinks";
      }
      return false;
    }
  }
  return true;
}

} // namespace collabdm
