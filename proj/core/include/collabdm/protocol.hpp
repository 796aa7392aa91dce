#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "collabdm/distill.hpp"
#include "collabdm/serialize.hpp"

namespace collabdm {

/// The server's pre-committed randomness: one encoder seed alpha_t and one
/// participant subset Z_t per global iteration. A pure function of
/// (master_seed, T, K, epsilon).
struct SeedSchedule {
  uint64_t master_seed = 0;
  int rounds = 0;  // T
  int clients = 0; // K
  double epsilon = 1.0;
  std::vector<uint64_t> alphas;                // [T]
  std::vector<std::vector<int>> participants;  // [T], each sorted ascending

  bool participates(int t, int k) const;
  /// The (t, alpha_t) pairs assigned to client k, t ascending.
  struct SeedBatch batch_for(int k) const;
};

/// Downlink message: the rounds one client contributes to.
struct SeedBatch {
  int client_id = 0;
  std::vector<std::pair<int, uint64_t>> seeds; // (t, alpha_t), t ascending

  bool operator==(const SeedBatch&) const = default;
};

/// Per-round class means of one client: a presence bit per class, plus the
/// mean vector and contributing batch size where present.
struct RoundMeans {
  int t = 0;
  std::vector<uint8_t> present;           // [num_classes], 0 or 1
  std::vector<std::vector<float>> means;  // [num_classes]; empty if absent
  std::vector<uint32_t> batch_sizes;      // [num_classes]; 0 if absent

  bool operator==(const RoundMeans&) const = default;
};

/// Uplink message: the local distillation S_k plus all round/class means.
struct ClientPayload {
  int client_id = 0;
  int num_classes = 0;
  int embedding_dim = 0;
  SyntheticSet synthetic;
  std::vector<RoundMeans> rounds; // t ascending, one entry per assigned round
};

/// alpha_t drawn from RngStream(master).substream("alpha"); Z_t is the
/// prefix of a Fisher-Yates shuffle of [0..K) from
/// RngStream(master).substream("clients").substream(t), of size
/// ceil(epsilon * K).
SeedSchedule build_schedule(uint64_t master_seed, int rounds, int clients,
                            double epsilon);

// Wire encodings. All messages open with magic "CDM1", a version byte and a
// message-type byte; integers little-endian, mean vectors 32-bit floats,
// seeds 64-bit, presence masks bit-packed per round. decode(encode(x)) == x
// and encodings are canonical.
std::vector<uint8_t> encode_seed_batch(const SeedBatch& batch);
SeedBatch decode_seed_batch(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_payload(const ClientPayload& payload);
ClientPayload decode_payload(const std::vector<uint8_t>& bytes);

/// Closed-form size of an encoded ClientPayload: fixed header plus the
/// synthetic-set block plus, per assigned round, the round header, the
/// bit-packed presence mask, and (embedding_dim * 4 + 4) bytes per present
/// (round, class) pair.
size_t payload_bytes(int assigned_rounds, int num_classes, int embedding_dim,
                     size_t synthetic_bytes,
                     const std::vector<int>& presence_counts);

/// Encoded size of a synthetic-set block with the given geometry.
size_t synthetic_bytes(int num_classes, int ipc, int channels, int height,
                       int width);

/// Append-only log of protocol messages; the single-round audit checks one
/// downlink and one uplink per client and silence during refinement.
class ProtocolTrace {
public:
  enum class Direction { downlink, uplink };

  struct Event {
    Direction direction;
    int client_id;
    size_t bytes;
    std::string phase; // "broadcast", "collect", "refine"
  };

  void record(Direction direction, int client_id, size_t bytes,
              std::string phase);
  std::vector<Event> events() const;

private:
  mutable std::mutex mutex_;
  std::vector<Event> events_;
};

/// True iff the trace shows exactly one downlink and one uplink per client
/// and no traffic tagged with the refinement phase.
bool single_round_ok(const ProtocolTrace& trace, int clients,
                     std::string* detail = nullptr);

} // namespace collabdm
