#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace collabdm {

/// Counter-based deterministic random stream.
///
/// The variate at position c of stream `key` is the splitmix64 finalizer
/// (Steele, Lea & Flood, OOPSLA'14) applied to key + c * GAMMA, i.e. a
/// splitmix64 sequence seeded with `key` and skipped to position c. Output
/// depends only on (key, counter), so streams are trivially reproducible
/// across platforms and can be forked without shared state.
///
/// Substreams: substream(tag) derives a new key via the same finalizer; the
/// map tag -> key is injective for any fixed parent key (the finalizer is a
/// bijection on 64-bit words). String tags are hashed with FNV-1a first, so
/// injectivity is only guaranteed for integer tags.
class RngStream {
public:
  RngStream() = default;
  explicit RngStream(uint64_t key) : key_(key) {}
  RngStream(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }

  static constexpr uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  RngStream substream(uint64_t tag) const {
    return RngStream(mix64(key_ ^ mix64(tag + kGamma)));
  }

  RngStream substream(std::string_view tag) const {
    return substream(fnv1a(tag));
  }

  uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  /// Uniform in [0,1), 53-bit mantissa.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via the cosine branch of Box-Muller.
  /// Consumes exactly two 64-bit variates per call.
  double next_gaussian() {
    double u1 = 1.0 - next_double(); // (0,1], keeps log finite
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n), unbiased (rejection sampling).
  uint64_t next_below(uint64_t n) {
    const uint64_t limit = n * (UINT64_MAX / n);
    uint64_t x = next_u64();
    while (x >= limit) {
      x = next_u64();
    }
    return x % n;
  }

private:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static constexpr uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001B3ull;
    }
    return h;
  }

  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

} // namespace collabdm
