#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "collabdm/rng.hpp"

using collabdm::RngStream;

TEST_SUITE("rng") {

TEST_CASE("same key and counter reproduce the stream bit for bit") {
  RngStream a(42), b(42);
  for (int i = 0; i < 10000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
  // Resuming from a saved counter continues identically.
  RngStream c(42);
  for (int i = 0; i < 5000; ++i) {
    c.next_u64();
  }
  RngStream d(42, c.counter());
  RngStream e(42, 5000);
  CHECK(d.next_u64() == e.next_u64());
}

TEST_CASE("frozen reference values pin the generator across platforms") {
  // First three variates of key 0 equal splitmix64 seeded with 0.
  RngStream r(0);
  CHECK(r.next_u64() == 0xE220A8397B1DCDAFull);
  CHECK(r.next_u64() == 0x6E789E6AA1B965F4ull);
  CHECK(r.next_u64() == 0x06C45D188009454Full);
}

TEST_CASE("substreams with distinct integer tags have distinct keys") {
  RngStream base(7);
  std::set<uint64_t> keys;
  for (uint64_t tag = 0; tag < 4096; ++tag) {
    keys.insert(base.substream(tag).key());
  }
  CHECK(keys.size() == 4096);
  CHECK(base.substream("alpha").key() != base.substream("clients").key());
  CHECK(base.substream(3).key() != RngStream(8).substream(3).key());
}

TEST_CASE("uniform doubles live in [0,1) and gaussians are standard-ish") {
  RngStream r(123);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);

  sum = 0;
  for (int i = 0; i < n; ++i) {
    const double g = r.next_gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("bounded draws are unbiased across the range") {
  RngStream r(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    ++counts[r.next_below(7)];
  }
  for (int c : counts) {
    // 3 sigma of binomial(n, 1/7)
    CHECK(std::abs(c - n / 7.0) < 3 * std::sqrt(n * (1.0 / 7) * (6.0 / 7)));
  }
}

} // TEST_SUITE
