#include <doctest.h>

#include <absl/container/flat_hash_set.h>

#include <cmath>

#include "orrw/random.hpp"

using namespace orrw;

TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("uniforms are deterministic and in [0, 1)") {
  const auto src = UniformSource::time_stream(42);
  double sum = 0.0;
  const int n = 100000;
  for (int t = 1; t <= n; ++t) {
    const double u = src.at_time(static_cast<std::uint64_t>(t));
    CHECK_GE(u, 0.0);
    CHECK_LT(u, 1.0);
    CHECK(u == UniformSource::time_stream(42).at_time(static_cast<std::uint64_t>(t)));
    sum += u;
  }
  // Mean of 1e5 uniforms: sd 0.0009.
  CHECK(std::abs(sum / n - 0.5) < 0.005);
  CHECK(src.at_time(1) != UniformSource::time_stream(43).at_time(1));
}

TEST_CASE("marginal uniformity of both sources") {
  const int bins = 10, n = 200000;
  std::vector<int> a(bins), b(bins);
  const auto ts = UniformSource::time_stream(9);
  const auto env = UniformSource::envelopes(9);
  for (int i = 0; i < n; ++i) {
    ++a[static_cast<std::size_t>(ts.at_time(static_cast<std::uint64_t>(i) + 1) * bins)];
    ++b[static_cast<std::size_t>(env.envelope(Point{i % 37, i / 37}, 1 + i % 3) * bins)];
  }
  double ca = 0, cb = 0;
  for (int k = 0; k < bins; ++k) {
    ca += std::pow(a[k] - n / bins, 2) / (n / bins);
    cb += std::pow(b[k] - n / bins, 2) / (n / bins);
  }
  // 99.9% quantile of chi-squared with 9 dof.
  CHECK(ca < 27.88);
  CHECK(cb < 27.88);
}

TEST_CASE("time stream offset shifts the index") {
  const auto base = UniformSource::time_stream(5);
  const auto shifted = UniformSource::time_stream(5, 10);
  for (std::uint64_t t = 1; t < 20; ++t) CHECK(shifted.at_time(t) == base.at_time(t + 10));
}

TEST_CASE("for_step reads the right coordinate of each source") {
  const auto ts = UniformSource::time_stream(1);
  const auto env = UniformSource::envelopes(1);
  CHECK(ts.for_step(4, Point{3, 3}, 7) == ts.at_time(5));
  CHECK(env.for_step(4, Point{3, 3}, 7) == env.envelope(Point{3, 3}, 7));
  CHECK(env.envelope(Point{3, 3}, 7) != env.envelope(Point{3, 3}, 8));
  CHECK(env.envelope(Point{3, 3}, 7) != env.envelope(Point{3, 4}, 7));
  CHECK(env.envelope(Point{3}, 1) != env.envelope(Point{3, 0}, 1));
}

TEST_CASE("replica seeds do not collide") {
  absl::flat_hash_set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000000; ++i) seen.insert(derive_replica_seed(77, i));
  CHECK(seen.size() == 1000000);
  CHECK(derive_replica_seed(77, 5) == derive_replica_seed(77, 5));
  CHECK(derive_replica_seed(77, 5) != derive_replica_seed(78, 5));
  const std::uint64_t m = 77, k1 = mix64(m), k2 = mix64(m ^ 0x9e3779b97f4a7c15ULL);
  CHECK(derive_replica_seed(m, 3) == mix64(mix64(3 ^ k1) ^ k2));
}
