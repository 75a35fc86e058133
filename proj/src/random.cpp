#include "orrw/random.hpp"

namespace orrw {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

// Domain tags keep the time stream, the envelopes and demon randomness disjoint.
constexpr std::uint64_t kTagTime = 0x54494d45ULL << 32;
constexpr std::uint64_t kTagEnvelope = 0x454e564cULL << 32;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = std::uint64_t{a} * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

double prf_uniform(std::uint64_t key, std::uint64_t c0, std::uint64_t c1) noexcept {
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(c0), static_cast<std::uint32_t>(c0 >> 32),
       static_cast<std::uint32_t>(c1), static_cast<std::uint32_t>(c1 >> 32)},
      {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
  const std::uint64_t bits = (std::uint64_t{out[0]} << 32) | out[1];
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::uint64_t vertex_fingerprint(const Point& v) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc908ULL ^ static_cast<std::uint64_t>(v.dim());
  for (int i = 0; i < v.dim(); ++i) {
    h = mix64(h + 0x9e3779b97f4a7c15ULL + static_cast<std::uint32_t>(v[i]));
  }
  return h;
}

std::uint64_t derive_replica_seed(std::uint64_t master, std::uint64_t index) noexcept {
  const std::uint64_t k1 = mix64(master);
  const std::uint64_t k2 = mix64(master ^ 0x9e3779b97f4a7c15ULL);
  return mix64(mix64(index ^ k1) ^ k2);
}

double UniformSource::at_time(std::uint64_t t) const noexcept {
  return prf_uniform(seed_, t + offset_, kTagTime);
}

double UniformSource::envelope(const Point& v, std::uint64_t n) const noexcept {
  // Visit counts stay far below 2^32, so the low half of the second word holds n.
  return prf_uniform(seed_, vertex_fingerprint(v), kTagEnvelope | (n & 0xffffffffULL));
}

}  // namespace orrw
