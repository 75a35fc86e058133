#pragma once

#include <array>
#include <cstdint>

#include "orrw/lattice.hpp"

namespace orrw {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11), used as a keyed PRF:
/// the same (key, counter) always yields the same four output words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) with 53 random bits from the PRF at (key, counter).
double prf_uniform(std::uint64_t key, std::uint64_t c0, std::uint64_t c1) noexcept;

/// 64-bit fingerprint of a vertex, used to key envelope stacks.
std::uint64_t vertex_fingerprint(const Point& v) noexcept;

/// Seed for replica `index` under `master`:
///   k1 = mix64(master), k2 = mix64(master ^ 0x9e3779b97f4a7c15),
///   seed = mix64(mix64(index ^ k1) ^ k2).
/// Injective in `index` for fixed `master` since every stage is a bijection.
std::uint64_t derive_replica_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Source of the uniforms driving a walk.
///
/// TimeStream realizes U_1, U_2, ... indexed by time (shared-uniform couplings).
/// Envelopes realizes U_{v,n}, the n-th instruction read at vertex v.
class UniformSource {
 public:
  enum class Kind { kTimeStream, kEnvelopes };

  static UniformSource time_stream(std::uint64_t seed, std::uint64_t offset = 0) noexcept {
    return UniformSource(Kind::kTimeStream, seed, offset);
  }
  static UniformSource envelopes(std::uint64_t seed) noexcept {
    return UniformSource(Kind::kEnvelopes, seed, 0);
  }

  Kind kind() const noexcept { return kind_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t offset() const noexcept { return offset_; }

  /// U_t for t >= 1 (shifted by the stream offset).
  double at_time(std::uint64_t t) const noexcept;
  /// U_{v,n} for n >= 1.
  double envelope(const Point& v, std::uint64_t n) const noexcept;
  /// Uniform for the step leaving `v` at time `t` after `visits` visits to `v`.
  double for_step(std::uint64_t t, const Point& v, std::uint64_t visits) const noexcept {
    return kind_ == Kind::kTimeStream ? at_time(t + 1) : envelope(v, visits);
  }

 private:
  UniformSource(Kind kind, std::uint64_t seed, std::uint64_t offset) noexcept
      : kind_(kind), seed_(seed), offset_(offset) {}

  Kind kind_;
  std::uint64_t seed_;
  std::uint64_t offset_;
};

}  // namespace orrw
