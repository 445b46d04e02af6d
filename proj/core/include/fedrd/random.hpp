#pragma once

#include <cstdint>
#include <initializer_list>

namespace fedrd {

// SplitMix64 finalizer; a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream tags, so different consumers of one seed never collide.
enum class Stream : std::uint64_t {
  kModelInit = 1,
  kClientShuffle = 2,
  kDomainSamples = 3,
  kPartition = 4,
};

// Seed of an independent stream keyed by a tag and a tuple of integers. The
// result depends only on the arguments, never on call order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream tag, std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(tag));
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k));
  return seed ^ h;
}

}  // namespace fedrd
