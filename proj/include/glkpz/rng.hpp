#pragma once

#include <cstdint>
#include <random>

namespace glkpz {

// splitmix64 finalizer; used to derive independent stream seeds from (seed, index).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t sub) noexcept {
  return derive_seed(derive_seed(base, stream), sub);
}

using Rng = std::mt19937_64;

// stream tags, so different consumers of one seed never share a sequence
enum class Stream : std::uint64_t {
  initial_data = 1,
  noise = 2,
  sampler = 3,
  sigma_draw = 4,
  aux = 5,
};

inline Rng make_rng(std::uint64_t seed, Stream s, std::uint64_t index = 0) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(s), index));
}

}  // namespace glkpz
