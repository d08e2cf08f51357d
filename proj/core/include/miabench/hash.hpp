#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace miabench {

// Fixed, published hashing used everywhere a stable hash is needed (feature
// buckets, Bloom positions, seed derivation): 64-bit FNV-1a over the input
// bytes, with the seed folded into the offset basis, followed by the
// MurmurHash3 fmix64 finalizer.

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fmix64(std::uint64_t k) noexcept {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdULL;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ULL;
  k ^= k >> 33;
  return k;
}

std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0) noexcept;

/// Code points are hashed as 4 little-endian bytes each.
std::uint64_t hash_codepoints(std::span<const char32_t> cps, std::uint64_t seed = 0) noexcept;

std::uint64_t hash_u32s(std::span<const std::uint32_t> values, std::uint64_t seed = 0) noexcept;

/// Derives an independent stream seed from a root seed and a stage label.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept;

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace miabench
