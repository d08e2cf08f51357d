#include "miabench/hash.hpp"

#include <array>

namespace miabench {
namespace {

constexpr std::uint64_t seeded_basis(std::uint64_t seed) noexcept {
  return kFnvOffsetBasis ^ fmix64(seed + 0x9e3779b97f4a7c15ULL);
}

inline std::uint64_t fnv_step(std::uint64_t h, std::uint8_t byte) noexcept {
  return (h ^ byte) * kFnvPrime;
}

inline std::uint64_t fnv_u32(std::uint64_t h, std::uint32_t v) noexcept {
  h = fnv_step(h, static_cast<std::uint8_t>(v));
  h = fnv_step(h, static_cast<std::uint8_t>(v >> 8));
  h = fnv_step(h, static_cast<std::uint8_t>(v >> 16));
  return fnv_step(h, static_cast<std::uint8_t>(v >> 24));
}

}  // namespace

std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seeded_basis(seed);
  for (char c : bytes) h = fnv_step(h, static_cast<std::uint8_t>(c));
  return fmix64(h);
}

std::uint64_t hash_codepoints(std::span<const char32_t> cps, std::uint64_t seed) noexcept {
  std::uint64_t h = seeded_basis(seed);
  for (char32_t c : cps) h = fnv_u32(h, static_cast<std::uint32_t>(c));
  return fmix64(h);
}

std::uint64_t hash_u32s(std::span<const std::uint32_t> values, std::uint64_t seed) noexcept {
  std::uint64_t h = seeded_basis(seed);
  for (std::uint32_t v : values) h = fnv_u32(h, v);
  return fmix64(h);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept {
  return hash_bytes(stage, root);
}

std::string hex64(std::uint64_t value) {
  static constexpr std::array<char, 16> digits{'0', '1', '2', '3', '4', '5', '6', '7',
                                               '8', '9', 'a', 'b', 'c', 'd', 'e', 'f'};
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace miabench
