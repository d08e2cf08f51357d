#include "miabench/random.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>

namespace miabench {

std::uint64_t Rng::index(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("Rng::index: bound must be positive");
  // Rejection keeps the mapping exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return draw % bound;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    Rng& rng) {
  if (count > population) throw std::invalid_argument("sample larger than population");
  std::vector<std::size_t> slots(population);
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.index(population - i));
    std::swap(slots[i], slots[j]);
  }
  slots.resize(count);
  return slots;
}

}  // namespace miabench
