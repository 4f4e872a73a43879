#include "etd/rng.hpp"

namespace etd {

std::uint64_t substream_seed(std::uint64_t master, std::string_view component,
                             std::uint64_t index) {
  std::uint64_t seed = splitmix64(master);
  for (unsigned char c : component) {
    seed = hash_combine(seed, c);
  }
  return hash_combine(seed, index);
}

}  // namespace etd
