#ifndef UNIADAPT_RNG_HPP
#define UNIADAPT_RNG_HPP

#include <cstdint>
#include <random>

namespace uniadapt {

// All randomness in a run flows from one root seed. Each consumer gets its
// own stream id so that, e.g., changing the shuffle order cannot perturb the
// data generation.
enum class RngStream : std::uint64_t {
  data_source = 1,
  data_target = 2,
  param_init = 3,
  shuffle_source = 4,
  shuffle_target = 5,
  gradcheck = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, RngStream stream) {
  return splitmix64(root ^ splitmix64(static_cast<std::uint64_t>(stream)));
}

inline std::mt19937_64 make_engine(std::uint64_t root, RngStream stream) {
  return std::mt19937_64(derive_seed(root, stream));
}

}  // namespace uniadapt

#endif
