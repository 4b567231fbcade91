#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace vaproto {

// FNV-1a over raw bytes; used for stream naming and file/parameter
// fingerprints (not cryptographic).
std::uint64_t fnv1a64(std::string_view bytes);

// xoshiro256** stream seeded via splitmix64. A stream remembers the seed
// it was created from, so split()/substream() derive independent streams
// without consuming generator state: parallel consumers stay reproducible
// no matter how much the parent has already drawn.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();                      // [0, 1)
  double normal();                       // standard normal (Box-Muller)
  std::uint64_t below(std::uint64_t n);  // unbiased draw from [0, n)

  Rng split(std::uint64_t tag) const;
  Rng substream(std::string_view name) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace vaproto
