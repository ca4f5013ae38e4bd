#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pbandit {

using Rng = std::mt19937_64;

// FNV-1a, used only to derive stream identities from names.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

// One master seed split into independent named streams ("losses", "delays",
// "actions/prudent-banker", ...).
class StreamFactory {
 public:
  explicit StreamFactory(std::uint64_t master_seed) : seed_(master_seed) {}

  std::uint64_t seed() const { return seed_; }

  Rng stream(std::string_view name) const {
    const std::uint64_t tag = fnv1a(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
  }

 private:
  std::uint64_t seed_;
};

// Uniform in [0,1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace pbandit
