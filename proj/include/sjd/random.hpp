#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>

namespace sjd {

namespace detail {

// SplitMix64 finalizer; used only to turn (seed, key) pairs into engine seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic splittable random source.
//
// Every source is identified by a 64-bit key path. Draws come from a
// mt19937_64 engine seeded from that key, and derive() builds children from
// the key path alone, so a child's stream never depends on how many values
// the parent has already produced. The engine is seeded on first draw: most
// derived sources in a decode are created far more often than they are used.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : key_(detail::mix64(seed)) {}

  RandomSource derive(std::uint64_t child_key) const {
    return RandomSource(child_of(key_, child_key), Tag{});
  }

  RandomSource derive(std::initializer_list<std::uint64_t> path) const {
    std::uint64_t k = key_;
    for (auto c : path) k = child_of(k, c);
    return RandomSource(k, Tag{});
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine()() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1).
  double uniform_open01() {
    return (static_cast<double>(engine()() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t next_u64() { return engine()(); }

  std::mt19937_64& engine() {
    if (!engine_) engine_.emplace(key_);
    return *engine_;
  }

  std::uint64_t key() const { return key_; }

 private:
  struct Tag {};
  RandomSource(std::uint64_t key, Tag) : key_(key) {}

  static constexpr std::uint64_t child_of(std::uint64_t parent, std::uint64_t child) noexcept {
    return detail::mix64(parent ^ detail::mix64(child + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t key_;
  std::optional<std::mt19937_64> engine_;
};

// Stream purposes for per-position substreams inside one decode run.
namespace stream {
inline constexpr std::uint64_t kDraft = 1;
inline constexpr std::uint64_t kVerify = 2;
inline constexpr std::uint64_t kGumbel = 3;
inline constexpr std::uint64_t kInit = 4;
}  // namespace stream

}  // namespace sjd
