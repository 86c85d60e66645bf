#pragma once

#include <array>
#include <cstdint>

namespace annealab {

// Philox4x64-10 counter-based generator (Salmon et al., SC'11). Pure
// function of (counter, key); no hidden state.
struct Philox4x64 {
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

// Stream of uniforms and standard normals keyed by (seed, stream_id). The
// position counts 64-bit words consumed, so two streams with equal keys and
// positions produce identical output regardless of how they got there.
class CounterStream {
 public:
  CounterStream() = default;
  CounterStream(std::uint64_t seed, std::uint64_t stream_id,
                std::uint64_t position = 0);

  std::uint64_t seed() const noexcept { return key_[0]; }
  std::uint64_t stream_id() const noexcept { return key_[1]; }
  std::uint64_t position() const noexcept { return position_; }

  std::uint64_t next_word() noexcept;

  // Uniform on the open interval (0, 1).
  double next_uniform() noexcept;

  // Box-Muller; consumes two words per pair of normals.
  double next_normal() noexcept;

  bool operator==(const CounterStream&) const = default;

 private:
  void refill() noexcept;

  Philox4x64::Key key_{0, 0};
  std::uint64_t position_ = 0;
  Philox4x64::Counter block_{};
  std::uint64_t block_index_ = ~std::uint64_t{0};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

inline double word_to_uniform(std::uint64_t w) noexcept {
  return (static_cast<double>(w >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace annealab
