#pragma once

#include <cstdint>

namespace greenpot {

/// Counter-based random stream: the i-th draw is a pure function of
/// (seed, stream_id, i), so a stream can be replayed on any thread.
class RngStream {
 public:
  constexpr RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {}

  /// Stream for sample `index` at MLMC level `level`.
  static constexpr RngStream for_sample(std::uint64_t seed, int level, std::uint64_t index) {
    return RngStream(seed, (static_cast<std::uint64_t>(level) << 48) ^ index);
  }

  std::uint64_t next_u64() {
    std::uint64_t key = mix(seed_ ^ mix(stream_id_ + 0x632be59bd9b4e019ULL));
    return mix(key + (counter_++) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return counter_; }

 private:
  // SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
};

}  // namespace greenpot
