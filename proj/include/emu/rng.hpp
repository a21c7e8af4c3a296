#pragma once
#include <cmath>
#include <cstdint>
#include <string_view>

namespace emu {

// Counter-free splittable generator in the SplitMix64 family.  Every logical
// stream (worker chain, design point, pipeline stage) owns an independent
// instance derived from (master seed, stream id), so results do not depend on
// how streams are scheduled across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ kGamma)) {}

  // Stable stream derivation: same (master, id) always yields the same stream.
  static RngStream from(std::uint64_t master, std::uint64_t stream_id) {
    return RngStream(mix(master + kGamma * (stream_id + 1)));
  }
  static RngStream from(std::uint64_t master, std::string_view label) {
    return from(master, hash_label(label));
  }

  // FNV-1a: used for deriving stage seeds from stage names.
  static std::uint64_t hash_label(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  // Child stream of this stream (used for nested parallel work).
  RngStream split(std::uint64_t child) const {
    return RngStream(mix(state_ + kGamma * (child + 1)));
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer on [0, n); Lemire multiply-shift map.
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  // Standard normal via the polar method (second deviate cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Seed for a named pipeline stage, overridable from the command line.
inline std::uint64_t stage_seed(std::uint64_t master, std::string_view stage) {
  return RngStream::from(master, stage).next_u64();
}

}  // namespace emu
