#pragma once

#include <cstdint>
#include <limits>

namespace hazardlean {

/** splitmix64 step. Used for seeding and for hashing stream keys. */
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t h, std::uint64_t v) {
  std::uint64_t s = h ^ (v + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2));
  return splitmix64(s);
}

/**
 * xoshiro256++ engine. Satisfies UniformRandomBitGenerator so it plugs into
 * boost::random distributions.
 */
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t r = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return r;
  }

  // uniform on (0,1), never exactly 0
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Stream tags keep the different consumers of one (seed, replicate) apart.
enum class StreamTag : std::uint64_t {
  Subject = 1,
  DatasetParams = 2,
  Folds = 3,
  Calibration = 4,
  Oracle = 5,
  Pilot = 6,
  MonteCarlo = 7,
};

/**
 * Independent engine for key (seed, tag, a, b). Subjects use
 * (seed, Subject, replicate, subject_index), so each subject owns its draws.
 */
inline Xoshiro256 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                              std::uint64_t b = 0) {
  std::uint64_t h = mix_key(0x2545f4914f6cdd1dULL, seed);
  h = mix_key(h, static_cast<std::uint64_t>(tag));
  h = mix_key(h, a);
  h = mix_key(h, b);
  return Xoshiro256(h);
}

}  // namespace hazardlean
