#pragma once

// Keyed random streams.
//
// Every Monte Carlo sample draws from its own stream, derived from the run
// seed and a (scenario, grid, sample, channel) key by hashing. Streams are
// plain values: derive one wherever it is needed, never share one between
// workers. Results therefore do not depend on execution order.

#include <array>
#include <cstdint>
#include <limits>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace itersurv {

struct Seed {
  std::uint64_t value = 0;
};

// Stream channels used by the composition machinery. Nested inner chains
// use kChainBase + level.
enum Channel : std::uint32_t {
  kInner = 0,
  kOuterPlus = 1,
  kOuterMinus = 2,
  kChainBase = 3,
};

struct StreamKey {
  std::uint64_t scenario_index = 0;
  std::uint64_t grid_index = 0;
  std::uint64_t sample_index = 0;
  std::uint32_t channel = kInner;

  [[nodiscard]] StreamKey with_channel(std::uint32_t c) const {
    StreamKey k = *this;
    k.channel = c;
    return k;
  }
  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t fmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t splitmix_next(std::uint64_t& state) {
  state += kGolden;
  return fmix64(state);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t field,
                               std::uint64_t salt) {
  return fmix64(h ^ fmix64(field + salt * kGolden));
}

}  // namespace detail

// xoshiro256++ seeded from a hashed key. Satisfies
// UniformRandomBitGenerator, so it drives the Boost distributions directly.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key_hash) {
    std::uint64_t sm = key_hash;
    for (auto& word : state_) word = detail::splitmix_next(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    const std::uint64_t result =
        detail::rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // (0, 1], safe as a log argument.
  double uniform_pos() {
    return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() { return boost::random::normal_distribution<double>{}(*this); }

  double exponential() {
    return boost::random::exponential_distribution<double>{}(*this);
  }

  friend bool operator==(const Stream&, const Stream&) = default;

 private:
  std::array<std::uint64_t, 4> state_{};
};

inline std::uint64_t stream_key_hash(Seed seed, const StreamKey& key) {
  std::uint64_t h = detail::fmix64(seed.value ^ 0x6A09E667F3BCC908ULL);
  h = detail::absorb(h, key.scenario_index, 1);
  h = detail::absorb(h, key.grid_index, 2);
  h = detail::absorb(h, key.sample_index, 3);
  h = detail::absorb(h, key.channel, 4);
  return h;
}

inline Stream derive_stream(Seed seed, const StreamKey& key) {
  return Stream(stream_key_hash(seed, key));
}

inline double next_standard_normal(Stream& s) { return s.normal(); }
inline double next_uniform(Stream& s) { return s.uniform(); }

}  // namespace itersurv
