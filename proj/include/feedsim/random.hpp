#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <string_view>

namespace feedsim {

/// Named, mutually independent random streams expanded from one master seed.
enum class Stream : std::uint8_t {
  traits,
  graph,
  activity,
  valence,
  reading,
  engagement,
  rewiring,
  learner,
  analysis,
  dynamics,
};

inline constexpr std::size_t kStreamCount = 10;

std::string_view stream_name(Stream s) noexcept;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one (stream, a, b) cell of the master seed, e.g. (reading, day, agent).
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t h = mix64(master ^ 0x5eedf00dULL);
  h = mix64(h ^ (static_cast<std::uint64_t>(stream) + 1));
  h = mix64(h ^ a);
  return mix64(h ^ (b * 0xd1342543de82ef95ULL));
}

/// Mersenne twister that counts how many 64-bit words it has produced.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  result_type operator()() {
    ++draws_;
    return engine_();
  }

  std::uint64_t draws() const noexcept { return draws_; }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n), by rejection so the result is the same on
  /// every standard library.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  /// Exponential with the given mean, by inversion.
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  /// Standard normal (Marsaglia polar method, spare value discarded).
  double normal() {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape) {
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform_open(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * x * x * x * x || std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Fisher-Yates shuffle driven by below().
  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) std::swap(first[i - 1], first[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(master, stream, a, b));
}

/// Per-stream draw totals, reported in run summaries.
struct RngAccounting {
  std::array<std::uint64_t, kStreamCount> draws{};

  void add(Stream s, std::uint64_t n) noexcept { draws[static_cast<std::size_t>(s)] += n; }
  void add(Stream s, const Rng& rng) noexcept { add(s, rng.draws()); }
};

}  // namespace feedsim
