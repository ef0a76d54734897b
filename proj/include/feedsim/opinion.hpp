#pragma once

#include <filesystem>
#include <memory>
#include <vector>

namespace feedsim {

/// Maps any real onto the canonical representative in ]-1, +1] of the
/// circular opinion space (period 2).
double wrap_opinion(double x) noexcept;

/// A position on the circular ideological axis. Always canonical.
class Opinion {
 public:
  constexpr Opinion() = default;
  explicit Opinion(double x) noexcept : value_(wrap_opinion(x)) {}

  double value() const noexcept { return value_; }

  friend bool operator==(Opinion, Opinion) = default;

 private:
  double value_ = 0.0;
};

/// Shortest-arc distance, in [0, 1].
double circ_dist(Opinion a, Opinion b) noexcept;

/// Signed shortest arc from `from` to `to`, in ]-1, +1]. The antipodal case
/// resolves to +1.
double signed_delta(Opinion from, Opinion to) noexcept;

/// Linear opinion update o <- o + lambda * (author - o), taken along the
/// shortest arc and re-wrapped.
Opinion update_opinion(Opinion self, Opinion author, double lambda) noexcept;

/// Probability of engaging with a read message as a function of the signed
/// opinion difference (reader - author).
class AcceptanceCurve {
 public:
  struct Bin {
    double low;
    double high;
    double probability;
  };

  /// exp(-|delta| / scale). Throws ConfigError unless scale > 0.
  static AcceptanceCurve exponential(double scale);

  /// Piecewise-constant curve over [low, high) bins. The bins must be sorted,
  /// contiguous, cover [-1, 1] and assign probability 1 at delta = 0.
  /// Throws ConfigError otherwise.
  static AcceptanceCurve tabulated(std::vector<Bin> bins);

  /// Reads a `delta_low,delta_high,probability` CSV.
  static AcceptanceCurve load_csv(const std::filesystem::path& path);

  bool is_exponential() const noexcept { return bins_ == nullptr; }
  double scale() const noexcept { return scale_; }
  const std::vector<Bin>& bins() const;

  double operator()(double delta) const noexcept;

 private:
  AcceptanceCurve() = default;

  double scale_ = 0.2;
  std::shared_ptr<const std::vector<Bin>> bins_;
};

inline double engagement_prob(const AcceptanceCurve& curve, double delta) noexcept { return curve(delta); }

}  // namespace feedsim
