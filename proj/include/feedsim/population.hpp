#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "feedsim/network.hpp"
#include "feedsim/opinion.hpp"
#include "feedsim/random.hpp"

namespace feedsim {

struct AgentTraits {
  double lambda = 0.1;                ///< influenceability
  double neg_bias = 1.0;              ///< read-probability multiplier for negative messages, >= 1
  double intrinsic_negativity = 0.0;  ///< probability that a published message is negative
  double pub_scale = 0.0;             ///< mean daily original messages
  double share_scale = 0.0;           ///< mean daily retweet budget
  Opinion opinion0;
  AcceptanceCurve acceptance = AcceptanceCurve::exponential(0.2);
};

/// Draws from Exponential(mean = scale) and floors. scale = 0 yields 0.
long sample_daily_count(double scale, Rng& rng);

/// A one-dimensional distribution used to draw a single agent trait.
class TraitSampler {
 public:
  enum class Kind { constant, uniform, exponential, lognormal, beta, empirical };

  static TraitSampler constant(double v);
  /// Uniform on ]lo, hi].
  static TraitSampler uniform(double lo, double hi);
  static TraitSampler exponential(double mean);
  static TraitSampler lognormal(double mu, double sigma);
  static TraitSampler beta(double a, double b);
  /// Discrete values with probabilities (normalized on construction).
  static TraitSampler empirical(std::vector<double> values, std::vector<double> probabilities);
  /// CSV with `value,probability` (discrete) or `value` (resample uniformly).
  static TraitSampler load_empirical(const std::filesystem::path& path);

  /// Samples are clamped into [lo, hi].
  TraitSampler& clip(double lo, double hi);

  Kind kind() const noexcept { return kind_; }
  double param_a() const noexcept { return a_; }
  double param_b() const noexcept { return b_; }
  std::optional<std::pair<double, double>> clip_range() const { return clip_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& probabilities() const noexcept { return probs_; }

  /// Closed hull of the values this sampler can return.
  std::pair<double, double> support() const;

  double operator()(Rng& rng) const;

 private:
  TraitSampler(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

  Kind kind_;
  double a_;
  double b_;
  std::optional<std::pair<double, double>> clip_;
  std::vector<double> values_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

/// Fixes an exact fraction of agents to one intrinsic-negativity value.
struct NegativityPin {
  double value;
  double fraction;
};

struct TraitDistributions {
  TraitSampler lambda = TraitSampler::constant(0.1);
  TraitSampler neg_bias = TraitSampler::constant(2.0);
  TraitSampler intrinsic_negativity = TraitSampler::beta(2.0, 5.0);
  TraitSampler pub_scale = TraitSampler::lognormal(0.0, 1.0).clip(0.0, 50.0);
  TraitSampler share_scale = TraitSampler::lognormal(1.0, 1.0).clip(0.0, 100.0);
  TraitSampler opinion0 = TraitSampler::uniform(-1.0, 1.0);
  AcceptanceCurve acceptance = AcceptanceCurve::exponential(0.2);

  /// Applied after sampling, in order; pinned agents are disjoint.
  std::vector<NegativityPin> negativity_pins;

  /// Optional opinion-conditioned override for intrinsic negativity.
  std::function<double(Opinion, Rng&)> negativity_given_opinion;

  /// Throws ConfigError if any sampler's support leaves its trait's legal range.
  void validate() const;
};

struct Population {
  std::vector<AgentTraits> agents;
  SubscriptionGraph graph;
};

struct PopulationSpec {
  std::size_t n = 2000;
  std::size_t m = 3;
  /// Install each preferential-attachment edge in both directions; otherwise
  /// one direction is drawn at random.
  bool bidirected = true;
  TraitDistributions traits;
};

/// Undirected Barabasi-Albert edges (u < v). The seed graph is a clique on
/// the first m nodes; each later node attaches to m distinct earlier nodes
/// with probability proportional to degree.
std::vector<std::pair<AgentId, AgentId>> barabasi_albert_edges(std::size_t n, std::size_t m, Rng& rng);

/// Samples n agents and the follow graph. Pure function of (spec, seed).
/// Throws ConfigError if m >= n (n = 1 yields a single isolated agent).
Population generate_population(const PopulationSpec& spec, std::uint64_t seed);

/// Samples traits for an externally supplied graph.
Population population_from_graph(SubscriptionGraph graph, const TraitDistributions& traits, std::uint64_t seed);

}  // namespace feedsim
