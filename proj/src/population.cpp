#include "feedsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "feedsim/csv.hpp"
#include "feedsim/errors.hpp"

namespace feedsim {

long sample_daily_count(double scale, Rng& rng) {
  if (!(scale > 0.0)) return 0;
  return static_cast<long>(std::floor(rng.exponential(scale)));
}

TraitSampler TraitSampler::constant(double v) {
  if (!std::isfinite(v)) throw ConfigError("constant sampler: value must be finite");
  return {Kind::constant, v, v};
}

TraitSampler TraitSampler::uniform(double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("uniform sampler: need lo < hi");
  return {Kind::uniform, lo, hi};
}

TraitSampler TraitSampler::exponential(double mean) {
  if (!(mean > 0.0)) throw ConfigError("exponential sampler: mean must be positive");
  return {Kind::exponential, mean, 0.0};
}

TraitSampler TraitSampler::lognormal(double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(mu)) throw ConfigError("lognormal sampler: need finite mu and sigma > 0");
  return {Kind::lognormal, mu, sigma};
}

TraitSampler TraitSampler::beta(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("beta sampler: shape parameters must be positive");
  return {Kind::beta, a, b};
}

TraitSampler TraitSampler::empirical(std::vector<double> values, std::vector<double> probabilities) {
  if (values.empty() || values.size() != probabilities.size()) {
    throw ConfigError("empirical sampler: need matching non-empty value and probability lists");
  }
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("empirical sampler: negative probability");
    total += p;
  }
  if (!(total > 0.0)) throw ConfigError("empirical sampler: probabilities sum to zero");
  TraitSampler s{Kind::empirical, 0.0, 0.0};
  s.values_ = std::move(values);
  s.probs_ = std::move(probabilities);
  s.cumulative_.resize(s.probs_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < s.probs_.size(); ++i) {
    s.probs_[i] /= total;
    acc += s.probs_[i];
    s.cumulative_[i] = acc;
  }
  s.cumulative_.back() = 1.0;
  return s;
}

TraitSampler TraitSampler::load_empirical(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const int v = table.column("value");
  const int p = table.column("probability");
  if (v < 0) throw ConfigError(path.string() + ": expected a 'value' column");
  std::vector<double> values;
  std::vector<double> probs;
  for (const auto& row : table.rows) {
    values.push_back(parse_double(row[v], path.string()));
    probs.push_back(p >= 0 ? parse_double(row[p], path.string()) : 1.0);
  }
  return empirical(std::move(values), std::move(probs));
}

TraitSampler& TraitSampler::clip(double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("sampler clip: need lo <= hi");
  clip_ = {lo, hi};
  return *this;
}

std::pair<double, double> TraitSampler::support() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::pair<double, double> s;
  switch (kind_) {
    case Kind::constant: s = {a_, a_}; break;
    case Kind::uniform: s = {a_, b_}; break;
    case Kind::exponential:
    case Kind::lognormal: s = {0.0, inf}; break;
    case Kind::beta: s = {0.0, 1.0}; break;
    case Kind::empirical: {
      const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
      s = {*lo, *hi};
      break;
    }
  }
  if (clip_) s = {std::clamp(s.first, clip_->first, clip_->second), std::clamp(s.second, clip_->first, clip_->second)};
  return s;
}

double TraitSampler::operator()(Rng& rng) const {
  double x = 0.0;
  switch (kind_) {
    case Kind::constant: x = a_; break;
    case Kind::uniform: x = b_ - (b_ - a_) * rng.uniform(); break;
    case Kind::exponential: x = rng.exponential(a_); break;
    case Kind::lognormal: x = std::exp(a_ + b_ * rng.normal()); break;
    case Kind::beta: {
      const double g1 = rng.gamma(a_);
      const double g2 = rng.gamma(b_);
      x = (g1 + g2 > 0.0) ? g1 / (g1 + g2) : 0.5;
      break;
    }
    case Kind::empirical: {
      const double u = rng.uniform();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      x = values_[std::min<std::size_t>(it - cumulative_.begin(), values_.size() - 1)];
      break;
    }
  }
  if (clip_) x = std::clamp(x, clip_->first, clip_->second);
  return x;
}

void TraitDistributions::validate() const {
  auto check = [](const TraitSampler& s, double lo, double hi, const char* name) {
    const auto [a, b] = s.support();
    if (std::isnan(a) || std::isnan(b) || a < lo || b > hi) {
      throw ConfigError(std::string("trait '") + name + "': sampler support [" + format_double(a) + ", " +
                        format_double(b) + "] leaves the legal range [" + format_double(lo) + ", " +
                        format_double(hi) + "]");
    }
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  check(lambda, -inf, inf, "lambda");
  check(neg_bias, 1.0, inf, "neg_bias");
  check(intrinsic_negativity, 0.0, 1.0, "intrinsic_negativity");
  check(pub_scale, 0.0, inf, "pub_scale");
  check(share_scale, 0.0, inf, "share_scale");
  check(opinion0, -1.0, 1.0, "opinion0");
  double pinned = 0.0;
  for (const auto& pin : negativity_pins) {
    if (!(pin.value >= 0.0 && pin.value <= 1.0)) throw ConfigError("negativity pin value outside [0,1]");
    if (!(pin.fraction >= 0.0 && pin.fraction <= 1.0)) throw ConfigError("negativity pin fraction outside [0,1]");
    pinned += pin.fraction;
  }
  if (pinned > 1.0 + 1e-12) throw ConfigError("negativity pins cover more than the whole population");
}

std::vector<std::pair<AgentId, AgentId>> barabasi_albert_edges(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::pair<AgentId, AgentId>> edges;
  if (n <= 1) return edges;
  if (m < 1 || m >= n) throw ConfigError("preferential attachment: need 1 <= m < n");

  // Every edge endpoint appears once, so uniform picks are degree-proportional.
  std::vector<AgentId> endpoints;
  endpoints.reserve(2 * (m * (m - 1) / 2 + m * (n - m)));
  for (AgentId u = 0; u < m; ++u) {
    for (AgentId v = u + 1; v < m; ++v) {
      edges.emplace_back(u, v);
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }
  std::vector<AgentId> targets;
  for (AgentId v = static_cast<AgentId>(m); v < n; ++v) {
    targets.clear();
    while (targets.size() < m) {
      const AgentId t = endpoints.empty() ? static_cast<AgentId>(rng.below(v)) : endpoints[rng.below(endpoints.size())];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (const AgentId t : targets) {
      edges.emplace_back(t, v);
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return edges;
}

namespace {

std::vector<AgentTraits> sample_traits(std::size_t n, const TraitDistributions& dists, std::uint64_t seed) {
  dists.validate();
  std::vector<AgentTraits> agents(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, Stream::traits, i);
    auto& a = agents[i];
    a.lambda = dists.lambda(rng);
    a.neg_bias = dists.neg_bias(rng);
    a.intrinsic_negativity = dists.intrinsic_negativity(rng);
    a.pub_scale = dists.pub_scale(rng);
    a.share_scale = dists.share_scale(rng);
    a.opinion0 = Opinion(dists.opinion0(rng));
    a.acceptance = dists.acceptance;
    if (dists.negativity_given_opinion) {
      a.intrinsic_negativity = std::clamp(dists.negativity_given_opinion(a.opinion0, rng), 0.0, 1.0);
    }
  }
  if (!dists.negativity_pins.empty()) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed, Stream::traits, n, 1);
    rng.shuffle(order.begin(), order.end());
    std::size_t next = 0;
    for (const auto& pin : dists.negativity_pins) {
      const auto count = static_cast<std::size_t>(std::llround(pin.fraction * static_cast<double>(n)));
      for (std::size_t k = 0; k < count && next < n; ++k) agents[order[next++]].intrinsic_negativity = pin.value;
    }
  }
  return agents;
}

}  // namespace

Population generate_population(const PopulationSpec& spec, std::uint64_t seed) {
  if (spec.n == 0) throw ConfigError("population: n must be positive");
  if (spec.n > 1 && (spec.m < 1 || spec.m >= spec.n)) throw ConfigError("population: need 1 <= m < n");
  Population pop;
  pop.agents = sample_traits(spec.n, spec.traits, seed);
  pop.graph = SubscriptionGraph(spec.n);
  Rng rng = make_rng(seed, Stream::graph);
  for (const auto& [u, v] : barabasi_albert_edges(spec.n, spec.m, rng)) {
    if (spec.bidirected) {
      pop.graph.add(u, v);
      pop.graph.add(v, u);
    } else if (rng.bernoulli(0.5)) {
      pop.graph.add(u, v);
    } else {
      pop.graph.add(v, u);
    }
  }
  return pop;
}

Population population_from_graph(SubscriptionGraph graph, const TraitDistributions& traits, std::uint64_t seed) {
  Population pop;
  pop.agents = sample_traits(graph.num_nodes(), traits, seed);
  pop.graph = std::move(graph);
  return pop;
}

}  // namespace feedsim
