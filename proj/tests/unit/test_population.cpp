#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "feedsim/errors.hpp"
#include "feedsim/population.hpp"

using namespace feedsim;

TEST_CASE("daily counts are floored exponentials") {
  Rng rng(1);
  CHECK(sample_daily_count(0.0, rng) == 0);
  CHECK(rng.draws() == 0);

  // Mean of floor(X), X ~ Exp(mean 5): sum over k >= 1 of P(X >= k) = q / (1 - q), q = exp(-1/5).
  const double q = std::exp(-1.0 / 5.0);
  const double closed_form = q / (1.0 - q);
  CHECK(closed_form == doctest::Approx(4.5167).epsilon(1e-4));
  Rng mc(2024);
  double total = 0.0;
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) {
    const long k = sample_daily_count(5.0, mc);
    REQUIRE(k >= 0);
    total += static_cast<double>(k);
  }
  CHECK(std::abs(total / kDraws - 4.5) <= 0.1);
  CHECK(std::abs(total / kDraws - closed_form) <= 0.1);
}

TEST_CASE("seeded regression value") {
  // mt19937_64 is fully specified by the standard, so these are portable.
  Rng raw(42);
  CHECK(raw() == 13930160852258120406ULL);
  Rng rng(42);
  CHECK(sample_daily_count(1.0, rng) == 1);
}

TEST_CASE("portable distribution helpers") {
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) REQUIRE(rng.below(7) < 7);
  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  rng.shuffle(v.begin(), v.end());
  CHECK(std::is_permutation(v.begin(), v.end(), std::vector<int>([] {
                                std::vector<int> w(20);
                                std::iota(w.begin(), w.end(), 0);
                                return w;
                              }()).begin()));
  // Gamma(a) has mean a; beta via two gammas has mean a / (a + b).
  double g = 0.0, b = 0.0;
  constexpr int kN = 50000;
  const auto beta = TraitSampler::beta(2.0, 5.0);
  for (int i = 0; i < kN; ++i) {
    g += rng.gamma(0.5);
    b += beta(rng);
  }
  CHECK(g / kN == doctest::Approx(0.5).epsilon(0.03));
  CHECK(b / kN == doctest::Approx(2.0 / 7.0).epsilon(0.02));
}

TEST_CASE("trait samplers respect their supports") {
  Rng rng(3);
  const auto u = TraitSampler::uniform(-1.0, 1.0);
  const auto ln = TraitSampler::lognormal(0.0, 1.0).clip(0.0, 50.0);
  const auto emp = TraitSampler::empirical({0.0, 0.5, 1.0}, {1.0, 2.0, 1.0});
  int halves = 0;
  for (int i = 0; i < 20000; ++i) {
    const double x = u(rng);
    REQUIRE(x > -1.0);
    REQUIRE(x <= 1.0);
    const double y = ln(rng);
    REQUIRE(y >= 0.0);
    REQUIRE(y <= 50.0);
    const double z = emp(rng);
    REQUIRE((z == 0.0 || z == 0.5 || z == 1.0));
    halves += z == 0.5;
  }
  CHECK(halves / 20000.0 == doctest::Approx(0.5).epsilon(0.03));
  CHECK_THROWS_AS(TraitSampler::uniform(1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(TraitSampler::beta(0.0, 1.0), ConfigError);
  CHECK_THROWS_AS(TraitSampler::empirical({1.0}, {0.0}), ConfigError);

  TraitDistributions bad;
  bad.neg_bias = TraitSampler::uniform(0.5, 2.0);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  TraitDistributions bad_nu;
  bad_nu.intrinsic_negativity = TraitSampler::exponential(0.3);
  CHECK_THROWS_AS(bad_nu.validate(), ConfigError);
  TraitDistributions ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("Barabasi-Albert graph shape") {
  PopulationSpec spec;
  spec.n = 100;
  spec.m = 3;
  Rng rng(5);
  const auto edges = barabasi_albert_edges(100, 3, rng);
  // Seed triangle plus 3 edges for each of the 97 later nodes.
  CHECK(edges.size() == 294);
  std::set<std::pair<AgentId, AgentId>> unique;
  for (auto [u, v] : edges) {
    REQUIRE(u != v);
    unique.insert({std::min(u, v), std::max(u, v)});
  }
  CHECK(unique.size() == edges.size());

  const auto pop = generate_population(spec, 7);
  CHECK(pop.agents.size() == 100);
  CHECK(pop.graph.num_edges() == 2 * 294);
  for (AgentId i = 0; i < 100; ++i) {
    REQUIRE(!pop.graph.has(i, i));
    for (const auto& s : pop.graph.sources(i)) REQUIRE(pop.graph.has(i, s.source));
  }

  spec.bidirected = false;
  CHECK(generate_population(spec, 7).graph.num_edges() == 294);
}

TEST_CASE("degenerate population sizes") {
  PopulationSpec spec;
  spec.n = 1;
  spec.m = 3;
  const auto pop = generate_population(spec, 1);
  CHECK(pop.agents.size() == 1);
  CHECK(pop.graph.num_edges() == 0);
  spec.n = 3;
  CHECK_THROWS_AS(generate_population(spec, 1), ConfigError);
  spec.n = 0;
  CHECK_THROWS_AS(generate_population(spec, 1), ConfigError);
}

TEST_CASE("degree distribution is heavy-tailed") {
  int heavy = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_rng(seed, Stream::graph);
    const auto edges = barabasi_albert_edges(10000, 3, rng);
    std::vector<std::size_t> degree(10000, 0);
    for (auto [u, v] : edges) {
      ++degree[u];
      ++degree[v];
    }
    const double mean = 2.0 * static_cast<double>(edges.size()) / 10000.0;
    heavy += static_cast<double>(*std::max_element(degree.begin(), degree.end())) > 10.0 * mean;
  }
  CHECK(heavy == 20);
}

TEST_CASE("population is a pure function of the seed") {
  PopulationSpec spec;
  spec.n = 300;
  spec.traits.negativity_pins = {{1.0, 0.05}, {0.0, 0.05}};
  const auto a = generate_population(spec, 11);
  const auto b = generate_population(spec, 11);
  const auto c = generate_population(spec, 12);
  bool differs = false;
  int ones = 0, zeros = 0;
  for (std::size_t i = 0; i < 300; ++i) {
    const auto& x = a.agents[i];
    const auto& y = b.agents[i];
    REQUIRE(x.lambda == y.lambda);
    REQUIRE(x.intrinsic_negativity == y.intrinsic_negativity);
    REQUIRE(x.pub_scale == y.pub_scale);
    REQUIRE(x.share_scale == y.share_scale);
    REQUIRE(x.opinion0 == y.opinion0);
    REQUIRE(std::vector<Subscription>(a.graph.sources(i).begin(), a.graph.sources(i).end()).size() ==
            b.graph.sources(i).size());
    differs |= x.opinion0 != c.agents[i].opinion0;
    REQUIRE(x.neg_bias >= 1.0);
    REQUIRE(x.intrinsic_negativity >= 0.0);
    REQUIRE(x.intrinsic_negativity <= 1.0);
    REQUIRE(x.pub_scale >= 0.0);
    REQUIRE(x.share_scale >= 0.0);
    ones += x.intrinsic_negativity == 1.0;
    zeros += x.intrinsic_negativity == 0.0;
  }
  CHECK(differs);
  CHECK(ones == 15);
  CHECK(zeros == 15);
  CHECK(a.graph.num_edges() == b.graph.num_edges());
}
