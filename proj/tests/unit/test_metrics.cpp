#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "feedsim/metrics.hpp"
#include "feedsim/random.hpp"

using namespace feedsim;

namespace {

// Naive double loop over a dense adjacency matrix.
double modularity_oracle(const WeightedDigraph& g, const Partition& c, double resolution = 1.0) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (const auto& e : g.edges()) a[e.src][e.dst] += e.weight;
  std::vector<double> kout(n, 0.0), kin(n, 0.0);
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      kout[i] += a[i][j];
      kin[j] += a[i][j];
      m += a[i][j];
    }
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (c[i] == c[j]) q += a[i][j] - resolution * kout[i] * kin[j] / m;
  return q / m;
}

// Best modularity over every set partition (restricted growth strings).
std::pair<double, std::vector<Partition>> exhaustive_optimum(const WeightedDigraph& g) {
  const std::size_t n = g.num_nodes();
  Partition p(n, 0);
  double best = -2.0;
  std::vector<Partition> argmax;
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t used) {
    if (i == n) {
      const double q = modularity_oracle(g, p);
      if (q > best + 1e-12) {
        best = q;
        argmax = {p};
      } else if (std::abs(q - best) <= 1e-12) {
        argmax.push_back(p);
      }
      return;
    }
    for (std::uint32_t k = 0; k <= used; ++k) {
      p[i] = k;
      rec(i + 1, std::max(used, k + 1));
    }
  };
  p[0] = 0;
  rec(1, 1);
  return {best, argmax};
}

WeightedDigraph bidirected_cliques(std::size_t k, std::size_t size) {
  std::vector<WeightedEdge> edges;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j)
        if (i != j) edges.push_back({static_cast<AgentId>(c * size + i), static_cast<AgentId>(c * size + j), 1.0});
  return WeightedDigraph(k * size, edges);
}

WeightedDigraph two_cycles() {
  return WeightedDigraph(6, {{0, 1, 1}, {1, 2, 1}, {2, 0, 1}, {3, 4, 1}, {4, 5, 1}, {5, 3, 1}});
}

WeightedDigraph random_digraph(Rng& rng, std::size_t n, double density) {
  std::vector<WeightedEdge> edges;
  for (AgentId i = 0; i < n; ++i)
    for (AgentId j = 0; j < n; ++j)
      if (rng.bernoulli(density)) edges.push_back({i, j, 1.0 + std::floor(5.0 * rng.uniform())});
  if (edges.empty()) edges.push_back({0, static_cast<AgentId>(n - 1), 1.0});
  return WeightedDigraph(n, edges);
}

}  // namespace

TEST_CASE("weighted digraph merges parallel edges") {
  WeightedDigraph g(3, {{0, 1, 1.0}, {0, 1, 2.0}, {2, 2, 1.0}});
  CHECK(g.edges().size() == 2);
  CHECK(g.total_weight() == 4.0);
  CHECK(g.out_strength() == std::vector<double>{3.0, 0.0, 1.0});
  CHECK(g.in_strength() == std::vector<double>{0.0, 3.0, 1.0});
  CHECK_THROWS_AS(WeightedDigraph(2, {{0, 1, 0.0}}), std::invalid_argument);
}

TEST_CASE("modularity fixtures") {
  const auto cyc = two_cycles();
  CHECK(directed_modularity(cyc, {0, 0, 0, 1, 1, 1}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(directed_modularity(cyc, Partition(6, 0))) <= 1e-15);
  CHECK_THROWS_AS(directed_modularity(WeightedDigraph(3, {}), Partition(3, 0)), std::domain_error);
}

TEST_CASE("modularity matches the brute-force oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    const auto g = random_digraph(rng, n, 0.02 + 0.3 * rng.uniform());
    Partition p(n);
    const std::uint64_t k = 1 + rng.below(std::min<std::size_t>(n, 8));
    for (auto& c : p) c = static_cast<std::uint32_t>(rng.below(k));
    const double res = trial % 4 == 0 ? 0.5 + rng.uniform() : 1.0;
    REQUIRE(std::abs(directed_modularity(g, p, res) - modularity_oracle(g, p, res)) <= 1e-12);
  }
}

TEST_CASE("Leiden finds the exhaustive optimum on small fixtures") {
  SUBCASE("two 4-cliques") {
    const auto g = bidirected_cliques(2, 4);
    const auto [best, argmax] = exhaustive_optimum(g);
    REQUIRE(argmax.size() == 1);
    CHECK(argmax[0] == Partition{0, 0, 0, 0, 1, 1, 1, 1});
    const auto p = detect_communities(g, 1);
    CHECK(p == argmax[0]);
    CHECK(directed_modularity(g, p) == doctest::Approx(best).epsilon(1e-12));
  }
  SUBCASE("two 3-cycles") {
    const auto g = two_cycles();
    const auto [best, argmax] = exhaustive_optimum(g);
    REQUIRE(argmax.size() == 1);
    CHECK(best == doctest::Approx(0.5));
    CHECK(detect_communities(g, 2) == argmax[0]);
  }
  SUBCASE("complete graph on 6 nodes") {
    const auto g = bidirected_cliques(1, 6);
    const auto [best, argmax] = exhaustive_optimum(g);
    REQUIRE(argmax.size() == 1);
    CHECK(argmax[0] == Partition(6, 0));
    CHECK(detect_communities(g, 3) == Partition(6, 0));
  }
  SUBCASE("single node and empty graph") {
    CHECK(detect_communities(WeightedDigraph(1, {}), 1) == Partition{0});
    CHECK(detect_communities(WeightedDigraph(3, {}), 1) == Partition{0, 1, 2});
  }
}

TEST_CASE("Leiden on random graphs") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 6 + rng.below(9);
    const auto g = random_digraph(rng, n, 0.15 + 0.2 * rng.uniform());
    const auto p = detect_communities(g, static_cast<std::uint64_t>(trial));
    REQUIRE(p.size() == n);
    REQUIRE(communities_weakly_connected(g, p));
    REQUIRE(p == canonical_partition(p));
    REQUIRE(p == detect_communities(g, static_cast<std::uint64_t>(trial)));
    // Never worse than all-in-one, and never better than the optimum.
    const double q = directed_modularity(g, p);
    REQUIRE(q >= -1e-12);
    if (n <= 9) REQUIRE(q <= exhaustive_optimum(g).first + 1e-12);
  }
  // Planted communities on a larger graph.
  std::vector<WeightedEdge> edges;
  for (AgentId i = 0; i < 200; ++i)
    for (AgentId j = 0; j < 200; ++j) {
      if (i == j) continue;
      const bool same = i / 50 == j / 50;
      if (rng.bernoulli(same ? 0.2 : 0.005)) edges.push_back({i, j, 1.0});
    }
  const WeightedDigraph planted(200, edges);
  const auto p = detect_communities(planted, 5);
  CHECK(communities_weakly_connected(planted, p));
  Partition truth(200);
  for (AgentId i = 0; i < 200; ++i) truth[i] = i / 50;
  CHECK(directed_modularity(planted, p) >= directed_modularity(planted, truth) - 1e-9);
}

TEST_CASE("connectivity check and canonical labels") {
  const auto g = two_cycles();
  CHECK(communities_weakly_connected(g, {0, 0, 0, 1, 1, 1}));
  CHECK_FALSE(communities_weakly_connected(g, {0, 0, 1, 1, 0, 1}));
  CHECK(canonical_partition({5, 5, 2, 9, 2}) == Partition{0, 0, 1, 2, 1});
  CHECK(community_count({3, 3, 1, 7}) == 3);
}

TEST_CASE("diversity statistics") {
  const std::vector<double> v{0.0, 0.2, 0.6, 0.8};
  const double pop = std::sqrt(0.1);
  CHECK(population_std(v) == doctest::Approx(pop));
  CHECK(*diversity_intra(v, {0, 0, 1, 1}) == doctest::Approx(0.1 / pop));
  CHECK(*diversity_intra(v, {0, 1, 2, 3}) == 0.0);
  CHECK(*diversity_intra(v, {0, 0, 0, 0}) == doctest::Approx(1.0));
  CHECK(*diversity_inter(v, {0, 0, 0, 0}) == 0.0);
  const std::vector<double> w{0.0, 0.0, 1.0, 1.0};
  CHECK(*diversity_inter(w, {0, 0, 1, 1}) == doctest::Approx(1.0));
  CHECK(*diversity_intra(w, {0, 0, 1, 1}) == 0.0);
  CHECK(*diversity_inter(std::vector<double>{0.0, 1.0, 1.0, 0.0}, {0, 0, 1, 1}) == 0.0);
  CHECK_FALSE(diversity_intra(std::vector<double>{0.3, 0.3}, {0, 1}).has_value());
  CHECK_FALSE(diversity_inter(std::vector<double>{0.3, 0.3}, {0, 1}).has_value());

  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(30);
    Partition p(30);
    for (std::size_t i = 0; i < 30; ++i) {
      x[i] = rng.uniform();
      p[i] = static_cast<std::uint32_t>(rng.below(4));
    }
    const double a = 0.1 + 10.0 * rng.uniform(), b = 20.0 * rng.uniform() - 10.0;
    auto y = x;
    for (auto& t : y) t = (trial % 2 ? -a : a) * t + b;
    REQUIRE(*diversity_intra(y, p) == doctest::Approx(*diversity_intra(x, p)).epsilon(1e-9));
    REQUIRE(*diversity_inter(y, p) == doctest::Approx(*diversity_inter(x, p)).epsilon(1e-9));
  }
}

TEST_CASE("circular statistics") {
  // Opinions straddling the boundary are tight on the circle.
  const std::vector<double> edge{0.95, -0.95, 1.0, 0.9};
  const std::vector<double> centre{-0.05, 0.05, 0.0, -0.1};
  CHECK(circular_std(edge) == doctest::Approx(circular_std(centre)));
  CHECK(circular_std(edge) < 0.3);
  CHECK(population_std(edge) > 0.8);
  CHECK(std::abs(circular_mean(std::vector<double>{0.9, -0.9})) == doctest::Approx(1.0));
  CHECK(circular_mean(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.3));
  CHECK(circular_std(std::vector<double>{0.25, 0.25}) == doctest::Approx(0.0));
  // Circular diversity: two tight clusters at opposite ends.
  const std::vector<double> two{0.95, -0.95, 0.05, -0.05};
  CHECK(*diversity_intra(two, {0, 0, 1, 1}, true) < 0.2);
}

TEST_CASE("negativity overexposure ratio") {
  CHECK(*gamma_overexposure({10, 5, 20, 10}) == doctest::Approx(1.0));
  CHECK(*gamma_overexposure({10, 6, 50, 10}) == doctest::Approx(3.0));
  CHECK_FALSE(gamma_overexposure({10, 0, 20, 0}).has_value());
  CHECK_FALSE(gamma_overexposure({0, 0, 20, 4}).has_value());
  const std::vector<ExposureCounts> all{{10, 5, 20, 10}, {10, 6, 50, 10}, {0, 0, 3, 1}, {4, 0, 4, 0}};
  const auto s = summarize_gamma(all);
  CHECK(s.defined == 2);
  CHECK(s.no_impressions == 1);
  CHECK(s.no_negative_pool == 1);
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.std == doctest::Approx(1.0));
  CHECK_FALSE(s.per_agent[2].has_value());
  CHECK(std::isnan(summarize_gamma(std::vector<ExposureCounts>{{0, 0, 0, 0}}).mean));
}

TEST_CASE("social power report") {
  const auto bins = default_negativity_bins();
  REQUIRE(bins.size() == 6);
  CHECK(bins[0].contains(0.0));
  CHECK_FALSE(bins[1].contains(0.0));
  CHECK(bins[1].contains(0.25));
  CHECK(bins[4].contains(0.99));
  CHECK_FALSE(bins[4].contains(1.0));
  CHECK(bins[5].contains(1.0));

  // 200 publishers; the two most popular both have nu = 1, nobody with nu = 0 is on top.
  std::vector<std::uint64_t> pub(201, 2), rt(201, 0);
  std::vector<double> nu(201, 0.3);
  pub[200] = 0;  // never published: ineligible
  rt[200] = 1000;
  for (int i = 0; i < 20; ++i) nu[static_cast<std::size_t>(i)] = 1.0;
  for (int i = 20; i < 40; ++i) nu[static_cast<std::size_t>(i)] = 0.0;
  rt[5] = 50;
  rt[7] = 40;
  const auto r = social_power_report(pub, rt, nu, 0.01);
  CHECK(r.eligible == 200);
  CHECK(r.top_size == 2);
  CHECK_FALSE(r.small_population);
  CHECK(r.rows[5].top == 2);
  CHECK(*r.rows[5].ratio == doctest::Approx(1.0 / 0.1));
  CHECK(*r.rows[0].ratio == 0.0);
  CHECK_FALSE(r.rows[1].ratio.has_value());

  // Homogeneous population: every defined ratio is 1.
  const std::vector<double> same(200, 0.4);
  std::vector<std::uint64_t> p2(200, 3), r2(200);
  for (std::size_t i = 0; i < 200; ++i) r2[i] = i % 17;
  const auto h = social_power_report(p2, r2, same, 0.05);
  for (const auto& row : h.rows)
    if (row.ratio) CHECK(*row.ratio == doctest::Approx(1.0));

  // Ties at the boundary go to the lower id; small populations are flagged.
  const auto t = social_power_report(std::vector<std::uint64_t>{1, 1, 1}, std::vector<std::uint64_t>{1, 1, 1},
                                     std::vector<double>{0.0, 1.0, 1.0}, 0.01);
  CHECK(t.small_population);
  CHECK(t.top_size == 1);
  CHECK(t.rows[0].top == 1);
}
