#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "feedsim/errors.hpp"
#include "feedsim/network.hpp"

using namespace feedsim;

TEST_CASE("graph bookkeeping") {
  SubscriptionGraph g(4);
  CHECK(g.add(0, 1));
  CHECK_FALSE(g.add(0, 1));
  CHECK_FALSE(g.add(2, 2));
  CHECK(g.add(2, 1));
  CHECK(g.num_edges() == 2);
  CHECK(g.in_degree(1) == 2);
  CHECK(g.out_degree(0) == 1);
  CHECK(g.sources(1)[0].source == 0);
  CHECK(g.sources(1)[1].source == 2);
  CHECK(g.delta(0, 1) == 0.0);
  CHECK_THROWS_AS(g.delta(1, 0), std::out_of_range);
  CHECK(g.remove(0, 1));
  CHECK_FALSE(g.remove(0, 1));
  CHECK(g.num_edges() == 1);
  CHECK(g.followers(0).empty());
}

TEST_CASE("disagreement update") {
  CHECK(discounted_disagreement(1.0, 0, 0.3, 0.9) == doctest::Approx(0.9));
  CHECK(discounted_disagreement(0.0, 2, 0.4, 0.9) == doctest::Approx(0.72));

  SubscriptionGraph g(2);
  g.add(1, 0);
  std::vector<Opinion> ops{Opinion(0.5), Opinion(0.5)};
  RewireParams p;
  g.delta(1, 0) = 0.6;
  CHECK(update_disagreement(g, ops, 0, 1, 7, p) == doctest::Approx(0.54));
  ops = {Opinion(0.9), Opinion(-0.9)};
  g.delta(1, 0) = 0.0;
  // Distance across the boundary is 0.2.
  CHECK(update_disagreement(g, ops, 0, 1, 1, p) == doctest::Approx(0.18));
}

TEST_CASE("pure decay is exactly geometric") {
  SubscriptionGraph g(2);
  g.add(1, 0);
  const std::vector<Opinion> ops{Opinion(-0.3), Opinion(0.6)};
  RewireParams p;
  p.gamma = 0.9;
  const double d0 = 0.37;
  g.delta(1, 0) = d0;
  double expected = d0;
  for (int t = 1; t <= 60; ++t) {
    update_disagreement(g, ops, 0, 1, 0, p);
    expected *= p.gamma;
    REQUIRE(g.delta(1, 0) == expected);
  }
  CHECK(g.delta(1, 0) == doctest::Approx(d0 * std::pow(0.9, 60)));
}

TEST_CASE("rewire parameter validation") {
  RewireParams p;
  CHECK_NOTHROW(p.validate());
  p.gamma = 1.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.gamma = 0.5;
  p.tau = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("no break at or below the threshold") {
  SubscriptionGraph g(4);
  g.add(1, 0);
  g.add(2, 0);
  g.add(3, 1);
  g.delta(1, 0) = 0.5;
  g.delta(2, 0) = 0.1;
  RewireParams p;
  Rng rng(1);
  CHECK(prune_and_rewire(g, 0, p, rng).empty());
  CHECK(g.has(1, 0));
  CHECK(g.num_edges() == 3);
  CHECK(rng.draws() == 0);
}

TEST_CASE("five-node rewiring scenario") {
  // Reader 0 reads 1 and 2; 2 reads 3; 1 reads 4. Breaking with 1 leaves 3
  // as the only source of a remaining source.
  SubscriptionGraph g(5);
  g.add(1, 0);
  g.add(2, 0);
  g.add(3, 2);
  g.add(0, 2);
  g.add(4, 1);
  g.delta(1, 0) = 0.8;
  RewireParams p;
  Rng rng(3);
  const auto result = prune_and_rewire(g, 0, p, rng);
  REQUIRE(result.size() == 1);
  CHECK(result[0].removed == 1);
  CHECK(result[0].added == 3);
  CHECK_FALSE(result[0].fallback);
  CHECK(g.in_degree(0) == 2);
  CHECK(g.has(3, 0));
  CHECK_FALSE(g.has(1, 0));
  CHECK(g.delta(3, 0) == 0.0);
}

TEST_CASE("fallback and no-op cases") {
  // No second neighbors at all: a random non-neighbor replaces the source.
  SubscriptionGraph g(4);
  g.add(1, 0);
  g.delta(1, 0) = 1.0;
  RewireParams p;
  Rng rng(2);
  const auto r = prune_and_rewire(g, 0, p, rng);
  REQUIRE(r.size() == 1);
  CHECK(r[0].fallback);
  CHECK((r[0].added == 2 || r[0].added == 3));
  CHECK(g.in_degree(0) == 1);

  // Two nodes: nothing can change.
  SubscriptionGraph tiny(2);
  tiny.add(1, 0);
  tiny.delta(1, 0) = 2.0;
  CHECK(prune_and_rewire(tiny, 0, p, rng).empty());
  CHECK(tiny.has(1, 0));

  // Reader already follows everyone else except the dropped node: keep it.
  SubscriptionGraph full(3);
  full.add(1, 0);
  full.add(2, 0);
  full.delta(1, 0) = 0.9;
  CHECK(prune_and_rewire(full, 0, p, rng).empty());
  CHECK(full.has(1, 0));
  CHECK(full.delta(1, 0) == 0.9);
}

TEST_CASE("undirected second neighbors") {
  // 0 reads 1 and 3; 2 also reads 3, so 2 is a co-follower but not a source of a source.
  SubscriptionGraph g(4);
  g.add(1, 0);
  g.add(3, 0);
  g.add(3, 2);
  g.delta(1, 0) = 1.0;
  RewireParams p;
  Rng rng(5);
  auto read_mode = g;
  const auto r1 = prune_and_rewire(read_mode, 0, p, rng);
  REQUIRE(r1.size() == 1);
  CHECK(r1[0].fallback);
  CHECK(r1[0].added == 2);
  p.mode = SecondNeighborMode::undirected;
  const auto r2 = prune_and_rewire(g, 0, p, rng);
  REQUIRE(r2.size() == 1);
  CHECK(r2[0].added == 2);
  CHECK_FALSE(r2[0].fallback);
}

TEST_CASE("random rewiring preserves in-degree and leaves no stale breaks") {
  Rng rng(21);
  const std::size_t n = 60;
  SubscriptionGraph g(n);
  for (AgentId i = 0; i < n; ++i)
    for (int k = 0; k < 5; ++k) g.add(static_cast<AgentId>(rng.below(n)), i);
  std::vector<std::size_t> deg0(n);
  for (AgentId i = 0; i < n; ++i) deg0[i] = g.in_degree(i);
  RewireParams p;
  for (int day = 0; day < 30; ++day) {
    for (AgentId i = 0; i < n; ++i)
      for (auto& s : g.sources(i)) s.delta = rng.uniform();
    for (AgentId i = 0; i < n; ++i) {
      std::vector<AgentId> kept;
      for (const auto& s : g.sources(i))
        if (s.delta <= p.tau) kept.push_back(s.source);
      prune_and_rewire(g, i, p, rng);
      REQUIRE(g.in_degree(i) == deg0[i]);
      for (const auto& s : g.sources(i)) {
        REQUIRE(s.source != i);
        // Survivors of the pruning are under the threshold; new edges start at 0.
        if (s.delta > p.tau) REQUIRE(std::find(kept.begin(), kept.end(), s.source) == kept.end());
      }
    }
  }
  std::size_t edges = 0;
  for (AgentId i = 0; i < n; ++i) edges += g.in_degree(i);
  CHECK(edges == g.num_edges());
}

TEST_CASE("edge list IO") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto in = dir / "feedsim_edges.csv";
  {
    std::ofstream f(in);
    f << "src,dst\n0,1\n1,0\n2,1\n";
  }
  const auto g = SubscriptionGraph::load_edge_list(in, 5);
  CHECK(g.num_nodes() == 5);
  CHECK(g.num_edges() == 3);
  CHECK(g.has(2, 1));
  const auto snap = dir / "feedsim_snapshot.csv";
  g.write_snapshot(snap);
  std::ifstream s(snap);
  std::string header;
  std::getline(s, header);
  CHECK(header == "src,dst,delta");
  std::filesystem::remove(in);
  std::filesystem::remove(snap);
  CHECK_THROWS_AS(SubscriptionGraph::load_edge_list(dir / "feedsim_missing.csv"), IoError);
}
