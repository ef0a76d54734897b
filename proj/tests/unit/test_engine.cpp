#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "feedsim/engine.hpp"
#include "feedsim/errors.hpp"

using namespace feedsim;
namespace fs = std::filesystem;

namespace {

SimConfig small_config(const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j = {{"seed", 5}, {"horizon_days", 15}, {"policy", "Neg"}, {"population", {{"n", 300}, {"m", 3}}}};
  j.merge_patch(extra);
  return parse_config(j);
}

AgentTraits agent(double opinion, double pub, double share, double nu = 0.0) {
  AgentTraits a;
  a.opinion0 = Opinion(opinion);
  a.pub_scale = pub;
  a.share_scale = share;
  a.intrinsic_negativity = nu;
  a.neg_bias = 1.0;
  return a;
}

std::string metrics_text(const Simulation& sim, std::vector<MetricRow>& rows) {
  const auto day = sim.metrics(true);
  rows.insert(rows.end(), day.begin(), day.end());
  std::ostringstream out;
  write_metrics_csv(out, "r", rows, true);
  return out.str();
}

std::string run_and_dump(SimConfig cfg, int days) {
  Simulation sim(std::move(cfg));
  std::vector<MetricRow> rows;
  std::string text;
  sim.on_step([&](const Simulation& s) { text = metrics_text(s, rows); });
  sim.run(days);
  return text;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("feedsim_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("two agents: aligned neutral messages are always retweeted") {
  auto cfg = small_config({{"read_base_prob", 1.0}, {"policy", "Chrono"}});
  Population pop;
  pop.agents = {agent(0.3, 3.0, 0.0), agent(0.3, 0.0, 4.0)};
  pop.graph = SubscriptionGraph(2);
  pop.graph.add(0, 1);
  pop.graph.add(1, 0);
  Simulation sim(cfg, pop, 123);
  long published_prev = 0;
  long total_retweets = 0;
  for (int d = 0; d < 30; ++d) {
    sim.step();
    const auto& b = sim.last_day()[1];
    // Everything in B's pool is A's yesterday output; each item is read and retweeted until the budget runs out.
    CHECK(b.impressions == std::min(b.budget, published_prev));
    CHECK(b.reads == b.impressions);
    CHECK(b.retweets == b.impressions);
    CHECK(b.opinion_updates == b.retweets);
    CHECK(sim.last_day()[0].retweets == 0);
    total_retweets += b.retweets;
    published_prev = sim.last_day()[0].publications;
  }
  REQUIRE(total_retweets > 0);
  CHECK(sim.opinions()[1].value() == doctest::Approx(0.3).epsilon(1e-15));
  const auto rg = sim.retweet_graph();
  REQUIRE(rg.edges().size() == 1);
  CHECK(rg.edges()[0].src == 1);
  CHECK(rg.edges()[0].dst == 0);
  CHECK(rg.edges()[0].weight == static_cast<double>(total_retweets));
}

TEST_CASE("zero budgets: no impressions and pure geometric decay") {
  auto cfg = small_config({{"rewire", {{"tau", 10.0}}}});
  Population pop;
  for (int i = 0; i < 4; ++i) pop.agents.push_back(agent(0.2 * i, 2.0, 0.0, 0.5));
  pop.graph = SubscriptionGraph(4);
  for (AgentId i = 0; i < 4; ++i)
    for (AgentId j = 0; j < 4; ++j)
      if (i != j) {
        pop.graph.add(i, j);
        pop.graph.delta(i, j) = 0.1 * (i + 1) + 0.01 * j;
      }
  const auto g0 = pop.graph;
  Simulation sim(cfg, pop, 9);
  double factor = 1.0;
  for (int d = 0; d < 20; ++d) {
    sim.step();
    factor *= cfg.rewire.gamma;
    CHECK(sim.last_totals().impressions == 0);
    CHECK(sim.last_totals().retweets == 0);
    for (AgentId i = 0; i < 4; ++i) {
      REQUIRE(sim.opinions()[i] == pop.agents[i].opinion0);
      for (const auto& s : g0.sources(i)) {
        double expected = s.delta;
        for (int k = 0; k <= d; ++k) expected *= cfg.rewire.gamma;
        REQUIRE(sim.graph().delta(s.source, i) == expected);
      }
    }
  }
  CHECK(sim.cumulative_totals().published > 0);
}

TEST_CASE("dynamics laws over a full reference run") {
  auto cfg = parse_config({{"seed", 20240601}, {"horizon_days", 60}, {"policy", "PopNeg"},
                           {"population", {{"n", 2000}, {"m", 3}}}});
  Simulation sim(cfg);
  const auto deg0 = sim.initial_in_degree();
  REQUIRE(deg0.size() == 2000);
  std::uint64_t retweets = 0, updates = 0;
  int days = 0;
  bool laws = true;
  sim.on_step([&](const Simulation& s) {
    ++days;
    for (AgentId i = 0; i < 2000; ++i) {
      const auto& a = s.last_day()[i];
      laws &= s.graph().in_degree(i) == deg0[i];
      laws &= a.retweets <= a.budget;
      laws &= a.retweets <= a.reads && a.reads <= a.impressions;
      laws &= a.opinion_updates == a.retweets;
      retweets += static_cast<std::uint64_t>(a.retweets);
      updates += static_cast<std::uint64_t>(a.opinion_updates);
    }
    for (AgentId i = 0; i < 2000; ++i)
      for (const auto& sub : s.graph().sources(i)) laws &= sub.source != i && sub.delta <= s.config().rewire.tau;
  });
  sim.run(60);
  CHECK(days == 60);
  CHECK(laws);
  CHECK(retweets == updates);
  CHECK(retweets == sim.cumulative_totals().retweets);
  CHECK(retweets == sim.store().retweets().size());
  CHECK(sim.cumulative_totals().rewires > 0);
  CHECK(sim.predictor() != nullptr);
  CHECK(sim.predictor()->trained());
}

TEST_CASE("unbiased chronological feeds are neutral") {
  auto cfg = small_config({{"policy", "Chrono"},
                           {"horizon_days", 40},
                           {"population", {{"n", 1000}, {"traits", {{"neg_bias", 1.0}}}}}});
  Simulation sim(cfg);
  sim.run(40);
  const auto exposure = sim.exposure();
  ExposureCounts pooled;
  std::size_t checked = 0;
  for (const auto& c : exposure) {
    pooled += c;
    // Per reader the impressions are a valence-blind prefix of the pool, so
    // the perceived share only carries sampling noise around the real one.
    if (c.impressions >= 200 && c.negative_pool > 0) {
      const double p = static_cast<double>(c.negative_pool) / static_cast<double>(c.pool);
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(c.impressions));
      const double perceived = static_cast<double>(c.negative_impressions) / static_cast<double>(c.impressions);
      REQUIRE(std::abs(perceived - p) <= 5.0 * se);
      ++checked;
    }
  }
  CHECK(checked > 50);
  CHECK(*gamma_overexposure(pooled) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("no negative content leaves overexposure undefined") {
  auto cfg = small_config({{"population", {{"traits", {{"intrinsic_negativity", 0.0}}}}}});
  Simulation sim(cfg);
  sim.run(5);
  const auto g = sim.gamma();
  CHECK(g.defined == 0);
  CHECK(g.no_negative_pool + g.no_impressions == sim.num_agents());
  CHECK(std::isnan(g.mean));
}

TEST_CASE("identical seeds give identical metrics, across thread counts") {
  const auto a = run_and_dump(small_config(), 12);
  const auto b = run_and_dump(small_config(), 12);
  const auto c = run_and_dump(small_config({{"threads", 3}}), 12);
  CHECK(a == b);
  CHECK(a == c);
  CHECK(a != run_and_dump(small_config({{"seed", 6}}), 12));
  for (const char* policy : {"Chrono", "Pop", "PopNeg"}) {
    CHECK(run_and_dump(small_config({{"policy", policy}}), 8) ==
          run_and_dump(small_config({{"policy", policy}, {"threads", 2}}), 8));
  }
}

TEST_CASE("checkpoint resume matches an uninterrupted run") {
  for (const char* policy : {"Chrono", "PopNeg"}) {
    auto cfg = small_config({{"policy", policy}});
    Simulation full(cfg);
    full.run(8);
    std::stringstream blob;
    full.save_checkpoint(blob);
    full.run(6);

    auto resumed = Simulation::load_checkpoint(blob, cfg);
    CHECK(resumed.day() == 8);
    resumed.run(6);
    std::vector<MetricRow> r1, r2;
    CHECK(metrics_text(full, r1) == metrics_text(resumed, r2));
    for (std::size_t i = 0; i < full.num_agents(); ++i) REQUIRE(full.opinions()[i] == resumed.opinions()[i]);
    CHECK(full.rng_accounting().draws == resumed.rng_accounting().draws);
  }
  // A checkpoint refuses a different configuration.
  auto cfg = small_config();
  Simulation sim(cfg);
  sim.run(1);
  std::stringstream blob;
  sim.save_checkpoint(blob);
  CHECK_THROWS_AS(Simulation::load_checkpoint(blob, small_config({{"read_base_prob", 0.4}})), ConfigError);
  std::stringstream junk("not a checkpoint");
  CHECK_THROWS_AS(Simulation::load_checkpoint(junk, cfg), IoError);
}

TEST_CASE("start-of-day opinion variant") {
  auto cfg = small_config({{"opinion_update", "start_of_day"}, {"horizon_days", 6}});
  Simulation sim(cfg);
  std::uint64_t updates = 0;
  sim.on_step([&](const Simulation& s) {
    for (const auto& a : s.last_day()) {
      REQUIRE(a.opinion_updates == a.retweets);
      updates += static_cast<std::uint64_t>(a.opinion_updates);
    }
  });
  sim.run(6);
  CHECK(updates == sim.cumulative_totals().retweets);
  CHECK(run_and_dump(cfg, 6) != run_and_dump(small_config({{"horizon_days", 6}}), 6));
}

TEST_CASE("feed cap bounds impressions") {
  auto cfg = small_config({{"feed_cap", 3}});
  Simulation sim(cfg);
  sim.on_step([](const Simulation& s) {
    for (const auto& a : s.last_day()) REQUIRE(a.impressions <= 3);
  });
  sim.run(5);
}

TEST_CASE("metric rows") {
  auto cfg = small_config();
  Simulation sim(cfg);
  sim.run(3);
  const auto rows = sim.metrics(true);
  auto find = [&](const std::string& metric, const std::string& scope) -> const MetricRow* {
    for (const auto& r : rows)
      if (r.metric == metric && r.scope == scope) return &r;
    return nullptr;
  };
  for (const char* m : {"published", "impressions", "reads", "retweets", "opinion_updates", "rewires"})
    CHECK(find(m, "day") != nullptr);
  REQUIRE(find("follow_edges", "graph") != nullptr);
  CHECK(find("follow_edges", "graph")->value == static_cast<double>(sim.graph().num_edges()));
  CHECK(find("gamma_mean", "window") != nullptr);
  CHECK(find("modularity", "retweet_graph") != nullptr);
  CHECK(find("modularity", "follow_graph") != nullptr);
  CHECK(find("sigma_opinion_inter", "retweet_graph") != nullptr);
  CHECK(find("social_power_ratio", "nu_0-0.25") != nullptr);
  CHECK(find("predictor_trained", "model")->value == 1.0);
  for (const auto& r : rows) CHECK(r.day == sim.day());
  const auto light = sim.metrics(false);
  for (const auto& r : light) CHECK(r.scope != "retweet_graph");

  const auto s = sim.summary();
  CHECK(s["days_completed"] == 3);
  CHECK(s["policy"] == "Neg");
  CHECK(s["metrics"].contains("gamma_mean"));
}

TEST_CASE("run artifacts") {
  const auto out = scratch("artifacts");
  auto cfg = small_config({{"horizon_days", 4}, {"output", {{"snapshot_interval", 2}, {"message_log", true}}}});
  const auto r = run_simulation(cfg, {out, "", std::nullopt, std::nullopt});
  CHECK(r.dir == out / run_id(cfg));
  for (const char* f : {"metrics.csv", "summary.json", "gamma_per_agent.csv", "checkpoint.bin", "run.log", "messages.csv"})
    CHECK(fs::exists(r.dir / f));
  CHECK(fs::exists(r.dir / "snapshots" / "follow_day2.csv"));
  CHECK(r.summary["status"] == "complete");
  CHECK(slurp(r.dir / "run.log").find("wall_seconds") != std::string::npos);
  CHECK(slurp(r.dir / "run.log").find("rng_draws.reading") != std::string::npos);
  const auto csv = slurp(r.dir / "metrics.csv");
  CHECK(csv.rfind("run,day,metric,scope,value\n", 0) == 0);

  // Same config again: byte-identical outputs apart from the log.
  const auto out2 = scratch("artifacts2");
  const auto r2 = run_simulation(cfg, {out2, "", std::nullopt, std::nullopt});
  for (const char* f : {"metrics.csv", "summary.json", "gamma_per_agent.csv", "checkpoint.bin", "messages.csv"})
    CHECK(slurp(r.dir / f) == slurp(r2.dir / f));

  // Horizon 0: initial-state rows only.
  const auto out3 = scratch("horizon0");
  const auto r3 = run_simulation(small_config({{"horizon_days", 0}}), {out3, "", std::nullopt, std::nullopt});
  std::istringstream lines(slurp(r3.dir / "metrics.csv"));
  std::string line;
  std::getline(lines, line);
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    ++count;
    REQUIRE(line.find(",0,") != std::string::npos);
  }
  CHECK(count > 0);
  CHECK(r3.summary["days_completed"] == 0);
  fs::remove_all(out);
  fs::remove_all(out2);
  fs::remove_all(out3);
}

TEST_CASE("missing graph file is an IO error naming the path") {
  auto cfg = small_config({{"population", {{"graph_file", "/nonexistent/edges.csv"}}}});
  try {
    make_population(cfg);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/edges.csv") != std::string::npos);
  }
}
