#include "feedsim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "feedsim/csv.hpp"
#include "feedsim/errors.hpp"

namespace feedsim {

struct Simulation::ReaderResult {
  std::vector<FeedItem> candidates;
  std::vector<FeatureRow> features;
  std::vector<ImpressionRecord> impressions;
  std::vector<AgentId> relayers;  // parallel to impressions
  std::vector<FeedItem> retweets;
  std::vector<MessageId> newly_read;
  std::vector<std::pair<AgentId, long>> reads_from;  // sorted by relayer
  ExposureCounts exposure;
  Opinion opinion;
  long reads = 0;
  long opinion_updates = 0;
  std::uint64_t reading_draws = 0;
  std::uint64_t engagement_draws = 0;
};

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [0, n) over a static partition. The first failure
/// (lowest index) is reported as (index, message).
template <class Fn>
std::optional<std::pair<std::size_t, std::string>> parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::optional<std::pair<std::size_t, std::string>> failure;
  std::mutex mu;
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failure || i < failure->first) failure = std::make_pair(i, std::string(e.what()));
        return;
      }
    }
  };
  const auto k = static_cast<std::size_t>(std::max(1, threads));
  if (k == 1 || n < 2 * k) {
    work(0, n);
    return failure;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + k - 1) / k;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t lo = c * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(work, lo, hi);
  }
  for (auto& th : pool) th.join();
  return failure;
}

std::string number_text(double v) { return format_double(v); }

}  // namespace

Population make_population(const SimConfig& config) {
  const auto seed = config.master_seed();
  if (config.graph_file) {
    return population_from_graph(SubscriptionGraph::load_edge_list(*config.graph_file), config.population.traits,
                                 seed);
  }
  return generate_population(config.population, seed);
}

Simulation::Simulation(SimConfig config) {
  config_ = std::move(config);
  Population pop = make_population(config_);
  traits_ = std::move(pop.agents);
  graph_ = std::move(pop.graph);
  seed_ = config_.master_seed();
  init_common();
}

void Simulation::open_message_log(const std::filesystem::path& path) {
  log_ = std::make_unique<MessageLog>(path);
  if (!log_->is_open()) throw IoError("cannot write " + path.string());
}

Simulation::Simulation(SimConfig config, Population population, std::uint64_t dynamics_seed) {
  config_ = std::move(config);
  traits_ = std::move(population.agents);
  graph_ = std::move(population.graph);
  seed_ = dynamics_seed;
  if (graph_.num_nodes() != traits_.size()) throw ConfigError("population graph and traits disagree in size");
  init_common();
}

Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;
Simulation::~Simulation() = default;

void Simulation::init_common() {
  const std::size_t n = traits_.size();
  opinions_.resize(n);
  for (std::size_t i = 0; i < n; ++i) opinions_[i] = traits_[i].opinion0;
  store_ = MessageStore(n);
  history_ = EngagementHistory(n);
  window_ = TrainingWindow(config_.predictor.window_days, config_.predictor.max_records);
  predictor_ = make_predictor(config_.policy, config_.predictor.learner);
  read_.assign(n, {});
  exposure_total_.assign(n, {});
  exposure_days_.clear();
  in_degree0_.resize(n);
  for (std::size_t i = 0; i < n; ++i) in_degree0_[i] = graph_.in_degree(static_cast<AgentId>(i));
  agent_day_.assign(n, {});
}

void Simulation::scroll(AgentId reader, Day t, const std::vector<std::uint32_t>& budgets, ReaderResult& out) const {
  const AgentTraits& me = traits_[reader];
  store_.collect_candidates(reader, t, graph_, out.candidates);
  const auto& cands = out.candidates;
  out.exposure = {};
  out.exposure.pool = cands.size();
  for (const auto& c : cands) {
    if (store_.message(c.message).negative()) ++out.exposure.negative_pool;
  }
  out.opinion = opinions_[reader];
  const long budget = budgets[reader];
  if (budget == 0 || cands.empty()) return;

  out.features.resize(cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) {
    // Chrono never trains, so its impressions carry no features.
    if (predictor_) out.features[k] = extract_features(reader, cands[k], t, history_, store_).row();
  }
  auto order = rank_order(config_.policy, predictor_.get(), cands, out.features, store_);
  if (config_.feed_cap && order.size() > *config_.feed_cap) order.resize(*config_.feed_cap);

  Rng reading = make_rng(seed_, Stream::reading, static_cast<std::uint64_t>(t), reader);
  Rng engagement = make_rng(seed_, Stream::engagement, static_cast<std::uint64_t>(t), reader);
  const Opinion start = opinions_[reader];
  const bool immediate = config_.opinion_update == OpinionUpdate::immediate;
  std::vector<Opinion> pending;
  long retweeted = 0;
  const auto& seen = read_[reader];

  for (const std::size_t k : order) {
    if (retweeted >= budget) break;
    const FeedItem& item = cands[k];
    const Message& m = store_.message(item.message);
    ImpressionRecord rec;
    rec.t = t;
    rec.reader = reader;
    rec.message = m.id;
    rec.features = out.features[k];
    ++out.exposure.impressions;
    if (m.negative()) ++out.exposure.negative_impressions;

    const bool duplicate = seen.contains(m.id) ||
                           std::find(out.newly_read.begin(), out.newly_read.end(), m.id) != out.newly_read.end();
    if (!duplicate) {
      const double p_read = std::min(1.0, config_.read_base_prob * (m.negative() ? me.neg_bias : 1.0));
      if (reading.bernoulli(p_read)) {
        rec.was_read = true;
        ++out.reads;
        out.newly_read.push_back(m.id);
        auto it = std::lower_bound(out.reads_from.begin(), out.reads_from.end(), item.relayer,
                                   [](const auto& p, AgentId id) { return p.first < id; });
        if (it == out.reads_from.end() || it->first != item.relayer) it = out.reads_from.insert(it, {item.relayer, 0});
        ++it->second;

        const Opinion judge = immediate ? out.opinion : start;
        const double delta = signed_delta(m.author_opinion, judge);
        if (engagement.bernoulli(engagement_prob(me.acceptance, delta))) {
          rec.was_retweeted = true;
          ++retweeted;
          out.retweets.push_back(item);
          if (immediate) {
            out.opinion = update_opinion(out.opinion, m.author_opinion, me.lambda);
          } else {
            pending.push_back(m.author_opinion);
          }
        }
      }
    }
    out.impressions.push_back(rec);
    out.relayers.push_back(item.relayer);
  }
  for (const Opinion author : pending) out.opinion = update_opinion(out.opinion, author, me.lambda);
  out.opinion_updates = retweeted;
  out.reading_draws = reading.draws();
  out.engagement_draws = engagement.draws();
}

void Simulation::step() {
  const Day t = day_;
  const std::size_t n = traits_.size();
  agent_day_.assign(n, {});
  totals_ = {};
  const auto tt = static_cast<std::uint64_t>(t);

  // (1) activity draws and publication
  std::vector<std::uint32_t> budgets(n);
  const auto first_today = static_cast<MessageId>(store_.messages().size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<AgentId>(i);
    try {
      Rng activity = make_rng(seed_, Stream::activity, tt, i);
      const long np = sample_daily_count(traits_[i].pub_scale, activity);
      const long ns = sample_daily_count(traits_[i].share_scale, activity);
      rng_.add(Stream::activity, activity);
      budgets[i] = static_cast<std::uint32_t>(std::min<long>(ns, std::numeric_limits<std::uint32_t>::max()));
      agent_day_[i].budget = ns;
      agent_day_[i].publications = np;
      Rng valence = make_rng(seed_, Stream::valence, tt, i);
      for (long k = 0; k < np; ++k) {
        const Message& m = store_.publish(id, opinions_[i], traits_[i].intrinsic_negativity, t, valence);
        if (log_) log_->publish(t, m);
      }
      rng_.add(Stream::valence, valence);
      totals_.published += static_cast<std::uint64_t>(np);
    } catch (const std::exception& e) {
      throw SimulationError(t, "publish", static_cast<std::int64_t>(i), e.what());
    }
  }

  // (2)-(3) ranking and scrolling, independent per reader
  std::vector<ReaderResult> results(n);
  if (auto failure = parallel_for(n, resolve_threads(config_.threads), [&](std::size_t i) {
        scroll(static_cast<AgentId>(i), t, budgets, results[i]);
      })) {
    throw SimulationError(t, "scroll", static_cast<std::int64_t>(failure->first), failure->second);
  }

  // (4) apply retweets in agent-id order and deliver
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<AgentId>(i);
    auto& r = results[i];
    try {
      for (std::size_t k = 0; k < r.impressions.size(); ++k) {
        const auto& rec = r.impressions[k];
        const Message& m = store_.message(rec.message);
        history_.record_impression(id, m.author, t);
        if (log_) {
          log_->event(t, m, r.relayers[k], id, rec.was_retweeted ? "retweet" : rec.was_read ? "read" : "impression");
        }
      }
      for (const auto& item : r.retweets) {
        if (!store_.retweet(id, item, t)) throw std::logic_error("retweet rejected");
        const Message& m = store_.message(item.message);
        history_.record_retweet(id, m, t);
        history_.record_retweet_received(m.author);
      }
      opinions_[i] = r.opinion;
      read_[i].insert(r.newly_read.begin(), r.newly_read.end());
    } catch (const std::exception& e) {
      throw SimulationError(t, "deliver", static_cast<std::int64_t>(i), e.what());
    }
    auto& ad = agent_day_[i];
    ad.impressions = static_cast<long>(r.impressions.size());
    ad.reads = r.reads;
    ad.retweets = static_cast<long>(r.retweets.size());
    ad.opinion_updates = r.opinion_updates;
    totals_.impressions += r.impressions.size();
    totals_.reads += static_cast<std::uint64_t>(r.reads);
    totals_.retweets += r.retweets.size();
    totals_.opinion_updates += static_cast<std::uint64_t>(r.opinion_updates);
    rng_.add(Stream::reading, r.reading_draws);
    rng_.add(Stream::engagement, r.engagement_draws);
  }
  for (auto id = first_today; id < store_.messages().size(); ++id) {
    if (store_.message(id).t_pub == t) history_.record_publication(store_.message(id).author);
  }
  store_.end_day();

  // (5) disagreement, with neighbors' current opinions
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<AgentId>(i);
    const auto& reads = results[i].reads_from;
    std::vector<AgentId> sources;
    for (const auto& s : graph_.sources(id)) sources.push_back(s.source);
    try {
      for (const AgentId src : sources) {
        auto it = std::lower_bound(reads.begin(), reads.end(), src,
                                   [](const auto& p, AgentId a) { return p.first < a; });
        const long count = it != reads.end() && it->first == src ? it->second : 0;
        update_disagreement(graph_, opinions_, id, src, count, config_.rewire);
      }
    } catch (const std::exception& e) {
      throw SimulationError(t, "disagreement", static_cast<std::int64_t>(i), e.what());
    }
  }

  // (6) unfollow and rewire, ascending agent id
  for (std::size_t i = 0; i < n; ++i) {
    try {
      Rng rewiring = make_rng(seed_, Stream::rewiring, tt, i);
      const auto changes = prune_and_rewire(graph_, static_cast<AgentId>(i), config_.rewire, rewiring);
      rng_.add(Stream::rewiring, rewiring);
      totals_.rewires += changes.size();
      for (const auto& c : changes) totals_.rewire_fallbacks += c.fallback ? 1 : 0;
    } catch (const std::exception& e) {
      throw SimulationError(t, "rewire", static_cast<std::int64_t>(i), e.what());
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (graph_.in_degree(static_cast<AgentId>(i)) != in_degree0_[i]) {
      throw SimulationError(t, "rewire", static_cast<std::int64_t>(i), "in-degree not conserved");
    }
  }

  // (7) training log and daily retraining
  std::vector<ExposureCounts> today(n);
  std::vector<ImpressionRecord> records;
  records.reserve(totals_.impressions);
  for (std::size_t i = 0; i < n; ++i) {
    today[i] = results[i].exposure;
    std::move(results[i].impressions.begin(), results[i].impressions.end(), std::back_inserter(records));
  }
  results.clear();
  if (predictor_) {
    try {
      window_.append_day(t, std::move(records));
      Rng learner = make_rng(seed_, Stream::learner, tt);
      std::vector<FeatureRow> rows;
      std::vector<std::uint8_t> labels;
      window_.training_set(learner, rows, labels);
      predictor_->fit(rows, labels);
      rng_.add(Stream::learner, learner);
    } catch (const std::exception& e) {
      throw SimulationError(t, "train", -1, e.what());
    }
  }
  if (config_.analysis.window_days == 0) {
    for (std::size_t i = 0; i < n; ++i) exposure_total_[i] += today[i];
  } else {
    exposure_days_.push_back(std::move(today));
    while (exposure_days_.size() > static_cast<std::size_t>(config_.analysis.window_days)) exposure_days_.pop_front();
  }

  cumulative_.published += totals_.published;
  cumulative_.impressions += totals_.impressions;
  cumulative_.reads += totals_.reads;
  cumulative_.retweets += totals_.retweets;
  cumulative_.opinion_updates += totals_.opinion_updates;
  cumulative_.rewires += totals_.rewires;
  cumulative_.rewire_fallbacks += totals_.rewire_fallbacks;

  // (8) the clock advances; observers emit metrics and snapshots
  day_ = t + 1;
  if (log_) log_->flush();
  if (observer_) observer_(*this);
}

void Simulation::run(int days) {
  for (int d = 0; d < days; ++d) step();
}

std::vector<ExposureCounts> Simulation::exposure() const {
  if (config_.analysis.window_days == 0) return exposure_total_;
  std::vector<ExposureCounts> out(traits_.size());
  for (const auto& day : exposure_days_) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += day[i];
  }
  return out;
}

GammaSummary Simulation::gamma() const { return summarize_gamma(exposure()); }

WeightedDigraph Simulation::retweet_graph() const {
  const Day first = config_.analysis.window_days == 0 ? 0 : day_ - config_.analysis.window_days;
  std::vector<WeightedEdge> edges;
  for (const auto& ev : store_.retweets()) {
    if (ev.t >= first) edges.push_back({ev.retweeter, ev.author, 1.0});
  }
  return WeightedDigraph(traits_.size(), std::move(edges));
}

WeightedDigraph Simulation::follow_graph() const {
  std::vector<WeightedEdge> edges;
  edges.reserve(graph_.num_edges());
  for (std::size_t i = 0; i < traits_.size(); ++i) {
    for (const auto& s : graph_.sources(static_cast<AgentId>(i))) {
      edges.push_back({static_cast<std::uint32_t>(i), s.source, 1.0});
    }
  }
  return WeightedDigraph(traits_.size(), std::move(edges));
}

namespace {

void community_rows(const WeightedDigraph& g, const std::string& scope, std::uint64_t seed, const AnalysisConfig& an,
                    const std::vector<double>& opinion, const std::vector<double>& negativity, Day day,
                    std::vector<MetricRow>& rows) {
  if (!(g.total_weight() > 0.0)) return;
  LeidenOptions opt;
  opt.resolution = an.resolution;
  opt.restarts = an.leiden_restarts;
  const Partition part = detect_communities(g, seed, opt);
  rows.push_back({day, "modularity", scope, directed_modularity(g, part, an.resolution)});

  // Diversity is measured over agents that take part in the graph.
  std::vector<char> active(g.num_nodes(), 0);
  for (const auto& e : g.edges()) active[e.src] = active[e.dst] = 1;
  Partition sub;
  std::vector<double> op;
  std::vector<double> neg;
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    if (!active[i]) continue;
    sub.push_back(part[i]);
    op.push_back(opinion[i]);
    neg.push_back(negativity[i]);
  }
  sub = canonical_partition(sub);
  rows.push_back({day, "communities", scope, static_cast<double>(community_count(sub))});
  rows.push_back({day, "active_agents", scope, static_cast<double>(sub.size())});
  auto put = [&](const char* name, std::optional<double> v) {
    if (v) rows.push_back({day, name, scope, *v});
  };
  put("sigma_opinion_intra", diversity_intra(op, sub, true));
  put("sigma_opinion_inter", diversity_inter(op, sub, true));
  put("sigma_negativity_intra", diversity_intra(neg, sub, false));
  put("sigma_negativity_inter", diversity_inter(neg, sub, false));
}

}  // namespace

std::vector<MetricRow> Simulation::metrics(bool with_communities) const {
  std::vector<MetricRow> rows;
  const Day d = day_;
  const auto& tot = totals_;
  rows.push_back({d, "published", "day", static_cast<double>(tot.published)});
  rows.push_back({d, "impressions", "day", static_cast<double>(tot.impressions)});
  rows.push_back({d, "reads", "day", static_cast<double>(tot.reads)});
  rows.push_back({d, "retweets", "day", static_cast<double>(tot.retweets)});
  rows.push_back({d, "opinion_updates", "day", static_cast<double>(tot.opinion_updates)});
  rows.push_back({d, "rewires", "day", static_cast<double>(tot.rewires)});
  rows.push_back({d, "rewire_fallbacks", "day", static_cast<double>(tot.rewire_fallbacks)});
  rows.push_back({d, "follow_edges", "graph", static_cast<double>(graph_.num_edges())});

  std::vector<double> op(opinions_.size());
  for (std::size_t i = 0; i < op.size(); ++i) op[i] = opinions_[i].value();
  if (!op.empty()) {
    rows.push_back({d, "opinion_mean", "population", circular_mean(op)});
    rows.push_back({d, "opinion_std", "population", circular_std(op)});
  }

  const auto g = gamma();
  if (g.defined > 0) {
    rows.push_back({d, "gamma_mean", "window", g.mean});
    rows.push_back({d, "gamma_std", "window", g.std});
  }
  rows.push_back({d, "gamma_defined", "window", static_cast<double>(g.defined)});
  rows.push_back({d, "gamma_undefined_no_impressions", "window", static_cast<double>(g.no_impressions)});
  rows.push_back({d, "gamma_undefined_no_negative_pool", "window", static_cast<double>(g.no_negative_pool)});
  rows.push_back({d, "predictor_trained", "model", predictor_ && predictor_->trained() ? 1.0 : 0.0});

  if (with_communities) {
    std::vector<double> neg(traits_.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = traits_[i].intrinsic_negativity;
    const auto an_seed = derive_seed(seed_, Stream::analysis, static_cast<std::uint64_t>(d));
    community_rows(retweet_graph(), "retweet_graph", an_seed, config_.analysis, op, neg, d, rows);
    community_rows(follow_graph(), "follow_graph", an_seed, config_.analysis, op, neg, d, rows);

    // Social power over the analysis window.
    const Day first = config_.analysis.window_days == 0 ? 0 : d - config_.analysis.window_days;
    std::vector<std::uint64_t> published(traits_.size(), 0);
    std::vector<std::uint64_t> received(traits_.size(), 0);
    for (const auto& m : store_.messages()) {
      if (m.t_pub >= first) ++published[m.author];
    }
    for (const auto& ev : store_.retweets()) {
      if (ev.t >= first) ++received[ev.author];
    }
    const auto report = social_power_report(published, received, neg, config_.analysis.top_quantile);
    rows.push_back({d, "social_power_eligible", "window", static_cast<double>(report.eligible)});
    rows.push_back({d, "social_power_top_size", "window", static_cast<double>(report.top_size)});
    for (const auto& r : report.rows) {
      const std::string scope = "nu_" + r.bin.label;
      rows.push_back({d, "social_power_population_share", scope, r.population_share});
      rows.push_back({d, "social_power_top_share", scope, r.top_share});
      if (r.ratio) rows.push_back({d, "social_power_ratio", scope, *r.ratio});
    }
  }
  return rows;
}

nlohmann::json Simulation::summary() const {
  nlohmann::json j;
  j["policy"] = std::string(to_string(config_.policy));
  j["master_seed"] = config_.seed ? nlohmann::json(*config_.seed) : nlohmann::json();
  j["dynamics_seed"] = seed_;
  j["config_hash"] = config_hash(config_.tree);
  j["agents"] = traits_.size();
  j["days_completed"] = day_;
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& r : this->metrics(true)) metrics[r.metric][r.scope] = r.value;
  j["metrics"] = metrics;
  const auto& c = cumulative_;
  j["totals"] = {{"published", c.published},   {"impressions", c.impressions},
                 {"reads", c.reads},           {"retweets", c.retweets},
                 {"opinion_updates", c.opinion_updates}, {"rewires", c.rewires},
                 {"rewire_fallbacks", c.rewire_fallbacks}};
  nlohmann::json draws = nlohmann::json::object();
  for (std::size_t s = 0; s < kStreamCount; ++s) {
    draws[std::string(stream_name(static_cast<Stream>(s)))] = rng_.draws[s];
  }
  j["rng_draws"] = draws;
  return j;
}

void write_metrics_csv(std::ostream& out, const std::string& run, const std::vector<MetricRow>& rows, bool header) {
  if (header) out << "run,day,metric,scope,value\n";
  for (const auto& r : rows) {
    out << run << ',' << r.day << ',' << r.metric << ',' << r.scope << ',' << number_text(r.value) << '\n';
  }
}

std::string run_id(const SimConfig& config, const std::string& suffix) {
  return config_hash(config.tree) + "_s" + std::to_string(config.master_seed()) + suffix;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

RunResult run_simulation(const SimConfig& config, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  result.run_id = run_id(config, options.run_suffix);
  result.dir = options.out_root / result.run_id;
  std::error_code ec;
  std::filesystem::create_directories(result.dir, ec);
  if (ec) throw IoError("cannot create run directory " + result.dir.string() + ": " + ec.message());

  const auto metrics_path = result.dir / "metrics.csv";
  std::ofstream metrics(metrics_path, std::ios::binary);
  if (!metrics) throw IoError("cannot write " + metrics_path.string());
  const auto& out_cfg = config.output;
  const int horizon = config.horizon_days;

  auto write_summary = [&](nlohmann::json summary, const std::string& status, const std::string& error) {
    summary["run"] = result.run_id;
    summary["status"] = status;
    summary["horizon_days"] = horizon;
    if (!error.empty()) summary["error"] = error;
    write_file(result.dir / "summary.json", summary.dump(2) + "\n");
    return summary;
  };

  std::optional<Simulation> sim;
  if (options.population || options.dynamics_seed) {
    sim.emplace(config, options.population ? *options.population : make_population(config),
                options.dynamics_seed.value_or(config.master_seed()));
  } else {
    sim.emplace(config);
  }
  if (out_cfg.message_log) sim->open_message_log(result.dir / "messages.csv");

  auto emit = [&](const Simulation& s) {
    const Day d = s.day();
    const bool final_day = d == horizon;
    const int ci = config.analysis.community_interval;
    const bool communities = final_day || (ci > 0 && d % ci == 0);
    if (final_day || d % out_cfg.metrics_interval == 0 || communities) {
      write_metrics_csv(metrics, result.run_id, s.metrics(communities), false);
    }
    if (out_cfg.snapshot_interval > 0 && (d % out_cfg.snapshot_interval == 0 || final_day)) {
      const auto dir = result.dir / "snapshots";
      std::filesystem::create_directories(dir);
      s.graph().write_snapshot(dir / ("follow_day" + std::to_string(d) + ".csv"));
    }
  };

  try {
    metrics << "run,day,metric,scope,value\n";
    emit(*sim);
    sim->on_step(emit);
    sim->run(horizon);
    metrics.flush();
    if (!metrics) throw IoError("write failed for " + metrics_path.string());

    if (out_cfg.gamma_per_agent) {
      std::ofstream g(result.dir / "gamma_per_agent.csv", std::ios::binary);
      if (!g) throw IoError("cannot write " + (result.dir / "gamma_per_agent.csv").string());
      g << "agent,impressions,negative_impressions,pool,negative_pool,gamma\n";
      const auto exposure = sim->exposure();
      for (std::size_t i = 0; i < exposure.size(); ++i) {
        const auto& e = exposure[i];
        const auto v = gamma_overexposure(e);
        g << i << ',' << e.impressions << ',' << e.negative_impressions << ',' << e.pool << ',' << e.negative_pool
          << ',' << (v ? format_double(*v) : std::string()) << '\n';
      }
    }
    if (out_cfg.checkpoint) {
      std::ofstream cp(result.dir / "checkpoint.bin", std::ios::binary);
      if (!cp) throw IoError("cannot write " + (result.dir / "checkpoint.bin").string());
      sim->save_checkpoint(cp);
    }
    result.summary = write_summary(sim->summary(), "complete", "");
  } catch (const std::exception& e) {
    metrics.flush();
    try {
      write_summary(sim->summary(), "incomplete", e.what());
    } catch (...) {
    }
    throw;
  }

  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::ofstream log(result.dir / "run.log");
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
  log << "finished " << stamp << "\nwall_seconds " << result.wall_seconds << "\nthreads "
      << resolve_threads(config.threads) << "\n";
  for (std::size_t s = 0; s < kStreamCount; ++s) {
    log << "rng_draws." << stream_name(static_cast<Stream>(s)) << ' ' << sim->rng_accounting().draws[s] << '\n';
  }
  return result;
}

}  // namespace feedsim
