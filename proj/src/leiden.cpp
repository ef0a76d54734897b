// Leiden community detection (local moving, refinement, aggregation) for
// directed modularity. Moving node v into community C changes m*Q by
//   w(v, C) - (res / m) * (k_out(v) K_in(C) + k_in(v) K_out(C)),
// where w(v, C) sums edge weights in both directions between v and C.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "feedsim/metrics.hpp"
#include "feedsim/random.hpp"

namespace feedsim {
namespace {

struct Level {
  std::size_t n = 0;
  std::vector<double> kout;
  std::vector<double> kin;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> nbr;  // both directions merged, no self-loops
  std::vector<WeightedEdge> directed;                               // merged, with self-loops
};

Level make_level(std::size_t n, std::vector<WeightedEdge> edges) {
  Level level;
  level.n = n;
  level.kout.assign(n, 0.0);
  level.kin.assign(n, 0.0);
  level.nbr.assign(n, {});
  std::sort(edges.begin(), edges.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) { return a.src != b.src ? a.src < b.src : a.dst < b.dst; });
  std::vector<WeightedEdge> sym;
  for (const auto& e : edges) {
    if (!level.directed.empty() && level.directed.back().src == e.src && level.directed.back().dst == e.dst) {
      level.directed.back().weight += e.weight;
    } else {
      level.directed.push_back(e);
    }
    level.kout[e.src] += e.weight;
    level.kin[e.dst] += e.weight;
    if (e.src != e.dst) {
      sym.push_back(e);
      sym.push_back({e.dst, e.src, e.weight});
    }
  }
  std::sort(sym.begin(), sym.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) { return a.src != b.src ? a.src < b.src : a.dst < b.dst; });
  for (const auto& e : sym) {
    auto& list = level.nbr[e.src];
    if (!list.empty() && list.back().first == e.dst) {
      list.back().second += e.weight;
    } else {
      list.emplace_back(e.dst, e.weight);
    }
  }
  return level;
}

std::vector<std::uint32_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(order.begin(), order.end());
  return order;
}

class Leiden {
 public:
  Leiden(double resolution, double total_weight, double randomness, Rng& rng)
      : res_(resolution), m_(total_weight), theta_(randomness), rng_(rng) {}

  Partition run(const Level& base, Partition start) {
    Level level = base;
    std::vector<std::uint32_t> membership(base.n);
    std::iota(membership.begin(), membership.end(), 0u);
    std::vector<std::uint32_t> comm = std::move(start);

    while (true) {
      move_nodes(level, comm);
      if (count_nonempty(comm, level.n) == level.n) break;
      std::vector<std::uint32_t> refined = refine(level, comm);
      std::vector<std::uint32_t> next_comm;
      if (count_nonempty(refined, level.n) == level.n) {
        // Refinement merged nothing; collapse the unrefined communities instead.
        level = aggregate(level, comm, membership, nullptr, next_comm);
      } else {
        level = aggregate(level, refined, membership, &comm, next_comm);
      }
      comm = std::move(next_comm);
    }
    Partition out(base.n);
    for (std::size_t i = 0; i < base.n; ++i) out[i] = comm[membership[i]];
    return out;
  }

 private:
  double penalty(double kout_v, double kin_v, double kout_c, double kin_c) const {
    return res_ / m_ * (kout_v * kin_c + kin_v * kout_c);
  }

  static std::size_t count_nonempty(const std::vector<std::uint32_t>& comm, std::size_t n) {
    std::vector<char> seen(n, 0);
    std::size_t k = 0;
    for (const auto c : comm) {
      if (!seen[c]) {
        seen[c] = 1;
        ++k;
      }
    }
    return k;
  }

  void move_nodes(const Level& level, std::vector<std::uint32_t>& comm) {
    const std::size_t n = level.n;
    std::vector<double> kout_c(n, 0.0);
    std::vector<double> kin_c(n, 0.0);
    std::vector<std::uint32_t> size(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
      kout_c[comm[v]] += level.kout[v];
      kin_c[comm[v]] += level.kin[v];
      ++size[comm[v]];
    }
    std::vector<std::uint32_t> empty;
    for (std::uint32_t c = static_cast<std::uint32_t>(n); c-- > 0;) {
      if (size[c] == 0) empty.push_back(c);
    }

    std::deque<std::uint32_t> queue;
    for (const auto v : shuffled(n, rng_)) queue.push_back(v);
    std::vector<char> queued(n, 1);
    std::vector<double> w_to(n, 0.0);
    std::vector<char> touched_flag(n, 0);
    std::vector<std::uint32_t> touched;

    while (!queue.empty()) {
      const std::uint32_t v = queue.front();
      queue.pop_front();
      queued[v] = 0;
      const std::uint32_t old = comm[v];

      touched.clear();
      for (const auto& [u, w] : level.nbr[v]) {
        const auto c = comm[u];
        if (!touched_flag[c]) {
          touched_flag[c] = 1;
          touched.push_back(c);
        }
        w_to[c] += w;
      }

      kout_c[old] -= level.kout[v];
      kin_c[old] -= level.kin[v];
      if (--size[old] == 0) empty.push_back(old);

      std::uint32_t best = old;
      double best_gain = w_to[old] - penalty(level.kout[v], level.kin[v], kout_c[old], kin_c[old]);
      for (const auto c : touched) {
        if (c == old) continue;
        const double gain = w_to[c] - penalty(level.kout[v], level.kin[v], kout_c[c], kin_c[c]);
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      if (best_gain < 0.0) {
        while (size[empty.back()] != 0) empty.pop_back();
        best = empty.back();
      }
      for (const auto c : touched) {
        w_to[c] = 0.0;
        touched_flag[c] = 0;
      }

      comm[v] = best;
      kout_c[best] += level.kout[v];
      kin_c[best] += level.kin[v];
      ++size[best];

      if (best != old) {
        for (const auto& [u, w] : level.nbr[v]) {
          if (!queued[u] && comm[u] != best) {
            queued[u] = 1;
            queue.push_back(u);
          }
        }
      }
    }
  }

  std::vector<std::uint32_t> refine(const Level& level, const std::vector<std::uint32_t>& comm) {
    const std::size_t n = level.n;
    std::vector<double> s_kout(n, 0.0);
    std::vector<double> s_kin(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      s_kout[comm[v]] += level.kout[v];
      s_kin[comm[v]] += level.kin[v];
    }
    std::vector<std::uint32_t> refined(n);
    std::iota(refined.begin(), refined.end(), 0u);
    std::vector<double> r_kout = level.kout;
    std::vector<double> r_kin = level.kin;
    std::vector<std::uint32_t> r_size(n, 1);
    std::vector<double> ext_node(n, 0.0);  // weight from v to the rest of its community
    for (std::size_t v = 0; v < n; ++v) {
      for (const auto& [u, w] : level.nbr[v]) {
        if (comm[u] == comm[v]) ext_node[v] += w;
      }
    }
    std::vector<double> r_ext = ext_node;  // weight from refined community to the rest of its community

    std::vector<double> w_to(n, 0.0);
    std::vector<char> touched_flag(n, 0);
    std::vector<std::uint32_t> touched;
    std::vector<std::pair<std::uint32_t, double>> options;

    for (const auto v : shuffled(n, rng_)) {
      if (r_size[refined[v]] != 1) continue;
      const auto s = comm[v];
      if (ext_node[v] < penalty(level.kout[v], level.kin[v], s_kout[s] - level.kout[v], s_kin[s] - level.kin[v])) {
        continue;
      }
      touched.clear();
      for (const auto& [u, w] : level.nbr[v]) {
        if (comm[u] != s) continue;
        const auto c = refined[u];
        if (!touched_flag[c]) {
          touched_flag[c] = 1;
          touched.push_back(c);
        }
        w_to[c] += w;
      }
      const auto own = refined[v];
      r_kout[own] = 0.0;
      r_kin[own] = 0.0;
      r_size[own] = 0;
      r_ext[own] = 0.0;

      options.clear();
      options.emplace_back(own, 0.0);
      double best = 0.0;
      for (const auto c : touched) {
        if (c == own) continue;
        const bool connected =
            r_ext[c] >= penalty(r_kout[c], r_kin[c], s_kout[s] - r_kout[c], s_kin[s] - r_kin[c]);
        if (!connected) continue;
        const double gain = w_to[c] - penalty(level.kout[v], level.kin[v], r_kout[c], r_kin[c]);
        if (gain >= 0.0) {
          options.emplace_back(c, gain);
          best = std::max(best, gain);
        }
      }
      double total = 0.0;
      for (auto& [c, g] : options) {
        g = std::exp((g - best) / theta_);
        total += g;
      }
      double pick = rng_.uniform() * total;
      std::uint32_t chosen = options.back().first;
      for (const auto& [c, p] : options) {
        if (pick < p) {
          chosen = c;
          break;
        }
        pick -= p;
      }

      refined[v] = chosen;
      r_ext[chosen] = chosen == own ? ext_node[v] : r_ext[chosen] + ext_node[v] - 2.0 * w_to[chosen];
      r_kout[chosen] += level.kout[v];
      r_kin[chosen] += level.kin[v];
      ++r_size[chosen];
      for (const auto c : touched) {
        w_to[c] = 0.0;
        touched_flag[c] = 0;
      }
    }
    return refined;
  }

  /// Collapses `groups` into nodes. The next level's starting partition is
  /// `parent` mapped onto the new nodes, or singletons when parent is null.
  static Level aggregate(const Level& level, const std::vector<std::uint32_t>& groups,
                         std::vector<std::uint32_t>& membership, const std::vector<std::uint32_t>* parent,
                         std::vector<std::uint32_t>& next_comm) {
    const std::size_t n = level.n;
    constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> id(n, unset);
    std::uint32_t k = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (id[groups[v]] == unset) id[groups[v]] = k++;
    }
    std::vector<WeightedEdge> edges;
    edges.reserve(level.directed.size());
    for (const auto& e : level.directed) edges.push_back({id[groups[e.src]], id[groups[e.dst]], e.weight});
    for (auto& m : membership) m = id[groups[m]];

    next_comm.assign(k, 0);
    if (parent == nullptr) {
      std::iota(next_comm.begin(), next_comm.end(), 0u);
    } else {
      std::vector<std::uint32_t> pid(n, unset);
      std::uint32_t pk = 0;
      for (std::size_t v = 0; v < n; ++v) {
        const auto p = (*parent)[v];
        if (pid[p] == unset) pid[p] = pk++;
        next_comm[id[groups[v]]] = pid[p];
      }
    }
    return make_level(k, std::move(edges));
  }

  double res_;
  double m_;
  double theta_;
  Rng& rng_;
};

/// Splits every community into its weakly connected components.
Partition split_disconnected(const WeightedDigraph& graph, const Partition& partition) {
  const std::size_t n = graph.num_nodes();
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const auto& e : graph.edges()) {
    if (e.src != e.dst && partition[e.src] == partition[e.dst]) {
      adj[e.src].push_back(e.dst);
      adj[e.dst].push_back(e.src);
    }
  }
  Partition out(n, std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next = 0;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (out[s] != std::numeric_limits<std::uint32_t>::max()) continue;
    out[s] = next;
    stack.assign(1, s);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (const auto u : adj[v]) {
        if (out[u] == std::numeric_limits<std::uint32_t>::max()) {
          out[u] = next;
          stack.push_back(u);
        }
      }
    }
    ++next;
  }
  return out;
}

}  // namespace

bool communities_weakly_connected(const WeightedDigraph& graph, const Partition& partition) {
  const auto split = split_disconnected(graph, partition);
  return community_count(split) == community_count(partition);
}

Partition detect_communities(const WeightedDigraph& graph, std::uint64_t seed, const LeidenOptions& options) {
  const std::size_t n = graph.num_nodes();
  Partition singletons(n);
  std::iota(singletons.begin(), singletons.end(), 0u);
  if (n == 0 || !(graph.total_weight() > 0.0)) return singletons;

  const Level base = make_level(n, {graph.edges().begin(), graph.edges().end()});
  Partition best;
  double best_q = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    Rng rng = make_rng(seed, Stream::analysis, static_cast<std::uint64_t>(r));
    Leiden leiden(options.resolution, graph.total_weight(), options.randomness, rng);
    Partition current = singletons;
    double q = directed_modularity(graph, current, options.resolution);
    for (int pass = 0; pass < std::max(1, options.max_passes); ++pass) {
      Partition next = canonical_partition(leiden.run(base, current));
      const double next_q = directed_modularity(graph, next, options.resolution);
      if (!(next_q > q + 1e-12)) break;
      current = std::move(next);
      q = next_q;
    }
    if (q > best_q) {
      best_q = q;
      best = std::move(current);
    }
  }
  return canonical_partition(split_disconnected(graph, best));
}

}  // namespace feedsim
