#include "experiment.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "feedsim/csv.hpp"
#include "feedsim/errors.hpp"

namespace feedsim::cli {

using nlohmann::json;

Stat describe(const std::vector<double>& values) {
  Stat s;
  s.n = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::optional<double> final_metric(const json& summary, const std::string& metric, const std::string& scope) {
  const auto& m = summary.at("metrics");
  if (!m.contains(metric) || !m[metric].contains(scope)) return std::nullopt;
  return m[metric][scope].get<double>();
}

std::uint64_t repetition_seed(std::uint64_t master, int rep) {
  return derive_seed(master, Stream::dynamics, static_cast<std::uint64_t>(rep));
}

void run_tasks(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  const auto k = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (k <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < k; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::optional<Stat> PolicyRuns::stat(const std::string& metric, const std::string& scope) const {
  const auto it = stats.find({metric, scope});
  if (it == stats.end()) return std::nullopt;
  return it->second;
}

const PolicyRuns& Comparison::at(PolicyKind policy) const {
  for (const auto& p : policies) {
    if (p.policy == policy) return p;
  }
  throw std::out_of_range("policy not part of the comparison");
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void collect_stats(PolicyRuns& pr) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  for (const auto& run : pr.runs) {
    for (const auto& [metric, scopes] : run.summary.at("metrics").items()) {
      for (const auto& [scope, v] : scopes.items()) values[{metric, scope}].push_back(v.get<double>());
    }
  }
  for (auto& [key, v] : values) pr.stats[key] = describe(v);
}

json stats_json(const std::map<std::pair<std::string, std::string>, Stat>& stats) {
  json j = json::object();
  for (const auto& [key, s] : stats) j[key.first][key.second] = {{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
  return j;
}

}  // namespace

Comparison run_comparison(const SimConfig& base, const std::vector<PolicyKind>& policies, int reps,
                          const std::filesystem::path& out_root, int jobs) {
  if (policies.empty()) throw ConfigError("compare needs at least one policy");
  if (reps < 1) throw ConfigError("repetitions must be >= 1");
  const auto seed = base.master_seed();
  json id_tree = base.tree;
  id_tree.erase("policy");
  Comparison cmp;
  cmp.dir = out_root / ("compare_" + config_hash(id_tree) + "_s" + std::to_string(seed));
  std::filesystem::create_directories(cmp.dir);

  const Population population = make_population(base);
  std::vector<SimConfig> configs;
  for (const auto p : policies) {
    json tree = base.tree;
    tree["policy"] = std::string(to_string(p));
    configs.push_back(config_from_tree(tree, base.base_dir));
    cmp.policies.push_back({p, std::vector<RunResult>(static_cast<std::size_t>(reps)), {}});
  }

  const std::size_t total = policies.size() * static_cast<std::size_t>(reps);
  run_tasks(total, jobs, [&](std::size_t k) {
    const std::size_t pi = k / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(k % static_cast<std::size_t>(reps));
    RunOptions opt;
    opt.out_root = cmp.dir / "runs";
    opt.run_suffix = "_r" + std::to_string(rep);
    opt.population = population;
    opt.dynamics_seed = repetition_seed(seed, rep);
    cmp.policies[pi].runs[static_cast<std::size_t>(rep)] = run_simulation(configs[pi], opt);
  });

  auto runs_csv = open_out(cmp.dir / "runs.csv");
  runs_csv << "run,policy,rep,metric,scope,value\n";
  auto gamma_csv = open_out(cmp.dir / "gamma_values.csv");
  gamma_csv << "policy,rep,agent,gamma\n";
  json summary;
  summary["seed"] = seed;
  summary["repetitions"] = reps;
  summary["policies"] = json::array();
  summary["runs"] = json::array();
  for (auto& pr : cmp.policies) {
    const std::string name(to_string(pr.policy));
    summary["policies"].push_back(name);
    for (std::size_t r = 0; r < pr.runs.size(); ++r) {
      const auto& run = pr.runs[r];
      summary["runs"].push_back({{"policy", name}, {"rep", r}, {"run", run.run_id}});
      for (const auto& [metric, scopes] : run.summary.at("metrics").items()) {
        for (const auto& [scope, v] : scopes.items()) {
          runs_csv << run.run_id << ',' << name << ',' << r << ',' << metric << ',' << scope << ','
                   << format_double(v.get<double>()) << '\n';
        }
      }
      const auto table = read_csv(run.dir / "gamma_per_agent.csv");
      const auto agent = table.column("agent");
      const auto gamma = table.column("gamma");
      for (const auto& row : table.rows) {
        if (!row[gamma].empty()) gamma_csv << name << ',' << r << ',' << row[agent] << ',' << row[gamma] << '\n';
      }
    }
    collect_stats(pr);
    summary["table"][name] = stats_json(pr.stats);
  }

  auto cmp_csv = open_out(cmp.dir / "comparison.csv");
  cmp_csv << "policy,metric,scope,mean,std,n\n";
  for (const auto& pr : cmp.policies) {
    for (const auto& [key, s] : pr.stats) {
      cmp_csv << to_string(pr.policy) << ',' << key.first << ',' << key.second << ',' << format_double(s.mean) << ','
              << format_double(s.std) << ',' << s.n << '\n';
    }
  }
  open_out(cmp.dir / "summary.json") << summary.dump(2) << '\n';
  return cmp;
}

SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("sweep axis must look like path=[v1,v2]: " + text);
  SweepAxis axis;
  axis.path = text.substr(0, eq);
  const std::string rhs = text.substr(eq + 1);
  json values;
  try {
    values = json::parse(rhs.starts_with("[") ? rhs : "[" + rhs + "]");
  } catch (const json::parse_error&) {
    throw ConfigError("cannot parse sweep values for '" + axis.path + "': " + rhs);
  }
  for (const auto& v : values) axis.values.push_back(v);
  if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.path + "' has no values");
  return axis;
}

SweepResult run_sweep(const json& base_tree, const std::filesystem::path& base_dir, const std::vector<SweepAxis>& axes,
                      int reps, const std::filesystem::path& out_root, int jobs) {
  if (reps < 1) throw ConfigError("repetitions must be >= 1");
  const SimConfig base = config_from_tree(base_tree, base_dir);
  const auto seed = base.master_seed();

  // Resolve every grid point up front so bad paths fail before any run.
  std::vector<std::vector<std::pair<std::string, json>>> grid(1);
  for (const auto& axis : axes) {
    json probe = base_tree;
    set_config_path(probe, axis.path, axis.values.front());
    std::vector<std::vector<std::pair<std::string, json>>> next;
    for (const auto& g : grid) {
      for (const auto& v : axis.values) {
        auto point = g;
        point.emplace_back(axis.path, v);
        next.push_back(std::move(point));
      }
    }
    grid = std::move(next);
  }

  SweepResult result;
  result.dir = out_root / ("sweep_" + config_hash(base_tree) + "_s" + std::to_string(seed));
  std::filesystem::create_directories(result.dir);
  result.points.resize(grid.size());
  std::vector<std::optional<SimConfig>> configs(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    result.points[g].assignment = grid[g];
    result.points[g].runs.resize(static_cast<std::size_t>(reps));
    try {
      json tree = base_tree;
      for (const auto& [path, v] : grid[g]) set_config_path(tree, path, v);
      configs[g] = config_from_tree(merge_config(tree), base_dir);
    } catch (const std::exception& e) {
      result.points[g].error = e.what();
    }
  }

  std::mutex mu;
  run_tasks(grid.size() * static_cast<std::size_t>(reps), jobs, [&](std::size_t k) {
    const std::size_t g = k / static_cast<std::size_t>(reps);
    const int rep = static_cast<int>(k % static_cast<std::size_t>(reps));
    if (!configs[g]) return;
    try {
      RunOptions opt;
      opt.out_root = result.dir / "runs";
      opt.run_suffix = "_r" + std::to_string(rep);
      opt.dynamics_seed = repetition_seed(seed, rep);
      result.points[g].runs[static_cast<std::size_t>(rep)] = run_simulation(*configs[g], opt);
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      if (result.points[g].error.empty()) result.points[g].error = e.what();
    }
  });

  auto points_csv = open_out(result.dir / "points.csv");
  points_csv << "point,path,value,status\n";
  auto sweep_csv = open_out(result.dir / "sweep.csv");
  sweep_csv << "run,point,rep,metric,scope,value\n";
  json summary;
  summary["seed"] = seed;
  summary["repetitions"] = reps;
  summary["points"] = json::array();
  for (std::size_t g = 0; g < result.points.size(); ++g) {
    auto& p = result.points[g];
    const bool ok = p.error.empty();
    if (!ok) ++result.failures;
    json jp;
    jp["point"] = g;
    jp["status"] = ok ? "complete" : "failed";
    if (!ok) jp["error"] = p.error;
    for (const auto& [path, v] : p.assignment) {
      jp["assignment"][path] = v;
      points_csv << g << ',' << path << ',' << v.dump() << ',' << (ok ? "complete" : "failed") << '\n';
    }
    if (p.assignment.empty()) points_csv << g << ",,," << (ok ? "complete" : "failed") << '\n';
    if (ok) {
      PolicyRuns pr;
      pr.runs = p.runs;
      collect_stats(pr);
      jp["table"] = stats_json(pr.stats);
      for (std::size_t r = 0; r < p.runs.size(); ++r) {
        for (const auto& [metric, scopes] : p.runs[r].summary.at("metrics").items()) {
          for (const auto& [scope, v] : scopes.items()) {
            sweep_csv << p.runs[r].run_id << ',' << g << ',' << r << ',' << metric << ',' << scope << ','
                      << format_double(v.get<double>()) << '\n';
          }
        }
      }
    }
    summary["points"].push_back(jp);
  }
  open_out(result.dir / "summary.json") << summary.dump(2) << '\n';
  return result;
}

}  // namespace feedsim::cli
