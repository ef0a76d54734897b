#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "experiment.hpp"
#include "feedsim/config.hpp"
#include "feedsim/csv.hpp"
#include "feedsim/engine.hpp"
#include "feedsim/errors.hpp"
#include "plot.hpp"

namespace feedsim::cli {

namespace {

constexpr const char* kOutEnv = "FEEDSIM_OUT";

std::filesystem::path default_out() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
};

nlohmann::json read_tree(const Common& c, std::filesystem::path& base_dir) {
  std::ifstream in(c.config);
  if (!in) throw ConfigError("cannot open config file " + c.config);
  nlohmann::json user;
  try {
    user = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(c.config + ": " + e.what());
  }
  base_dir = std::filesystem::path(c.config).parent_path();
  nlohmann::json tree;
  try {
    tree = merge_config(user);
  } catch (const ConfigError& e) {
    throw ConfigError(c.config + ": " + e.what());
  }
  if (c.seed) tree["seed"] = *c.seed;
  return tree;
}

SimConfig read_config(const Common& c) {
  std::filesystem::path base_dir;
  const auto tree = read_tree(c, base_dir);
  try {
    SimConfig cfg = config_from_tree(tree, base_dir);
    cfg.master_seed();
    return cfg;
  } catch (const ConfigError& e) {
    throw ConfigError(c.config + ": " + e.what());
  }
}

std::filesystem::path out_root(const Common& c) { return c.out.empty() ? default_out() : std::filesystem::path(c.out); }

void add_common(CLI::App* cmd, Common& c, bool with_jobs) {
  cmd->add_option("--config", c.config, "JSON configuration file")->required();
  cmd->add_option("--seed", c.seed, "override the master seed");
  cmd->add_option("--out", c.out, std::string("output root (default $") + kOutEnv + " or ./runs)");
  if (with_jobs) cmd->add_option("--jobs", c.jobs, "runs executed in parallel")->check(CLI::PositiveNumber);
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"feedsim: recommender and opinion-dynamics simulator"};
  app.require_subcommand(1);

  Common run_opt;
  auto* run = app.add_subcommand("run", "simulate one configuration");
  add_common(run, run_opt, false);

  Common cmp_opt;
  std::string policies = "Chrono,Neg,Pop,PopNeg";
  int reps = 10;
  auto* compare = app.add_subcommand("compare", "compare ranking policies on one shared population");
  add_common(compare, cmp_opt, true);
  compare->add_option("--policies", policies, "comma-separated policies")->capture_default_str();
  compare->add_option("--reps", reps, "repetitions per policy")->capture_default_str()->check(CLI::PositiveNumber);

  Common sweep_opt;
  std::vector<std::string> axes;
  int sweep_reps = 1;
  auto* sweep = app.add_subcommand("sweep", "grid over config fields");
  add_common(sweep, sweep_opt, true);
  sweep->add_option("--axis", axes, "dotted.path=[v1,v2,...]; repeatable");
  sweep->add_option("--reps", sweep_reps, "repetitions per grid point")->capture_default_str()->check(CLI::PositiveNumber);

  std::string plot_dir;
  std::string plot_kind;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "render SVG figures from a run or comparison directory");
  plot->add_option("--dir", plot_dir, "run, comparison or sweep directory")->required();
  plot->add_option("--kind", plot_kind, "metrics-bars, gamma-hist or social-power")->required();
  plot->add_option("--out", plot_out, "output directory (default <dir>/plots)");

  Common val_opt;
  auto* validate = app.add_subcommand("validate-config", "check a configuration and print it with defaults");
  validate->add_option("--config", val_opt.config, "JSON configuration file")->required();
  validate->add_option("--seed", val_opt.seed, "override the master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::usage;
  }

  try {
    if (*run) {
      const auto cfg = read_config(run_opt);
      RunOptions opt;
      opt.out_root = out_root(run_opt);
      const auto result = run_simulation(cfg, opt);
      out << result.dir.string() << "\n";
      err << "run " << result.run_id << " finished in " << result.wall_seconds << " s\n";
    } else if (*compare) {
      const auto cfg = read_config(cmp_opt);
      std::vector<PolicyKind> kinds;
      std::stringstream ss(policies);
      for (std::string p; std::getline(ss, p, ',');) {
        if (!p.empty()) kinds.push_back(parse_policy(p));
      }
      const auto cmp = run_comparison(cfg, kinds, reps, out_root(cmp_opt), cmp_opt.jobs);
      out << "policy,gamma_mean,gamma_std,modularity_retweets,modularity_follows\n";
      for (const auto& pr : cmp.policies) {
        auto cell = [&](const char* metric, const char* scope, bool sd) {
          const auto s = pr.stat(metric, scope);
          return s ? format_double(sd ? s->std : s->mean) : std::string();
        };
        out << to_string(pr.policy) << ',' << cell("gamma_mean", "window", false) << ','
            << cell("gamma_mean", "window", true) << ',' << cell("modularity", "retweet_graph", false) << ','
            << cell("modularity", "follow_graph", false) << '\n';
      }
      err << "comparison written to " << cmp.dir.string() << "\n";
    } else if (*sweep) {
      std::filesystem::path base_dir;
      const auto tree = read_tree(sweep_opt, base_dir);
      std::vector<SweepAxis> parsed;
      for (const auto& a : axes) parsed.push_back(parse_axis(a));
      const auto result = run_sweep(tree, base_dir, parsed, sweep_reps, out_root(sweep_opt), sweep_opt.jobs);
      out << result.dir.string() << "\n";
      for (std::size_t g = 0; g < result.points.size(); ++g) {
        if (!result.points[g].error.empty()) err << "grid point " << g << " failed: " << result.points[g].error << "\n";
      }
      if (result.failures > 0) return ExitCode::runtime;
    } else if (*plot) {
      const auto dir = std::filesystem::path(plot_dir);
      const auto files = make_plots(dir, plot_kind, plot_out.empty() ? dir / "plots" : std::filesystem::path(plot_out));
      for (const auto& f : files) out << f.string() << "\n";
    } else if (*validate) {
      const auto cfg = read_config(val_opt);
      out << cfg.tree.dump(2) << "\n";
      err << "config ok, hash " << config_hash(cfg.tree) << "\n";
    }
  } catch (const UnknownPlotKind& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::usage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return ExitCode::config;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::runtime;
  }
  return ExitCode::ok;
}

}  // namespace feedsim::cli
