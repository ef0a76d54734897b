#include "feedsim/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "feedsim/errors.hpp"

namespace feedsim {

using nlohmann::json;

namespace {

// Keys whose value is replaced wholesale instead of merged key by key.
bool is_replace_key(const std::string& path) {
  return path.starts_with("population.traits.") || path == "acceptance" || path == "population.negativity_pins";
}

// Keys that default to null but accept a value.
bool is_nullable(const std::string& path) {
  return path == "seed" || path == "population.graph_file" || path == "feed_cap";
}

void merge_into(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ConfigError("'" + (prefix.empty() ? std::string("<root>") : prefix) + "' must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    json& slot = base[key];
    if (is_replace_key(path) || is_nullable(path)) {
      slot = value;
    } else if (slot.is_object()) {
      merge_into(slot, value, path);
    } else {
      if (value.is_object() || value.is_array()) throw ConfigError("'" + path + "' must be a scalar");
      slot = value;
    }
  }
}

template <class T>
T get(const json& tree, const std::string& dotted) {
  const json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("missing config key '" + dotted + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    return node->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + dotted + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  return path;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

AcceptanceCurve acceptance_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("acceptance: expected an object with 'kind'");
  const auto kind = j["kind"].get<std::string>();
  if (kind == "exponential") {
    check_keys(j, {"kind", "scale"}, "acceptance");
    return AcceptanceCurve::exponential(number(j, "scale", "acceptance"));
  }
  if (kind == "table") {
    check_keys(j, {"kind", "file", "bins"}, "acceptance");
    if (j.contains("file")) return AcceptanceCurve::load_csv(resolve(base_dir, j["file"].get<std::string>()));
    if (!j.contains("bins") || !j["bins"].is_array()) throw ConfigError("acceptance: table needs 'file' or 'bins'");
    std::vector<AcceptanceCurve::Bin> bins;
    for (const auto& b : j["bins"]) {
      if (!b.is_array() || b.size() != 3) throw ConfigError("acceptance: each bin is [low, high, probability]");
      bins.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>()});
    }
    return AcceptanceCurve::tabulated(std::move(bins));
  }
  throw ConfigError("acceptance: unknown kind '" + kind + "' (exponential, table)");
}

SecondNeighborMode parse_mode(const std::string& s) {
  if (s == "read") return SecondNeighborMode::read;
  if (s == "undirected") return SecondNeighborMode::undirected;
  throw ConfigError("rewire.second_neighbors must be 'read' or 'undirected'");
}

}  // namespace

std::uint64_t SimConfig::master_seed() const {
  if (!seed) throw ConfigError("a master seed is required (config 'seed' or --seed)");
  return *seed;
}

json default_config_tree() {
  return json::parse(R"({
    "seed": null,
    "horizon_days": 60,
    "policy": "chrono",
    "population": {
      "n": 2000,
      "m": 3,
      "bidirected": true,
      "graph_file": null,
      "traits": {
        "lambda": {"dist": "constant", "value": 0.1},
        "neg_bias": {"dist": "constant", "value": 2.0},
        "intrinsic_negativity": {"dist": "beta", "a": 2.0, "b": 5.0},
        "pub_scale": {"dist": "lognormal", "mu": 0.0, "sigma": 1.0, "clip": [0.0, 50.0]},
        "share_scale": {"dist": "lognormal", "mu": 1.0, "sigma": 1.0, "clip": [0.0, 100.0]},
        "opinion0": {"dist": "uniform", "low": -1.0, "high": 1.0}
      },
      "negativity_pins": []
    },
    "acceptance": {"kind": "exponential", "scale": 0.2},
    "rewire": {"gamma": 0.9, "tau": 0.5, "second_neighbors": "read"},
    "read_base_prob": 0.5,
    "feed_cap": null,
    "opinion_update": "immediate",
    "predictor": {
      "learner": "trees",
      "trees": 50,
      "depth": 4,
      "learning_rate": 0.3,
      "lambda": 1.0,
      "min_split_loss": 10.0,
      "min_child_weight": 1.0,
      "bins": 64,
      "logistic_l2": 0.001,
      "logistic_iterations": 30,
      "window_days": 7,
      "max_records": 500000
    },
    "analysis": {
      "window_days": 0,
      "leiden_restarts": 10,
      "resolution": 1.0,
      "top_quantile": 0.01,
      "community_interval": 0
    },
    "output": {
      "metrics_interval": 1,
      "snapshot_interval": 0,
      "message_log": false,
      "checkpoint": true,
      "gamma_per_agent": true
    },
    "threads": 1
  })");
}

json merge_config(const json& user) {
  json tree = default_config_tree();
  merge_into(tree, user, "");
  return tree;
}

TraitSampler sampler_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (j.is_number()) return TraitSampler::constant(j.get<double>());
  if (!j.is_object() || !j.contains("dist") || !j["dist"].is_string()) {
    throw ConfigError("trait distribution: expected a number or an object with 'dist'");
  }
  const auto dist = j["dist"].get<std::string>();
  const std::string where = "trait distribution '" + dist + "'";
  auto with_clip = [&](TraitSampler s) {
    if (j.contains("clip")) {
      const auto& c = j["clip"];
      if (!c.is_array() || c.size() != 2) throw ConfigError(where + ": 'clip' must be [lo, hi]");
      s.clip(c[0].get<double>(), c[1].get<double>());
    }
    return s;
  };
  if (dist == "constant") {
    check_keys(j, {"dist", "value", "clip"}, where);
    return with_clip(TraitSampler::constant(number(j, "value", where)));
  }
  if (dist == "uniform") {
    check_keys(j, {"dist", "low", "high", "clip"}, where);
    return with_clip(TraitSampler::uniform(number(j, "low", where), number(j, "high", where)));
  }
  if (dist == "exponential") {
    check_keys(j, {"dist", "mean", "clip"}, where);
    return with_clip(TraitSampler::exponential(number(j, "mean", where)));
  }
  if (dist == "lognormal") {
    check_keys(j, {"dist", "mu", "sigma", "clip"}, where);
    return with_clip(TraitSampler::lognormal(number(j, "mu", where), number(j, "sigma", where)));
  }
  if (dist == "beta") {
    check_keys(j, {"dist", "a", "b", "clip"}, where);
    return with_clip(TraitSampler::beta(number(j, "a", where), number(j, "b", where)));
  }
  if (dist == "empirical") {
    check_keys(j, {"dist", "values", "probabilities", "file", "clip"}, where);
    if (j.contains("file")) return with_clip(TraitSampler::load_empirical(resolve(base_dir, j["file"].get<std::string>())));
    auto values = j.at("values").get<std::vector<double>>();
    std::vector<double> probs = j.contains("probabilities") ? j["probabilities"].get<std::vector<double>>()
                                                              : std::vector<double>(values.size(), 1.0);
    return with_clip(TraitSampler::empirical(std::move(values), std::move(probs)));
  }
  throw ConfigError(where + ": unknown (constant, uniform, exponential, lognormal, beta, empirical)");
}

SimConfig config_from_tree(const json& tree, const std::filesystem::path& base_dir) {
  SimConfig c;
  c.tree = tree;
  c.base_dir = base_dir;
  try {
    if (!tree["seed"].is_null()) {
      if (!tree["seed"].is_number_integer() || tree["seed"].get<long long>() < 0) {
        throw ConfigError("'seed' must be a non-negative integer");
      }
      c.seed = tree["seed"].get<std::uint64_t>();
    }
    c.horizon_days = get<int>(tree, "horizon_days");
    if (c.horizon_days < 0) throw ConfigError("'horizon_days' must be >= 0");
    c.policy = parse_policy(get<std::string>(tree, "policy"));

    auto& pop = c.population;
    const long long n = get<long long>(tree, "population.n");
    const long long m = get<long long>(tree, "population.m");
    if (n < 1) throw ConfigError("'population.n' must be >= 1");
    if (m < 1) throw ConfigError("'population.m' must be >= 1");
    if (n > 1 && m >= n) throw ConfigError("'population.m' must be smaller than 'population.n'");
    pop.n = static_cast<std::size_t>(n);
    pop.m = static_cast<std::size_t>(m);
    pop.bidirected = get<bool>(tree, "population.bidirected");
    if (!tree["population"]["graph_file"].is_null()) {
      c.graph_file = resolve(base_dir, get<std::string>(tree, "population.graph_file"));
    }
    const auto& traits = tree["population"]["traits"];
    auto& td = pop.traits;
    td.lambda = sampler_from_json(traits.at("lambda"), base_dir);
    td.neg_bias = sampler_from_json(traits.at("neg_bias"), base_dir);
    td.intrinsic_negativity = sampler_from_json(traits.at("intrinsic_negativity"), base_dir);
    td.pub_scale = sampler_from_json(traits.at("pub_scale"), base_dir);
    td.share_scale = sampler_from_json(traits.at("share_scale"), base_dir);
    td.opinion0 = sampler_from_json(traits.at("opinion0"), base_dir);
    td.acceptance = acceptance_from_json(tree["acceptance"], base_dir);
    const auto& pins = tree["population"]["negativity_pins"];
    if (!pins.is_array()) throw ConfigError("'population.negativity_pins' must be a list");
    for (const auto& p : pins) {
      if (!p.is_object()) throw ConfigError("negativity pin must be {value, fraction}");
      check_keys(p, {"value", "fraction"}, "negativity pin");
      td.negativity_pins.push_back({number(p, "value", "negativity pin"), number(p, "fraction", "negativity pin")});
    }
    td.validate();

    c.rewire.gamma = get<double>(tree, "rewire.gamma");
    c.rewire.tau = get<double>(tree, "rewire.tau");
    c.rewire.mode = parse_mode(get<std::string>(tree, "rewire.second_neighbors"));
    c.rewire.validate();

    c.read_base_prob = get<double>(tree, "read_base_prob");
    if (!(c.read_base_prob > 0.0 && c.read_base_prob <= 1.0)) throw ConfigError("'read_base_prob' must lie in ]0, 1]");
    if (!tree["feed_cap"].is_null()) {
      const auto cap = get<long long>(tree, "feed_cap");
      if (cap < 1) throw ConfigError("'feed_cap' must be a positive integer");
      c.feed_cap = static_cast<std::size_t>(cap);
    }
    const auto update = get<std::string>(tree, "opinion_update");
    if (update == "immediate") {
      c.opinion_update = OpinionUpdate::immediate;
    } else if (update == "start_of_day") {
      c.opinion_update = OpinionUpdate::start_of_day;
    } else {
      throw ConfigError("'opinion_update' must be 'immediate' or 'start_of_day'");
    }

    auto& pc = c.predictor;
    const auto learner = get<std::string>(tree, "predictor.learner");
    if (learner == "trees") {
      pc.learner.kind = LearnerKind::trees;
    } else if (learner == "logistic") {
      pc.learner.kind = LearnerKind::logistic;
    } else {
      throw ConfigError("'predictor.learner' must be 'trees' or 'logistic'");
    }
    auto& tp = pc.learner.trees;
    tp.n_trees = get<int>(tree, "predictor.trees");
    tp.max_depth = get<int>(tree, "predictor.depth");
    tp.learning_rate = get<double>(tree, "predictor.learning_rate");
    tp.l2 = get<double>(tree, "predictor.lambda");
    tp.min_split_loss = get<double>(tree, "predictor.min_split_loss");
    tp.min_child_weight = get<double>(tree, "predictor.min_child_weight");
    tp.max_bins = get<int>(tree, "predictor.bins");
    if (tp.n_trees < 1 || tp.max_depth < 1 || !(tp.learning_rate > 0.0) || tp.l2 < 0.0 || tp.min_split_loss < 0.0 ||
        tp.min_child_weight < 0.0 || tp.max_bins < 2 || tp.max_bins > 256) {
      throw ConfigError("predictor tree parameters out of range");
    }
    pc.learner.logistic.l2 = get<double>(tree, "predictor.logistic_l2");
    pc.learner.logistic.iterations = get<int>(tree, "predictor.logistic_iterations");
    if (pc.learner.logistic.l2 < 0.0 || pc.learner.logistic.iterations < 1) {
      throw ConfigError("predictor logistic parameters out of range");
    }
    pc.window_days = get<int>(tree, "predictor.window_days");
    const auto max_records = get<long long>(tree, "predictor.max_records");
    if (pc.window_days < 1 || max_records < 1) throw ConfigError("predictor window must be positive");
    pc.max_records = static_cast<std::size_t>(max_records);

    auto& an = c.analysis;
    an.window_days = get<int>(tree, "analysis.window_days");
    an.leiden_restarts = get<int>(tree, "analysis.leiden_restarts");
    an.resolution = get<double>(tree, "analysis.resolution");
    an.top_quantile = get<double>(tree, "analysis.top_quantile");
    an.community_interval = get<int>(tree, "analysis.community_interval");
    if (an.window_days < 0 || an.leiden_restarts < 1 || !(an.resolution > 0.0) || !(an.top_quantile > 0.0) ||
        an.top_quantile > 1.0 || an.community_interval < 0) {
      throw ConfigError("analysis parameters out of range");
    }

    auto& out = c.output;
    out.metrics_interval = get<int>(tree, "output.metrics_interval");
    out.snapshot_interval = get<int>(tree, "output.snapshot_interval");
    out.message_log = get<bool>(tree, "output.message_log");
    out.checkpoint = get<bool>(tree, "output.checkpoint");
    out.gamma_per_agent = get<bool>(tree, "output.gamma_per_agent");
    if (out.metrics_interval < 1 || out.snapshot_interval < 0) throw ConfigError("output intervals out of range");

    c.threads = get<int>(tree, "threads");
    if (c.threads < 0) throw ConfigError("'threads' must be >= 0 (0 = all cores)");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

SimConfig parse_config(const json& user, const std::filesystem::path& base_dir) {
  return config_from_tree(merge_config(user), base_dir);
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json user;
  try {
    user = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return parse_config(user, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void set_config_path(json& tree, const std::string& dotted, const json& value) {
  const json defaults = default_config_tree();
  const json* reference = &defaults;
  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const auto key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    const bool known = (reference && reference->is_object() && reference->contains(key)) ||
                       (node->is_object() && node->contains(key));
    if (!known) throw ConfigError("sweep path '" + dotted + "' does not name a config field");
    reference = reference && reference->is_object() && reference->contains(key) ? &(*reference)[key] : nullptr;
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::string config_hash(const json& tree) {
  json copy = tree;
  copy.erase("seed");
  copy.erase("threads");
  const std::string text = copy.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace feedsim
