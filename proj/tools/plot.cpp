#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "feedsim/csv.hpp"
#include "feedsim/errors.hpp"

namespace feedsim::cli {

namespace {

const char* const kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string esc(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double nice_ceiling(double v) {
  if (!(v > 0.0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (const double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * p >= v) return m * p;
  }
  return 10.0 * p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void require(const std::filesystem::path& path, const std::string& kind) {
  if (!std::filesystem::exists(path)) throw IoError(kind + " needs " + path.string() + ", which does not exist");
}

std::vector<double> parse_column(const CsvTable& t, const std::string& name) {
  const auto c = t.column(name);
  std::vector<double> out;
  for (const auto& row : t.rows) {
    if (!row[c].empty()) out.push_back(parse_double(row[c], name));
  }
  return out;
}

struct ComparisonTable {
  std::vector<std::string> policies;
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, double>> cells;  // mean, std
};

ComparisonTable load_comparison(const std::filesystem::path& dir, const std::string& kind) {
  const auto path = dir / "comparison.csv";
  require(path, kind);
  const auto t = read_csv(path);
  ComparisonTable ct;
  const auto cp = t.column("policy");
  const auto cm = t.column("metric");
  const auto cs = t.column("scope");
  const auto cmean = t.column("mean");
  const auto cstd = t.column("std");
  for (const auto& row : t.rows) {
    if (std::find(ct.policies.begin(), ct.policies.end(), row[cp]) == ct.policies.end()) ct.policies.push_back(row[cp]);
    ct.cells[{row[cp], row[cm], row[cs]}] = {parse_double(row[cmean], "comparison.csv mean"), parse_double(row[cstd], "comparison.csv std")};
  }
  return ct;
}

}  // namespace

const std::vector<std::string>& plot_kinds() {
  static const std::vector<std::string> kinds{"metrics-bars", "gamma-hist", "social-power"};
  return kinds;
}

Histogram gamma_histogram(const std::vector<double>& values, double cutoff, double bin_width) {
  Histogram h;
  h.cutoff = cutoff;
  h.bin_width = bin_width;
  h.counts.assign(static_cast<std::size_t>(std::ceil(cutoff / bin_width - 1e-9)), 0);
  for (const double v : values) {
    ++h.total;
    if (v >= cutoff) {
      ++h.truncated;
      continue;
    }
    const auto b = std::min(h.counts.size() - 1, static_cast<std::size_t>(std::max(0.0, v) / bin_width));
    ++h.counts[b];
  }
  return h;
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series, const std::string& caption,
                          std::optional<double> reference_line) {
  const double width = 120.0 + 90.0 * static_cast<double>(std::max<std::size_t>(1, categories.size())) *
                                   std::max<double>(1.0, static_cast<double>(series.size()) / 2.0);
  const double height = 360.0;
  const double left = 60.0, right = 20.0, top = 40.0, bottom = 90.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double ymax = reference_line.value_or(0.0);
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!s.values[i]) continue;
      const double e = s.errors.empty() ? 0.0 : s.errors[i];
      ymax = std::max(ymax, *s.values[i] + e);
    }
  }
  ymax = nice_ceiling(ymax);
  auto y = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, ymax) / ymax); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    o << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << y(v) << "\" y2=\"" << y(v)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
  }
  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(1, categories.size()));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, series.size()));
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = left + group_w * static_cast<double>(c) + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (c >= series[s].values.size() || !series[s].values[c]) continue;
      const double v = *series[s].values[c];
      const double x = gx + bar_w * static_cast<double>(s);
      o << "<rect x=\"" << x << "\" y=\"" << y(v) << "\" width=\"" << bar_w * 0.92 << "\" height=\""
        << y(0.0) - y(v) << "\" fill=\"" << kPalette[s % 6] << "\"><title>" << esc(series[s].name) << ": " << fmt(v)
        << "</title></rect>\n";
      if (!series[s].errors.empty() && series[s].errors[c] > 0.0) {
        const double e = series[s].errors[c];
        const double cx = x + bar_w * 0.46;
        o << "<path d=\"M" << cx << ' ' << y(v - e) << "V" << y(v + e) << "M" << cx - 4 << ' ' << y(v + e) << "h8M"
          << cx - 4 << ' ' << y(v - e) << "h8\" stroke=\"black\" fill=\"none\"/>\n";
      }
    }
    o << "<text x=\"" << gx + group_w * 0.4 << "\" y=\"" << top + plot_h + 16 << "\" text-anchor=\"middle\">"
      << esc(categories[c]) << "</text>\n";
  }
  if (reference_line) {
    o << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << y(*reference_line) << "\" y2=\""
      << y(*reference_line) << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
  }
  o << "<line x1=\"" << left << "\" x2=\"" << left << "\" y1=\"" << top << "\" y2=\"" << top + plot_h
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" x2=\"" << left + plot_w << "\" y1=\"" << top + plot_h << "\" y2=\""
    << top + plot_h << "\" stroke=\"black\"/>\n";
  double lx = left;
  for (std::size_t s = 0; s < series.size(); ++s) {
    o << "<rect x=\"" << lx << "\" y=\"" << height - 48 << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % 6]
      << "\"/><text x=\"" << lx + 14 << "\" y=\"" << height - 39 << "\">" << esc(series[s].name) << "</text>\n";
    lx += 24.0 + 7.0 * static_cast<double>(series[s].name.size());
  }
  if (!caption.empty()) {
    o << "<text x=\"" << left << "\" y=\"" << height - 14 << "\" font-size=\"11\">" << esc(caption) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string histogram_svg(const std::string& title, const Histogram& h) {
  std::vector<std::string> categories;
  BarSeries s{"agents", {}, {}};
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    categories.push_back(b % 5 == 0 ? fmt(static_cast<double>(b) * h.bin_width) : "");
    s.values.emplace_back(static_cast<double>(h.counts[b]));
  }
  char caption[160];
  std::snprintf(caption, sizeof caption, "truncated at %.1f: %.1f%% of %zu agents lie beyond (not shown)", h.cutoff,
                100.0 * h.tail_fraction(), h.total);
  std::string svg = bar_chart_svg(title, categories, {s}, caption);
  return svg;
}

std::vector<std::filesystem::path> make_plots(const std::filesystem::path& dir, const std::string& kind,
                                              const std::filesystem::path& out_dir) {
  const auto& kinds = plot_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    std::string list;
    for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
    throw UnknownPlotKind("unknown plot kind '" + kind + "' (available: " + list + ")");
  }
  if (!std::filesystem::is_directory(dir)) throw IoError("no such directory: " + dir.string());
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;

  if (kind == "metrics-bars") {
    const auto ct = load_comparison(dir, kind);
    struct Group {
      std::string name;
      std::string title;
      std::vector<std::pair<std::string, std::string>> metrics;
      std::vector<std::string> labels;
    };
    const std::vector<Group> groups{
        {"gamma", "Overexposure to negativity", {{"gamma_mean", "window"}}, {"gamma"}},
        {"modularity",
         "Directed modularity",
         {{"modularity", "retweet_graph"}, {"modularity", "follow_graph"}},
         {"retweets", "follows"}},
        {"opinion_diversity",
         "Opinion diversity (retweet communities)",
         {{"sigma_opinion_intra", "retweet_graph"}, {"sigma_opinion_inter", "retweet_graph"}},
         {"intra", "inter"}},
        {"negativity_diversity",
         "Negativity diversity (retweet communities)",
         {{"sigma_negativity_intra", "retweet_graph"}, {"sigma_negativity_inter", "retweet_graph"}},
         {"intra", "inter"}},
    };
    for (const auto& g : groups) {
      std::vector<BarSeries> series;
      for (const auto& p : ct.policies) {
        BarSeries s{p, {}, {}};
        for (const auto& [metric, scope] : g.metrics) {
          const auto it = ct.cells.find({p, metric, scope});
          s.values.push_back(it == ct.cells.end() ? std::nullopt : std::optional<double>(it->second.first));
          s.errors.push_back(it == ct.cells.end() ? 0.0 : it->second.second);
        }
        series.push_back(std::move(s));
      }
      const auto path = out_dir / ("metrics_" + g.name + ".svg");
      write_text(path, bar_chart_svg(g.title, g.labels, series, "bars: mean over repetitions; whiskers: one std",
                                     g.name == "gamma" ? std::optional<double>(1.0) : std::nullopt));
      written.push_back(path);
    }
  } else if (kind == "gamma-hist") {
    if (std::filesystem::exists(dir / "gamma_values.csv")) {
      const auto t = read_csv(dir / "gamma_values.csv");
      const auto cp = t.column("policy");
      const auto cg = t.column("gamma");
      std::map<std::string, std::vector<double>> by_policy;
      std::vector<std::string> order;
      for (const auto& row : t.rows) {
        if (!by_policy.contains(row[cp])) order.push_back(row[cp]);
        by_policy[row[cp]].push_back(parse_double(row[cg], "gamma_values.csv"));
      }
      for (const auto& p : order) {
        const auto path = out_dir / ("gamma_hist_" + p + ".svg");
        write_text(path, histogram_svg("Overexposure distribution, " + p, gamma_histogram(by_policy[p])));
        written.push_back(path);
      }
    } else {
      require(dir / "gamma_per_agent.csv", kind);
      const auto values = parse_column(read_csv(dir / "gamma_per_agent.csv"), "gamma");
      const auto path = out_dir / "gamma_hist.svg";
      write_text(path, histogram_svg("Overexposure distribution", gamma_histogram(values)));
      written.push_back(path);
    }
  } else {
    std::vector<std::string> bins;
    std::vector<BarSeries> series;
    auto add_bin = [&](const std::string& scope) {
      const auto it = std::find(bins.begin(), bins.end(), scope);
      if (it != bins.end()) return static_cast<std::size_t>(it - bins.begin());
      bins.push_back(scope);
      return bins.size() - 1;
    };
    const std::vector<std::string> order{"nu_0", "nu_0-0.25", "nu_0.25-0.5", "nu_0.5-0.75", "nu_0.75-1", "nu_1"};
    for (const auto& b : order) add_bin(b);
    if (std::filesystem::exists(dir / "comparison.csv")) {
      const auto ct = load_comparison(dir, kind);
      for (const auto& p : ct.policies) {
        BarSeries s{p, std::vector<std::optional<double>>(bins.size()), std::vector<double>(bins.size(), 0.0)};
        for (std::size_t b = 0; b < bins.size(); ++b) {
          const auto it = ct.cells.find({p, "social_power_ratio", bins[b]});
          if (it != ct.cells.end()) {
            s.values[b] = it->second.first;
            s.errors[b] = it->second.second;
          }
        }
        series.push_back(std::move(s));
      }
    } else {
      require(dir / "summary.json", kind);
      std::ifstream in(dir / "summary.json");
      const auto j = nlohmann::json::parse(in);
      BarSeries s{j.value("policy", std::string("run")), std::vector<std::optional<double>>(bins.size()), {}};
      if (j.at("metrics").contains("social_power_ratio")) {
        for (std::size_t b = 0; b < bins.size(); ++b) {
          const auto& m = j["metrics"]["social_power_ratio"];
          if (m.contains(bins[b])) s.values[b] = m[bins[b]].get<double>();
        }
      }
      series.push_back(std::move(s));
    }
    std::vector<std::string> labels;
    for (const auto& b : bins) labels.push_back(b.substr(3));
    const auto path = out_dir / "social_power.svg";
    write_text(path, bar_chart_svg("Over-representation among the most popular, by negativity", labels, series,
                                   "ratio of top-quantile share to population share; dashed line: parity", 1.0));
    written.push_back(path);
  }
  return written;
}

}  // namespace feedsim::cli
