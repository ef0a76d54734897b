#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace feedsim::cli {

/// Unknown figure kind; the message lists the available ones.
class UnknownPlotKind : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

const std::vector<std::string>& plot_kinds();

struct Histogram {
  double bin_width = 0.1;
  double cutoff = 3.5;
  std::vector<std::size_t> counts;  ///< bins over [0, cutoff)
  std::size_t total = 0;
  std::size_t truncated = 0;  ///< values >= cutoff

  double tail_fraction() const { return total == 0 ? 0.0 : static_cast<double>(truncated) / static_cast<double>(total); }
};

Histogram gamma_histogram(const std::vector<double>& values, double cutoff = 3.5, double bin_width = 0.1);

struct BarSeries {
  std::string name;
  std::vector<std::optional<double>> values;  ///< one per category
  std::vector<double> errors;                 ///< empty or one per category
};

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series, const std::string& caption = "",
                          std::optional<double> reference_line = std::nullopt);

std::string histogram_svg(const std::string& title, const Histogram& h);

/// Renders figures of `kind` from a run or comparison directory into
/// `out_dir` and returns the files written.
std::vector<std::filesystem::path> make_plots(const std::filesystem::path& dir, const std::string& kind,
                                              const std::filesystem::path& out_dir);

}  // namespace feedsim::cli
