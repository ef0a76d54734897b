#include "feedsim/opinion.hpp"

#include <algorithm>
#include <cmath>

#include "feedsim/csv.hpp"
#include "feedsim/errors.hpp"

namespace feedsim {

double wrap_opinion(double x) noexcept {
  if (x > -1.0 && x <= 1.0) return x;
  double y = x - 2.0 * std::ceil((x - 1.0) / 2.0);
  // Rounding in the subtraction can land on the excluded endpoint.
  if (y <= -1.0) y += 2.0;
  if (y > 1.0) y -= 2.0;
  return y;
}

double circ_dist(Opinion a, Opinion b) noexcept {
  const double d = std::fabs(a.value() - b.value());
  return std::min(d, 2.0 - d);
}

double signed_delta(Opinion from, Opinion to) noexcept {
  double d = to.value() - from.value();
  if (d > 1.0) d -= 2.0;
  if (d <= -1.0) d += 2.0;
  return d;
}

Opinion update_opinion(Opinion self, Opinion author, double lambda) noexcept {
  return Opinion(self.value() + lambda * signed_delta(self, author));
}

AcceptanceCurve AcceptanceCurve::exponential(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("acceptance curve: exponential scale must be positive and finite");
  }
  AcceptanceCurve curve;
  curve.scale_ = scale;
  return curve;
}

AcceptanceCurve AcceptanceCurve::tabulated(std::vector<Bin> bins) {
  if (bins.empty()) throw ConfigError("acceptance curve: empty table");
  std::sort(bins.begin(), bins.end(), [](const Bin& a, const Bin& b) { return a.low < b.low; });
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& bin = bins[i];
    if (!(bin.low < bin.high)) throw ConfigError("acceptance curve: bin with low >= high");
    if (!(bin.probability >= 0.0 && bin.probability <= 1.0)) {
      throw ConfigError("acceptance curve: probability outside [0,1]");
    }
    if (i > 0 && bins[i - 1].high != bin.low) throw ConfigError("acceptance curve: bins are not contiguous");
  }
  if (bins.front().low > -1.0 || bins.back().high < 1.0) {
    throw ConfigError("acceptance curve: bins must cover [-1, 1]");
  }
  AcceptanceCurve curve;
  curve.bins_ = std::make_shared<const std::vector<Bin>>(std::move(bins));
  if (curve(0.0) != 1.0) throw ConfigError("acceptance curve: probability at delta = 0 must be 1");
  return curve;
}

AcceptanceCurve AcceptanceCurve::load_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const int lo = table.column("delta_low");
  const int hi = table.column("delta_high");
  const int p = table.column("probability");
  if (lo < 0 || hi < 0 || p < 0) {
    throw ConfigError(path.string() + ": expected header delta_low,delta_high,probability");
  }
  std::vector<Bin> bins;
  for (const auto& row : table.rows) {
    bins.push_back({parse_double(row[lo], path.string()), parse_double(row[hi], path.string()),
                    parse_double(row[p], path.string())});
  }
  return tabulated(std::move(bins));
}

const std::vector<AcceptanceCurve::Bin>& AcceptanceCurve::bins() const {
  static const std::vector<Bin> none;
  return bins_ ? *bins_ : none;
}

double AcceptanceCurve::operator()(double delta) const noexcept {
  if (!bins_) return std::exp(-std::fabs(delta) / scale_);
  const auto& bins = *bins_;
  // First bin whose upper edge exceeds delta; the closing edge belongs to the last bin.
  auto it = std::upper_bound(bins.begin(), bins.end(), delta, [](double d, const Bin& b) { return d < b.high; });
  if (it == bins.end()) return bins.back().probability;
  return it->probability;
}

}  // namespace feedsim
