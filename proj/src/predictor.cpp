#include "feedsim/predictor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "feedsim/errors.hpp"

namespace feedsim {
namespace {

constexpr std::string_view kMagic = "feedsim-predictor v1";

double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

double logit(double p) noexcept {
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

void put(std::string& out, std::string_view key, std::string_view value) {
  out.append(key).append(" ").append(value).append("\n");
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void corrupt(std::string_view what) {
  throw ConfigError("predictor checkpoint: " + std::string(what));
}

double read_double(std::string_view token) {
  std::string s(token);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) corrupt("bad number '" + s + "'");
  return v;
}

long read_long(std::string_view token) {
  std::string s(token);
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) corrupt("bad integer '" + s + "'");
  return v;
}

/// Next line split into tokens; the first token must equal `key`.
std::vector<std::string_view> expect(std::vector<std::string_view>& lines, std::size_t& pos, std::string_view key) {
  if (pos >= lines.size()) corrupt("truncated before '" + std::string(key) + "'");
  auto tokens = split_ws(lines[pos++]);
  if (tokens.empty() || tokens[0] != key) corrupt("expected '" + std::string(key) + "'");
  return tokens;
}

}  // namespace

Predictor::Predictor(std::vector<std::size_t> columns) : columns_(std::move(columns)) {
  for (const auto c : columns_) {
    if (c >= kNumFeatures) throw ConfigError("predictor: feature column out of range");
  }
}

void Predictor::fit(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels) {
  if (rows.size() != labels.size()) throw std::invalid_argument("predictor: rows and labels differ in length");
  if (rows.empty()) return;
  std::size_t positives = 0;
  for (const auto y : labels) positives += y ? 1 : 0;
  base_rate_ = static_cast<double>(positives) / static_cast<double>(rows.size());
  fit_impl(rows, labels);
  trained_ = true;
}

double Predictor::predict(const FeatureRow& row) const {
  if (!trained_) return base_rate_;
  return predict_impl(row);
}

std::string Predictor::serialize(std::string_view policy_label) const {
  std::string out;
  out.append(kMagic).append("\n");
  put(out, "learner", learner());
  put(out, "policy", policy_label.empty() ? "-" : policy_label);
  std::string cols = std::to_string(columns_.size());
  for (const auto c : columns_) cols += " " + std::to_string(c);
  put(out, "columns", cols);
  put(out, "trained", trained_ ? "1" : "0");
  put(out, "base_rate", hex(base_rate_));
  write_params(out);
  out.append("end\n");
  return out;
}

std::unique_ptr<Predictor> Predictor::deserialize(std::string_view blob) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < blob.size()) {
    const auto nl = blob.find('\n', start);
    const auto line = blob.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty()) lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  if (lines.empty() || lines[0] != kMagic) corrupt("missing version tag");
  std::size_t pos = 1;
  const auto learner = expect(lines, pos, "learner");
  expect(lines, pos, "policy");
  const auto cols = expect(lines, pos, "columns");
  if (cols.size() < 2) corrupt("bad column list");
  const auto ncols = static_cast<std::size_t>(read_long(cols[1]));
  if (cols.size() != ncols + 2) corrupt("bad column list");
  std::vector<std::size_t> columns;
  for (std::size_t i = 0; i < ncols; ++i) columns.push_back(static_cast<std::size_t>(read_long(cols[i + 2])));

  std::unique_ptr<Predictor> p;
  if (learner.size() == 2 && learner[1] == "gbdt") {
    p = std::make_unique<GradientBoostedTrees>(std::move(columns));
  } else if (learner.size() == 2 && learner[1] == "logistic") {
    p = std::make_unique<LogisticRegression>(std::move(columns));
  } else {
    corrupt("unknown learner");
  }
  p->trained_ = read_long(expect(lines, pos, "trained").at(1)) != 0;
  p->base_rate_ = read_double(expect(lines, pos, "base_rate").at(1));
  p->read_params(lines, pos);
  expect(lines, pos, "end");
  return p;
}

std::string Predictor::blob_policy(std::string_view blob) {
  const auto at = blob.find("\npolicy ");
  if (at == std::string_view::npos) return {};
  const auto begin = at + 8;
  const auto end = blob.find('\n', begin);
  std::string label(blob.substr(begin, end - begin));
  return label == "-" ? std::string{} : label;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees

GradientBoostedTrees::GradientBoostedTrees(std::vector<std::size_t> columns, TreeParams params)
    : Predictor(std::move(columns)), params_(params) {
  if (params_.n_trees < 0 || params_.max_depth < 0) throw ConfigError("trees: counts must be non-negative");
  if (!(params_.learning_rate > 0.0)) throw ConfigError("trees: learning_rate must be positive");
  if (!(params_.l2 >= 0.0) || !(params_.min_split_loss >= 0.0) || !(params_.min_child_weight >= 0.0)) {
    throw ConfigError("trees: regularization parameters must be non-negative");
  }
  if (params_.max_bins < 2 || params_.max_bins > 255) throw ConfigError("trees: max_bins must lie in [2, 255]");
}

namespace {

/// Rows that fall into identical bins on every column share one prediction,
/// so training runs on the distinct bin vectors with counts.
struct BinnedData {
  std::vector<std::vector<double>> cuts;  // per used column, ascending
  std::vector<std::uint64_t> keys;        // 8 bits per column
  std::vector<double> count;
  std::vector<double> positives;

  int bin(std::uint64_t key, std::size_t k) const { return static_cast<int>((key >> (8 * k)) & 0xff); }
};

std::vector<double> make_cuts(std::vector<double> values, int max_bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> distinct = values;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> cuts;
  if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t j = 0; j + 1 < distinct.size(); ++j) {
      cuts.push_back(distinct[j] + (distinct[j + 1] - distinct[j]) / 2.0);
    }
    return cuts;
  }
  const std::size_t n = values.size();
  for (int q = 1; q < max_bins; ++q) {
    const double v = values[static_cast<std::size_t>(q) * n / static_cast<std::size_t>(max_bins)];
    if (v > values.front() && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
  }
  return cuts;
}

BinnedData bin_rows(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels,
                    const std::vector<std::size_t>& columns, int max_bins) {
  BinnedData data;
  for (const auto c : columns) {
    std::vector<double> col(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][c];
    data.cuts.push_back(make_cuts(std::move(col), max_bins));
  }
  std::vector<std::pair<std::uint64_t, std::uint8_t>> keyed(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::uint64_t key = 0;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const auto& cuts = data.cuts[k];
      const auto b = static_cast<std::uint64_t>(std::upper_bound(cuts.begin(), cuts.end(), rows[i][columns[k]]) -
                                                cuts.begin());
      key |= b << (8 * k);
    }
    keyed[i] = {key, labels[i] ? std::uint8_t{1} : std::uint8_t{0}};
  }
  std::sort(keyed.begin(), keyed.end());
  for (const auto& [key, y] : keyed) {
    if (data.keys.empty() || data.keys.back() != key) {
      data.keys.push_back(key);
      data.count.push_back(0.0);
      data.positives.push_back(0.0);
    }
    data.count.back() += 1.0;
    data.positives.back() += y;
  }
  return data;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& data, const std::vector<std::size_t>& columns, const TreeParams& params,
              const std::vector<double>& grad, const std::vector<double>& hess)
      : data_(data), columns_(columns), params_(params), grad_(grad), hess_(hess) {}

  GradientBoostedTrees::Tree build() {
    std::vector<std::uint32_t> rows(data_.keys.size());
    std::iota(rows.begin(), rows.end(), 0u);
    grow(rows, 0);
    return std::move(tree_);
  }

  /// Leaf index reached by each unique row, filled during build.
  std::vector<int> leaf_of;

 private:
  int grow(std::vector<std::uint32_t>& rows, int depth) {
    double g = 0.0;
    double h = 0.0;
    for (const auto r : rows) {
      g += grad_[r];
      h += hess_[r];
    }
    const int index = static_cast<int>(tree_.size());
    tree_.push_back({});
    tree_[index].value = -g / (h + params_.l2) * params_.learning_rate;

    if (depth >= params_.max_depth || rows.size() < 2) {
      mark_leaf(rows, index);
      return index;
    }

    const double parent = g * g / (h + params_.l2);
    double best_gain = 0.0;
    int best_k = -1;
    int best_bin = -1;
    for (std::size_t k = 0; k < columns_.size(); ++k) {
      const std::size_t nb = data_.cuts[k].size() + 1;
      if (nb < 2) continue;
      hist_g_.assign(nb, 0.0);
      hist_h_.assign(nb, 0.0);
      for (const auto r : rows) {
        const int b = data_.bin(data_.keys[r], k);
        hist_g_[b] += grad_[r];
        hist_h_[b] += hess_[r];
      }
      double gl = 0.0;
      double hl = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hist_g_[b];
        hl += hist_h_[b];
        const double gr = g - gl;
        const double hr = h - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
        const double gain =
            0.5 * (gl * gl / (hl + params_.l2) + gr * gr / (hr + params_.l2) - parent) - params_.min_split_loss;
        if (gain > best_gain) {
          best_gain = gain;
          best_k = static_cast<int>(k);
          best_bin = static_cast<int>(b);
        }
      }
    }
    if (best_k < 0) {
      mark_leaf(rows, index);
      return index;
    }

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (const auto r : rows) {
      (data_.bin(data_.keys[r], static_cast<std::size_t>(best_k)) <= best_bin ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree_[index].feature = static_cast<int>(columns_[static_cast<std::size_t>(best_k)]);
    tree_[index].threshold = data_.cuts[static_cast<std::size_t>(best_k)][static_cast<std::size_t>(best_bin)];
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_[index].left = l;
    tree_[index].right = r;
    tree_[index].value = 0.0;
    return index;
  }

  void mark_leaf(const std::vector<std::uint32_t>& rows, int index) {
    if (leaf_of.size() != data_.keys.size()) leaf_of.assign(data_.keys.size(), -1);
    for (const auto r : rows) leaf_of[r] = index;
  }

  const BinnedData& data_;
  const std::vector<std::size_t>& columns_;
  const TreeParams& params_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  std::vector<double> hist_g_;
  std::vector<double> hist_h_;
  GradientBoostedTrees::Tree tree_;
};

}  // namespace

void GradientBoostedTrees::fit_impl(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels) {
  trees_.clear();
  base_margin_ = logit(base_rate_);
  if (columns_.empty()) return;

  const BinnedData data = bin_rows(rows, labels, columns_, params_.max_bins);
  const std::size_t u = data.keys.size();
  std::vector<double> margin(u, base_margin_);
  std::vector<double> grad(u);
  std::vector<double> hess(u);
  for (int t = 0; t < params_.n_trees; ++t) {
    for (std::size_t i = 0; i < u; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = data.count[i] * p - data.positives[i];
      hess[i] = data.count[i] * p * (1.0 - p);
    }
    TreeBuilder builder(data, columns_, params_, grad, hess);
    Tree tree = builder.build();
    for (std::size_t i = 0; i < u; ++i) margin[i] += tree[static_cast<std::size_t>(builder.leaf_of[i])].value;
    trees_.push_back(std::move(tree));
  }
}

double GradientBoostedTrees::predict_impl(const FeatureRow& row) const {
  double margin = base_margin_;
  for (const auto& tree : trees_) {
    int i = 0;
    while (tree[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& node = tree[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
    }
    margin += tree[static_cast<std::size_t>(i)].value;
  }
  return sigmoid(margin);
}

void GradientBoostedTrees::write_params(std::string& out) const {
  put(out, "n_trees", std::to_string(params_.n_trees));
  put(out, "max_depth", std::to_string(params_.max_depth));
  put(out, "learning_rate", hex(params_.learning_rate));
  put(out, "l2", hex(params_.l2));
  put(out, "min_split_loss", hex(params_.min_split_loss));
  put(out, "min_child_weight", hex(params_.min_child_weight));
  put(out, "max_bins", std::to_string(params_.max_bins));
  put(out, "base_margin", hex(base_margin_));
  put(out, "trees", std::to_string(trees_.size()));
  for (const auto& tree : trees_) {
    put(out, "tree", std::to_string(tree.size()));
    for (const auto& n : tree) {
      put(out, "node",
          std::to_string(n.feature) + " " + hex(n.threshold) + " " + std::to_string(n.left) + " " +
              std::to_string(n.right) + " " + hex(n.value));
    }
  }
}

void GradientBoostedTrees::read_params(std::vector<std::string_view>& lines, std::size_t& pos) {
  params_.n_trees = static_cast<int>(read_long(expect(lines, pos, "n_trees").at(1)));
  params_.max_depth = static_cast<int>(read_long(expect(lines, pos, "max_depth").at(1)));
  params_.learning_rate = read_double(expect(lines, pos, "learning_rate").at(1));
  params_.l2 = read_double(expect(lines, pos, "l2").at(1));
  params_.min_split_loss = read_double(expect(lines, pos, "min_split_loss").at(1));
  params_.min_child_weight = read_double(expect(lines, pos, "min_child_weight").at(1));
  params_.max_bins = static_cast<int>(read_long(expect(lines, pos, "max_bins").at(1)));
  base_margin_ = read_double(expect(lines, pos, "base_margin").at(1));
  const long count = read_long(expect(lines, pos, "trees").at(1));
  trees_.assign(static_cast<std::size_t>(count), {});
  for (auto& tree : trees_) {
    const long nodes = read_long(expect(lines, pos, "tree").at(1));
    tree.resize(static_cast<std::size_t>(nodes));
    for (auto& n : tree) {
      const auto tok = expect(lines, pos, "node");
      if (tok.size() != 6) corrupt("bad node line");
      n.feature = static_cast<int>(read_long(tok[1]));
      n.threshold = read_double(tok[2]);
      n.left = static_cast<int>(read_long(tok[3]));
      n.right = static_cast<int>(read_long(tok[4]));
      n.value = read_double(tok[5]);
      const long limit = static_cast<long>(tree.size());
      if (n.feature >= static_cast<int>(kNumFeatures) ||
          (n.feature >= 0 && (n.left < 0 || n.left >= limit || n.right < 0 || n.right >= limit))) {
        corrupt("node out of range");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegression::LogisticRegression(std::vector<std::size_t> columns, LogisticParams params)
    : Predictor(std::move(columns)), params_(params) {
  if (!(params_.l2 >= 0.0) || params_.iterations < 1) throw ConfigError("logistic: invalid parameters");
}

void LogisticRegression::fit_impl(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels) {
  const std::size_t d = columns_.size();
  const std::size_t n = rows.size();
  mean_.assign(d, 0.0);
  scale_.assign(d, 1.0);
  for (std::size_t k = 0; k < d; ++k) {
    double s = 0.0;
    for (const auto& r : rows) s += r[columns_[k]];
    mean_[k] = s / static_cast<double>(n);
    double v = 0.0;
    for (const auto& r : rows) v += (r[columns_[k]] - mean_[k]) * (r[columns_[k]] - mean_[k]);
    const double sd = std::sqrt(v / static_cast<double>(n));
    scale_[k] = sd > 0.0 ? sd : 1.0;
  }

  Eigen::MatrixXd x(n, d + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k + 1)) = (rows[i][columns_[k]] - mean_[k]) / scale_[k];
    }
    y(static_cast<Eigen::Index>(i)) = labels[i] ? 1.0 : 0.0;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
  w(0) = logit(base_rate_);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d + 1), params_.l2);
  penalty(0) = 1e-12;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < params_.iterations; ++it) {
    const Eigen::VectorXd p = (x * w).unaryExpr([](double z) { return sigmoid(z); });
    const Eigen::VectorXd grad = inv_n * (x.transpose() * (p - y)) + penalty.cwiseProduct(w);
    const Eigen::VectorXd curv = p.cwiseProduct((Eigen::VectorXd::Ones(p.size()) - p));
    Eigen::MatrixXd hess = inv_n * (x.transpose() * curv.asDiagonal() * x);
    hess.diagonal() += penalty;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    w -= step;
    if (step.norm() < 1e-12) break;
  }
  intercept_ = w(0);
  weights_.assign(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) weights_[k] = w(static_cast<Eigen::Index>(k + 1));
}

double LogisticRegression::predict_impl(const FeatureRow& row) const {
  double z = intercept_;
  for (std::size_t k = 0; k < weights_.size(); ++k) z += weights_[k] * (row[columns_[k]] - mean_[k]) / scale_[k];
  return sigmoid(z);
}

void LogisticRegression::write_params(std::string& out) const {
  put(out, "l2", hex(params_.l2));
  put(out, "iterations", std::to_string(params_.iterations));
  put(out, "intercept", hex(intercept_));
  auto list = [](const std::vector<double>& v) {
    std::string s = std::to_string(v.size());
    for (const double x : v) s += " " + hex(x);
    return s;
  };
  put(out, "weights", list(weights_));
  put(out, "mean", list(mean_));
  put(out, "scale", list(scale_));
}

void LogisticRegression::read_params(std::vector<std::string_view>& lines, std::size_t& pos) {
  params_.l2 = read_double(expect(lines, pos, "l2").at(1));
  params_.iterations = static_cast<int>(read_long(expect(lines, pos, "iterations").at(1)));
  intercept_ = read_double(expect(lines, pos, "intercept").at(1));
  auto list = [&](std::string_view key) {
    const auto tok = expect(lines, pos, key);
    if (tok.size() < 2) corrupt("bad list");
    const auto count = static_cast<std::size_t>(read_long(tok[1]));
    if (tok.size() != count + 2) corrupt("bad list length");
    std::vector<double> v;
    for (std::size_t i = 0; i < count; ++i) v.push_back(read_double(tok[i + 2]));
    return v;
  };
  weights_ = list("weights");
  mean_ = list("mean");
  scale_ = list("scale");
  if (weights_.size() != columns_.size() || mean_.size() != columns_.size() || scale_.size() != columns_.size()) {
    corrupt("parameter count does not match columns");
  }
}

}  // namespace feedsim
