#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedsim/policy.hpp"

namespace feedsim {

/// Estimates P(retweet | features) from impression-level labels. A predictor
/// only ever looks at the feature columns it was constructed with.
class Predictor {
 public:
  explicit Predictor(std::vector<std::size_t> columns);
  virtual ~Predictor() = default;

  virtual std::string_view learner() const noexcept = 0;
  virtual std::unique_ptr<Predictor> clone() const = 0;

  /// Retrains from scratch. An empty record set leaves the predictor unchanged.
  void fit(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels);

  /// Probability in [0, 1]. Untrained predictors return the base rate.
  double predict(const FeatureRow& row) const;

  bool trained() const noexcept { return trained_; }
  double base_rate() const noexcept { return base_rate_; }
  const std::vector<std::size_t>& columns() const noexcept { return columns_; }

  /// Self-describing text blob; doubles are written as hex floats so
  /// deserialize(serialize()) is bit-exact.
  std::string serialize(std::string_view policy_label = "") const;
  static std::unique_ptr<Predictor> deserialize(std::string_view blob);
  /// Policy label stored in a blob, or empty.
  static std::string blob_policy(std::string_view blob);

 protected:
  virtual void fit_impl(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels) = 0;
  virtual double predict_impl(const FeatureRow& row) const = 0;
  virtual void write_params(std::string& out) const = 0;
  virtual void read_params(std::vector<std::string_view>& lines, std::size_t& pos) = 0;

  std::vector<std::size_t> columns_;
  bool trained_ = false;
  double base_rate_ = 0.5;
};

struct TreeParams {
  int n_trees = 50;
  int max_depth = 4;
  double learning_rate = 0.3;
  double l2 = 1.0;                ///< leaf-weight L2 penalty
  double min_split_loss = 10.0;   ///< minimum loss reduction to keep a split
  double min_child_weight = 1.0;  ///< minimum hessian mass per child
  int max_bins = 64;              ///< histogram bins per feature
};

/// Histogram-based gradient-boosted regression trees under logistic loss.
class GradientBoostedTrees final : public Predictor {
 public:
  struct Node {
    int feature = -1;  ///< column index into FeatureRow; -1 for a leaf
    double threshold = 0.0;  ///< x < threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  ///< leaf margin contribution, already shrunk
  };
  using Tree = std::vector<Node>;

  GradientBoostedTrees(std::vector<std::size_t> columns, TreeParams params = {});

  std::string_view learner() const noexcept override { return "gbdt"; }
  std::unique_ptr<Predictor> clone() const override { return std::make_unique<GradientBoostedTrees>(*this); }

  const TreeParams& params() const noexcept { return params_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }
  double base_margin() const noexcept { return base_margin_; }

 protected:
  void fit_impl(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels) override;
  double predict_impl(const FeatureRow& row) const override;
  void write_params(std::string& out) const override;
  void read_params(std::vector<std::string_view>& lines, std::size_t& pos) override;

 private:
  TreeParams params_;
  double base_margin_ = 0.0;
  std::vector<Tree> trees_;
};

struct LogisticParams {
  double l2 = 1e-3;
  int iterations = 30;
};

/// L2-regularized logistic regression on standardized features, fit by Newton's method.
class LogisticRegression final : public Predictor {
 public:
  LogisticRegression(std::vector<std::size_t> columns, LogisticParams params = {});

  std::string_view learner() const noexcept override { return "logistic"; }
  std::unique_ptr<Predictor> clone() const override { return std::make_unique<LogisticRegression>(*this); }

  const std::vector<double>& weights() const noexcept { return weights_; }

 protected:
  void fit_impl(std::span<const FeatureRow> rows, std::span<const std::uint8_t> labels) override;
  double predict_impl(const FeatureRow& row) const override;
  void write_params(std::string& out) const override;
  void read_params(std::vector<std::string_view>& lines, std::size_t& pos) override;

 private:
  LogisticParams params_;
  double intercept_ = 0.0;
  std::vector<double> weights_;
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace feedsim
