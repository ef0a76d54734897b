#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "feedsim/messaging.hpp"
#include "feedsim/policy.hpp"
#include "feedsim/predictor.hpp"
#include "feedsim/types.hpp"

namespace feedsim {

struct FeatureVector {
  double msg_is_negative = 0.0;
  double user_past_negativity_share = 0.0;
  double author_avg_retweets = 0.0;
  double msg_retweet_count = 0.0;
  double user_author_share_freq = 0.0;

  FeatureRow row() const noexcept {
    return {msg_is_negative, user_past_negativity_share, author_avg_retweets, msg_retweet_count,
            user_author_share_freq};
  }
};

/// One feed item the scroll loop evaluated for a reader.
struct ImpressionRecord {
  Day t = 0;
  AgentId reader = 0;
  MessageId message = 0;
  FeatureRow features{};
  bool was_read = false;
  bool was_retweeted = false;
};

/// Per-reader and per-author engagement statistics the recommender sees.
class EngagementHistory {
 public:
  struct Tie {
    std::uint32_t retweets = 0;
    Day first_seen = 0;
  };
  struct ReaderStats {
    std::uint32_t retweets = 0;
    std::uint32_t negative_retweets = 0;
    std::unordered_map<AgentId, Tie> ties;  ///< keyed by author
  };
  struct AuthorStats {
    std::uint32_t published = 0;
    std::uint64_t retweets_received = 0;
  };

  EngagementHistory() = default;
  explicit EngagementHistory(std::size_t n_agents) : readers_(n_agents), authors_(n_agents) {}

  /// First exposure of a reader to an author starts the tie clock.
  void record_impression(AgentId reader, AgentId author, Day t);
  void record_retweet(AgentId reader, const Message& m, Day t);
  void record_publication(AgentId author);
  void record_retweet_received(AgentId author);

  const ReaderStats& reader(AgentId id) const { return readers_[id]; }
  const AuthorStats& author(AgentId id) const { return authors_[id]; }
  std::size_t size() const noexcept { return readers_.size(); }

  template <class Archive>
  void serialize(Archive& ar);

 private:
  std::vector<ReaderStats> readers_;
  std::vector<AuthorStats> authors_;
};

/// Features of a candidate at ranking time. Cold starts map to zero.
FeatureVector extract_features(AgentId reader, const FeedItem& item, Day t, const EngagementHistory& history,
                               const MessageStore& store);

/// Returns the order in which to display `candidates` (a permutation of
/// indices). Chrono: newest publication first, ties by descending message id.
/// Learned policies: descending predicted probability, ties by descending
/// message id. An untrained or missing predictor falls back to Chrono.
std::vector<std::size_t> rank_order(PolicyKind policy, const Predictor* predictor, std::span<const FeedItem> candidates,
                                    std::span<const FeatureRow> features, const MessageStore& store);

std::vector<FeedItem> rank_feed(PolicyKind policy, const Predictor* predictor, std::span<const FeedItem> candidates,
                                std::span<const FeatureRow> features, const MessageStore& store);

enum class LearnerKind { trees, logistic };

struct LearnerConfig {
  LearnerKind kind = LearnerKind::trees;
  TreeParams trees;
  LogisticParams logistic;
};

/// Predictor restricted to the policy's features; nullptr for Chrono.
std::unique_ptr<Predictor> make_predictor(PolicyKind policy, const LearnerConfig& config);

/// Sliding window of impression records used for daily retraining.
class TrainingWindow {
 public:
  TrainingWindow(int window_days = 7, std::size_t max_records = 500000)
      : window_days_(window_days), max_records_(max_records) {}

  void append_day(Day t, std::vector<ImpressionRecord> records);
  std::size_t size() const noexcept;

  /// Gathers the window, uniformly subsampled down to max_records with `rng`.
  void training_set(Rng& rng, std::vector<FeatureRow>& rows, std::vector<std::uint8_t>& labels) const;

  template <class Archive>
  void serialize(Archive& ar);

 private:
  int window_days_;
  std::size_t max_records_;
  std::vector<std::pair<Day, std::vector<ImpressionRecord>>> days_;
};

}  // namespace feedsim
