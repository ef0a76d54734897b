#include "feedsim/recommender.hpp"

#include <algorithm>
#include <numeric>

#include "feedsim/errors.hpp"

namespace feedsim {

void EngagementHistory::record_impression(AgentId reader, AgentId author, Day t) {
  readers_[reader].ties.try_emplace(author, Tie{0, t});
}

void EngagementHistory::record_retweet(AgentId reader, const Message& m, Day t) {
  auto& r = readers_[reader];
  ++r.retweets;
  if (m.negative()) ++r.negative_retweets;
  auto [it, inserted] = r.ties.try_emplace(m.author, Tie{0, t});
  ++it->second.retweets;
}

void EngagementHistory::record_publication(AgentId author) { ++authors_[author].published; }

void EngagementHistory::record_retweet_received(AgentId author) { ++authors_[author].retweets_received; }

FeatureVector extract_features(AgentId reader, const FeedItem& item, Day t, const EngagementHistory& history,
                               const MessageStore& store) {
  const Message& m = store.message(item.message);
  const auto& r = history.reader(reader);
  const auto& a = history.author(m.author);
  FeatureVector f;
  f.msg_is_negative = m.negative() ? 1.0 : 0.0;
  f.user_past_negativity_share =
      r.retweets > 0 ? static_cast<double>(r.negative_retweets) / static_cast<double>(r.retweets) : 0.0;
  f.author_avg_retweets =
      a.published > 0 ? static_cast<double>(a.retweets_received) / static_cast<double>(a.published) : 0.0;
  f.msg_retweet_count = static_cast<double>(m.retweet_count);
  if (const auto it = r.ties.find(m.author); it != r.ties.end() && it->second.retweets > 0) {
    const double elapsed = std::max(1.0, static_cast<double>(t - it->second.first_seen));
    f.user_author_share_freq = static_cast<double>(it->second.retweets) / elapsed;
  }
  return f;
}

std::vector<std::size_t> rank_order(PolicyKind policy, const Predictor* predictor, std::span<const FeedItem> candidates,
                                    std::span<const FeatureRow> features, const MessageStore& store) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool learned = policy != PolicyKind::chrono && predictor != nullptr && predictor->trained();
  if (!learned) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& ma = store.message(candidates[a].message);
      const auto& mb = store.message(candidates[b].message);
      if (ma.t_pub != mb.t_pub) return ma.t_pub > mb.t_pub;
      return ma.id > mb.id;
    });
    return order;
  }
  if (features.size() != candidates.size()) throw std::invalid_argument("rank_order: feature count mismatch");
  std::vector<double> score(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) score[i] = predictor->predict(features[i]);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return candidates[a].message > candidates[b].message;
  });
  return order;
}

std::vector<FeedItem> rank_feed(PolicyKind policy, const Predictor* predictor, std::span<const FeedItem> candidates,
                                std::span<const FeatureRow> features, const MessageStore& store) {
  std::vector<FeedItem> out;
  out.reserve(candidates.size());
  for (const auto i : rank_order(policy, predictor, candidates, features, store)) out.push_back(candidates[i]);
  return out;
}

std::unique_ptr<Predictor> make_predictor(PolicyKind policy, const LearnerConfig& config) {
  if (policy == PolicyKind::chrono) return nullptr;
  const auto cols = policy_features(policy);
  std::vector<std::size_t> columns(cols.begin(), cols.end());
  if (config.kind == LearnerKind::logistic) return std::make_unique<LogisticRegression>(std::move(columns), config.logistic);
  return std::make_unique<GradientBoostedTrees>(std::move(columns), config.trees);
}

void TrainingWindow::append_day(Day t, std::vector<ImpressionRecord> records) {
  days_.emplace_back(t, std::move(records));
  while (!days_.empty() && days_.front().first <= t - window_days_) days_.erase(days_.begin());
}

std::size_t TrainingWindow::size() const noexcept {
  std::size_t n = 0;
  for (const auto& d : days_) n += d.second.size();
  return n;
}

void TrainingWindow::training_set(Rng& rng, std::vector<FeatureRow>& rows, std::vector<std::uint8_t>& labels) const {
  rows.clear();
  labels.clear();
  const std::size_t total = size();
  std::vector<std::size_t> keep;
  if (total > max_records_) {
    // Uniform subsample without replacement, kept in log order.
    keep.resize(total);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    for (std::size_t i = 0; i < max_records_; ++i) std::swap(keep[i], keep[i + rng.below(total - i)]);
    keep.resize(max_records_);
    std::sort(keep.begin(), keep.end());
  }
  rows.reserve(std::min(total, max_records_));
  labels.reserve(rows.capacity());
  std::size_t index = 0;
  std::size_t next = 0;
  for (const auto& [t, records] : days_) {
    for (const auto& rec : records) {
      if (keep.empty() || (next < keep.size() && keep[next] == index)) {
        rows.push_back(rec.features);
        labels.push_back(rec.was_retweeted ? 1 : 0);
        ++next;
      }
      ++index;
    }
  }
}

}  // namespace feedsim
