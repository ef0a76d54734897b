#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "feedsim/network.hpp"
#include "feedsim/opinion.hpp"
#include "feedsim/random.hpp"
#include "feedsim/types.hpp"

namespace feedsim {

enum class Valence : std::uint8_t { neutral = 0, negative = 1 };

struct Message {
  MessageId id = 0;
  AgentId author = 0;
  Opinion author_opinion;  ///< snapshot at publication
  Valence valence = Valence::neutral;
  Day t_pub = 0;
  std::uint32_t retweet_count = 0;  ///< platform-wide, live

  bool negative() const noexcept { return valence == Valence::negative; }
};

/// A message as it arrives in a reader's candidate pool. The relayer is the
/// in-neighbor who authored or retweeted it.
struct FeedItem {
  MessageId message = 0;
  AgentId relayer = 0;
  Day t_arrival = 0;

  friend bool operator==(const FeedItem&, const FeedItem&) = default;
};

struct RetweetEvent {
  Day t = 0;
  AgentId retweeter = 0;
  AgentId author = 0;
  MessageId message = 0;
};

/// All messages ever published, the one-day delivery buffers and the
/// retweet log. Messages live for exactly one day in followers' pools after
/// each publication or relay.
class MessageStore {
 public:
  MessageStore() = default;
  explicit MessageStore(std::size_t n_agents);

  Day day() const noexcept { return day_; }
  std::size_t num_agents() const noexcept { return emitted_today_.size(); }

  /// Publishes an original carrying the author's current opinion; it is
  /// negative with probability `negativity`.
  const Message& publish(AgentId author, Opinion current, double negativity, Day t, Rng& rng);

  /// Relays a message. Rejected (nullopt, no side effects) if the agent is
  /// the author or has already retweeted the message.
  std::optional<RetweetEvent> retweet(AgentId agent, const FeedItem& item, Day t);

  /// Everything authored or relayed at day t-1 by the reader's current
  /// in-neighbors, minus the reader's own messages and messages the reader
  /// already retweeted. A message relayed by two neighbors appears twice.
  std::vector<FeedItem> collect_candidates(AgentId reader, Day t, const SubscriptionGraph& graph) const;
  void collect_candidates(AgentId reader, Day t, const SubscriptionGraph& graph, std::vector<FeedItem>& out) const;

  /// Closes the day: today's emissions become tomorrow's pool.
  void end_day();

  bool has_retweeted(AgentId agent, MessageId msg) const { return retweeted_[agent].contains(msg); }
  const Message& message(MessageId id) const { return messages_.at(id); }
  std::span<const Message> messages() const noexcept { return messages_; }
  std::span<const RetweetEvent> retweets() const noexcept { return retweet_log_; }

  /// Message ids emitted (published or relayed) by an agent on the previous / current day.
  std::span<const MessageId> emitted_yesterday(AgentId agent) const { return emitted_yesterday_[agent]; }
  std::span<const MessageId> emitted_today(AgentId agent) const { return emitted_today_[agent]; }

  template <class Archive>
  void serialize(Archive& ar);

 private:
  Day day_ = 0;
  std::vector<Message> messages_;
  std::vector<std::vector<MessageId>> emitted_yesterday_;
  std::vector<std::vector<MessageId>> emitted_today_;
  std::vector<std::unordered_set<MessageId>> retweeted_;
  std::vector<RetweetEvent> retweet_log_;
};

/// CSV writer for `t,msg_id,author,relayer,reader,event`. `relayer` and
/// `reader` are empty where they do not apply.
class MessageLog {
 public:
  MessageLog() = default;
  explicit MessageLog(const std::filesystem::path& path);

  bool is_open() const noexcept { return out_.is_open(); }
  void publish(Day t, const Message& m);
  void event(Day t, const Message& m, AgentId relayer, AgentId reader, std::string_view kind);
  void flush();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace feedsim
