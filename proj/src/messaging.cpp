#include "feedsim/messaging.hpp"

#include <stdexcept>

#include "feedsim/errors.hpp"

namespace feedsim {

MessageStore::MessageStore(std::size_t n_agents)
    : emitted_yesterday_(n_agents), emitted_today_(n_agents), retweeted_(n_agents) {}

const Message& MessageStore::publish(AgentId author, Opinion current, double negativity, Day t, Rng& rng) {
  if (t != day_) throw std::logic_error("publish: day mismatch");
  Message m;
  m.id = static_cast<MessageId>(messages_.size());
  m.author = author;
  m.author_opinion = current;
  m.valence = rng.bernoulli(negativity) ? Valence::negative : Valence::neutral;
  m.t_pub = t;
  messages_.push_back(m);
  emitted_today_[author].push_back(m.id);
  return messages_.back();
}

std::optional<RetweetEvent> MessageStore::retweet(AgentId agent, const FeedItem& item, Day t) {
  if (t != day_) throw std::logic_error("retweet: day mismatch");
  auto& m = messages_.at(item.message);
  if (m.author == agent) return std::nullopt;
  if (!retweeted_[agent].insert(m.id).second) return std::nullopt;
  ++m.retweet_count;
  emitted_today_[agent].push_back(m.id);
  RetweetEvent ev{t, agent, m.author, m.id};
  retweet_log_.push_back(ev);
  return ev;
}

std::vector<FeedItem> MessageStore::collect_candidates(AgentId reader, Day t, const SubscriptionGraph& graph) const {
  std::vector<FeedItem> out;
  collect_candidates(reader, t, graph, out);
  return out;
}

void MessageStore::collect_candidates(AgentId reader, Day t, const SubscriptionGraph& graph,
                                      std::vector<FeedItem>& out) const {
  if (t != day_) throw std::logic_error("collect_candidates: day mismatch");
  out.clear();
  const auto& mine = retweeted_[reader];
  for (const auto& sub : graph.sources(reader)) {
    for (const MessageId id : emitted_yesterday_[sub.source]) {
      if (messages_[id].author == reader || mine.contains(id)) continue;
      out.push_back({id, sub.source, t});
    }
  }
}

void MessageStore::end_day() {
  for (std::size_t i = 0; i < emitted_today_.size(); ++i) {
    emitted_yesterday_[i].swap(emitted_today_[i]);
    emitted_today_[i].clear();
  }
  ++day_;
}

MessageLog::MessageLog(const std::filesystem::path& path) : path_(path), out_(path) {
  if (!out_) throw IoError("cannot write message log: " + path.string());
  out_ << "t,msg_id,author,relayer,reader,event\n";
}

void MessageLog::publish(Day t, const Message& m) {
  out_ << t << ',' << m.id << ',' << m.author << ",,,publish\n";
}

void MessageLog::event(Day t, const Message& m, AgentId relayer, AgentId reader, std::string_view kind) {
  out_ << t << ',' << m.id << ',' << m.author << ',' << relayer << ',' << reader << ',' << kind << '\n';
}

void MessageLog::flush() {
  out_.flush();
  if (!out_) throw IoError("failed writing message log: " + path_.string());
}

}  // namespace feedsim
