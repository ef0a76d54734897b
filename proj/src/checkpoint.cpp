// Binary checkpoints of the full simulation state.

#include <array>
#include <new>
#include <stdexcept>
#include <string_view>

#include <cereal/archives/binary.hpp>
#include <cereal/types/array.hpp>
#include <cereal/types/deque.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/unordered_map.hpp>
#include <cereal/types/unordered_set.hpp>
#include <cereal/types/utility.hpp>
#include <cereal/types/vector.hpp>

#include "feedsim/engine.hpp"
#include "feedsim/errors.hpp"

namespace feedsim {

namespace {
constexpr char kMagic[] = "feedsim-checkpoint";
constexpr std::uint32_t kVersion = 1;
}  // namespace

template <class Archive>
void save(Archive& ar, const Opinion& o) {
  ar(o.value());
}

template <class Archive>
void load(Archive& ar, Opinion& o) {
  double v = 0.0;
  ar(v);
  o = Opinion(v);
}

template <class Archive>
void serialize(Archive& ar, Subscription& s) {
  ar(s.source, s.delta);
}

template <class Archive>
void serialize(Archive& ar, Message& m) {
  ar(m.id, m.author, m.author_opinion, m.valence, m.t_pub, m.retweet_count);
}

template <class Archive>
void serialize(Archive& ar, RetweetEvent& e) {
  ar(e.t, e.retweeter, e.author, e.message);
}

template <class Archive>
void serialize(Archive& ar, ImpressionRecord& r) {
  ar(r.t, r.reader, r.message, r.features, r.was_read, r.was_retweeted);
}

template <class Archive>
void serialize(Archive& ar, ExposureCounts& c) {
  ar(c.impressions, c.negative_impressions, c.pool, c.negative_pool);
}

template <class Archive>
void serialize(Archive& ar, AgentDay& d) {
  ar(d.publications, d.budget, d.impressions, d.reads, d.retweets, d.opinion_updates);
}

template <class Archive>
void serialize(Archive& ar, DayTotals& d) {
  ar(d.published, d.impressions, d.reads, d.retweets, d.opinion_updates, d.rewires, d.rewire_fallbacks);
}

template <class Archive>
void serialize(Archive& ar, EngagementHistory::Tie& t) {
  ar(t.retweets, t.first_seen);
}

template <class Archive>
void serialize(Archive& ar, EngagementHistory::ReaderStats& r) {
  ar(r.retweets, r.negative_retweets, r.ties);
}

template <class Archive>
void serialize(Archive& ar, EngagementHistory::AuthorStats& a) {
  ar(a.published, a.retweets_received);
}

template <class Archive>
void SubscriptionGraph::serialize(Archive& ar) {
  ar(in_, out_, edges_);
}

template <class Archive>
void MessageStore::serialize(Archive& ar) {
  ar(day_, messages_, emitted_yesterday_, emitted_today_, retweeted_, retweet_log_);
}

template <class Archive>
void EngagementHistory::serialize(Archive& ar) {
  ar(readers_, authors_);
}

template <class Archive>
void TrainingWindow::serialize(Archive& ar) {
  ar(window_days_, max_records_, days_);
}

template <class Archive>
void Simulation::serialize_state(Archive& ar) {
  // Traits other than the acceptance curve, which the config fixes.
  std::vector<std::array<double, 6>> traits(traits_.size());
  for (std::size_t i = 0; i < traits_.size(); ++i) {
    const auto& a = traits_[i];
    traits[i] = {a.lambda, a.neg_bias, a.intrinsic_negativity, a.pub_scale, a.share_scale, a.opinion0.value()};
  }
  ar(traits);
  if (traits.size() != traits_.size()) {
    traits_.assign(traits.size(), AgentTraits{});
    for (std::size_t i = 0; i < traits.size(); ++i) {
      auto& a = traits_[i];
      a.lambda = traits[i][0];
      a.neg_bias = traits[i][1];
      a.intrinsic_negativity = traits[i][2];
      a.pub_scale = traits[i][3];
      a.share_scale = traits[i][4];
      a.opinion0 = Opinion(traits[i][5]);
      a.acceptance = config_.population.traits.acceptance;
    }
  }
  ar(seed_, day_, opinions_, graph_, store_, history_, window_, read_, exposure_total_, exposure_days_, in_degree0_,
     agent_day_, totals_, cumulative_, rng_.draws);
}

void Simulation::save_checkpoint(std::ostream& out) const {
  cereal::BinaryOutputArchive ar(out);
  ar(cereal::binary_data(kMagic, sizeof kMagic - 1), kVersion, config_hash(config_.tree));
  auto& self = const_cast<Simulation&>(*this);
  self.serialize_state(ar);
  ar(predictor_ ? predictor_->serialize(to_string(config_.policy)) : std::string());
  if (!out) throw IoError("checkpoint write failed");
}

Simulation Simulation::load_checkpoint(std::istream& in, SimConfig config) {
  Simulation sim;
  sim.config_ = std::move(config);
  try {
    cereal::BinaryInputArchive ar(in);
    // Fixed-width magic so a foreign file never drives a length prefix.
    std::array<char, sizeof kMagic - 1> magic{};
    std::uint32_t version = 0;
    std::string hash;
    ar(cereal::binary_data(magic.data(), magic.size()));
    if (std::string_view(magic.data(), magic.size()) != kMagic) throw IoError("not a feedsim checkpoint");
    ar(version, hash);
    if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    if (hash != config_hash(sim.config_.tree)) throw ConfigError("checkpoint was written under a different config");
    sim.serialize_state(ar);
    std::string blob;
    ar(blob);
    sim.predictor_ = blob.empty() ? nullptr : Predictor::deserialize(blob);
  } catch (const cereal::Exception& e) {
    throw IoError(std::string("corrupt checkpoint: ") + e.what());
  } catch (const std::length_error&) {
    throw IoError("corrupt checkpoint: impossible container size");
  } catch (const std::bad_alloc&) {
    throw IoError("corrupt checkpoint: impossible container size");
  }
  return sim;
}

}  // namespace feedsim
