#include <doctest.h>

#include <algorithm>
#include <set>

#include "feedsim/errors.hpp"
#include "feedsim/predictor.hpp"
#include "feedsim/recommender.hpp"

using namespace feedsim;

namespace {

// Negative messages always retweeted, neutral never; other columns are noise.
void separable_set(Rng& rng, std::vector<FeatureRow>& rows, std::vector<std::uint8_t>& labels) {
  for (int i = 0; i < 600; ++i) {
    const bool neg = i % 3 == 0;
    rows.push_back({neg ? 1.0 : 0.0, rng.uniform(), 5.0 * rng.uniform(), std::floor(10.0 * rng.uniform()),
                    rng.uniform()});
    labels.push_back(neg ? 1 : 0);
  }
}

// Best accuracy of any single threshold on one column.
double threshold_oracle(const std::vector<FeatureRow>& rows, const std::vector<std::uint8_t>& labels, std::size_t col) {
  std::set<double> cuts;
  for (const auto& r : rows) cuts.insert(r[col]);
  double best = 0.0;
  for (double c : cuts) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) hits += (rows[i][col] >= c) == (labels[i] == 1);
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(rows.size()));
  }
  return best;
}

}  // namespace

TEST_CASE("policy feature subsets") {
  auto cols = [](PolicyKind k) {
    const auto s = policy_features(k);
    return std::vector<std::size_t>(s.begin(), s.end());
  };
  CHECK(cols(PolicyKind::chrono).empty());
  CHECK(cols(PolicyKind::neg) == std::vector<std::size_t>{0, 1});
  CHECK(cols(PolicyKind::pop) == std::vector<std::size_t>{2, 3, 4});
  CHECK(cols(PolicyKind::popneg) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(parse_policy("popneg") == PolicyKind::popneg);
  CHECK(to_string(PolicyKind::neg) == "Neg");
  CHECK_THROWS_AS(parse_policy("Random"), ConfigError);
  CHECK(make_predictor(PolicyKind::chrono, {}) == nullptr);
}

TEST_CASE("feature extraction") {
  MessageStore store(3);
  EngagementHistory history(3);
  Rng rng(4);
  const auto& m0 = store.publish(1, Opinion(0.0), 0.0, 0, rng);
  FeedItem item{m0.id, 1, 1};
  store.end_day();
  // Cold start.
  CHECK(extract_features(0, item, 1, history, store).row() == FeatureRow{0, 0, 0, 0, 0});

  // 4 negative out of 10 past retweets.
  MessageStore other(3);
  for (int i = 0; i < 10; ++i) history.record_retweet(0, other.publish(2, Opinion(0.0), i < 4 ? 1.0 : 0.0, 0, rng), 0);
  const auto& neg = store.publish(2, Opinion(0.0), 1.0, 1, rng);
  const auto f = extract_features(0, {neg.id, 2, 2}, 2, history, store);
  CHECK(f.msg_is_negative == 1.0);
  CHECK(f.user_past_negativity_share == doctest::Approx(0.4));
  // 10 retweets of author 2, tie opened at day 0, ranked at day 2.
  CHECK(f.user_author_share_freq == doctest::Approx(5.0));

  // 3 messages totaling 12 retweets.
  EngagementHistory h2(3);
  for (int i = 0; i < 3; ++i) h2.record_publication(1);
  for (int i = 0; i < 12; ++i) h2.record_retweet_received(1);
  CHECK(extract_features(0, item, 1, h2, store).author_avg_retweets == doctest::Approx(4.0));
}

TEST_CASE("chronological ranking") {
  MessageStore store(1);
  Rng rng(1);
  std::vector<FeedItem> items;
  // Published on days 0..3; candidates from days 3, 1, 2.
  std::vector<MessageId> by_day;
  for (Day t = 0; t < 4; ++t) {
    by_day.push_back(store.publish(0, Opinion(0.0), 0.0, t, rng).id);
    store.end_day();
  }
  items = {{by_day[3], 0, 4}, {by_day[1], 0, 4}, {by_day[2], 0, 4}};
  const auto ranked = rank_feed(PolicyKind::chrono, nullptr, items, {}, store);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].message == by_day[3]);
  CHECK(ranked[1].message == by_day[2]);
  CHECK(ranked[2].message == by_day[1]);
  CHECK(rank_feed(PolicyKind::chrono, nullptr, {}, {}, store).empty());

  // An untrained predictor falls back to the same order.
  auto p = make_predictor(PolicyKind::neg, {});
  std::vector<FeatureRow> feats(3, FeatureRow{});
  CHECK(rank_feed(PolicyKind::neg, p.get(), items, feats, store) == ranked);
}

TEST_CASE("degenerate labels give low predictions") {
  Rng rng(2);
  std::vector<FeatureRow> rows;
  std::vector<std::uint8_t> labels;
  separable_set(rng, rows, labels);
  std::fill(labels.begin(), labels.end(), 0);
  for (auto kind : {LearnerKind::trees, LearnerKind::logistic}) {
    LearnerConfig cfg;
    cfg.kind = kind;
    auto p = make_predictor(PolicyKind::popneg, cfg);
    CHECK(p->predict(rows[0]) == doctest::Approx(0.5));
    p->fit(rows, labels);
    CHECK(p->trained());
    for (const auto& r : rows) REQUIRE(p->predict(r) <= 0.05);
    for (int i = 0; i < 100; ++i) {
      const FeatureRow any{rng.uniform(), rng.uniform(), 100.0 * rng.uniform(), 1000.0 * rng.uniform(), rng.uniform()};
      REQUIRE(p->predict(any) <= 0.05);
    }
  }
}

TEST_CASE("separable set: accuracy, learner agreement and ranking") {
  Rng rng(3);
  std::vector<FeatureRow> rows;
  std::vector<std::uint8_t> labels;
  separable_set(rng, rows, labels);
  CHECK(threshold_oracle(rows, labels, 0) == 1.0);

  std::vector<std::unique_ptr<Predictor>> learners;
  for (auto kind : {LearnerKind::trees, LearnerKind::logistic}) {
    LearnerConfig cfg;
    cfg.kind = kind;
    auto p = make_predictor(PolicyKind::neg, cfg);
    p->fit(rows, labels);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) hits += (p->predict(rows[i]) >= 0.5) == (labels[i] == 1);
    CHECK(static_cast<double>(hits) / static_cast<double>(rows.size()) >= 0.99);
    learners.push_back(std::move(p));
  }
  // Both learners put the negative class first.
  const FeatureRow neg{1, 0.3, 0, 0, 0}, neu{0, 0.3, 0, 0, 0};
  for (const auto& p : learners) CHECK(p->predict(neg) > p->predict(neu));

  MessageStore store(2);
  std::vector<FeedItem> items;
  std::vector<FeatureRow> feats;
  for (int i = 0; i < 20; ++i) {
    const auto& m = store.publish(0, Opinion(0.0), i % 2 ? 1.0 : 0.0, 0, rng);
    items.push_back({m.id, 0, 1});
    feats.push_back(FeatureRow{m.negative() ? 1.0 : 0.0, 0.3, 0, 0, 0});
  }
  const auto ranked = rank_feed(PolicyKind::neg, learners[0].get(), items, feats, store);
  bool seen_neutral = false;
  for (const auto& it : ranked) {
    if (!store.message(it.message).negative()) seen_neutral = true;
    else REQUIRE_FALSE(seen_neutral);
  }
}

TEST_CASE("rankings are permutations and ignore masked features") {
  Rng rng(5);
  std::vector<FeatureRow> rows;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 2000; ++i) {
    FeatureRow r{rng.bernoulli(0.3) ? 1.0 : 0.0, rng.uniform(), 4.0 * rng.uniform(), std::floor(8 * rng.uniform()),
                 rng.uniform()};
    const double p = 0.1 + 0.3 * r[0] + 0.05 * r[2] + 0.2 * r[4];
    rows.push_back(r);
    labels.push_back(rng.bernoulli(std::min(p, 1.0)) ? 1 : 0);
  }
  MessageStore store(1);
  std::vector<FeedItem> items;
  std::vector<FeatureRow> feats;
  for (int i = 0; i < 40; ++i) {
    items.push_back({store.publish(0, Opinion(0.0), 0.5, 0, rng).id, 0, 1});
    feats.push_back(rows[static_cast<std::size_t>(i)]);
  }
  for (auto policy : {PolicyKind::neg, PolicyKind::pop, PolicyKind::popneg}) {
    for (auto kind : {LearnerKind::trees, LearnerKind::logistic}) {
      LearnerConfig cfg;
      cfg.kind = kind;
      auto p = make_predictor(policy, cfg);
      p->fit(rows, labels);
      for (const auto& r : rows) {
        const double y = p->predict(r);
        REQUIRE(y >= 0.0);
        REQUIRE(y <= 1.0);
      }
      const auto ranked = rank_feed(policy, p.get(), items, feats, store);
      CHECK(std::is_permutation(ranked.begin(), ranked.end(), items.begin(), items.end()));
      CHECK(rank_feed(policy, p.get(), items, feats, store) == ranked);

      const auto visible = policy_features(policy);
      auto perturbed = feats;
      for (auto& r : perturbed)
        for (std::size_t c = 0; c < kNumFeatures; ++c)
          if (std::find(visible.begin(), visible.end(), c) == visible.end()) r[c] = 100.0 * rng.uniform();
      CHECK(rank_feed(policy, p.get(), items, perturbed, store) == ranked);

      // Retraining after perturbing masked training columns changes nothing either.
      auto rows2 = rows;
      for (auto& r : rows2)
        for (std::size_t c = 0; c < kNumFeatures; ++c)
          if (std::find(visible.begin(), visible.end(), c) == visible.end()) r[c] = -rng.uniform();
      auto q = make_predictor(policy, cfg);
      q->fit(rows2, labels);
      CHECK(rank_feed(policy, q.get(), items, feats, store) == ranked);
    }
  }
}

TEST_CASE("training is deterministic and blobs round-trip bit-exactly") {
  Rng rng(6);
  std::vector<FeatureRow> rows;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 1500; ++i) {
    FeatureRow r{rng.bernoulli(0.4) ? 1.0 : 0.0, rng.uniform(), 3 * rng.uniform(), std::floor(5 * rng.uniform()), rng.uniform()};
    rows.push_back(r);
    labels.push_back(rng.bernoulli(0.1 + 0.5 * r[0] * r[1]) ? 1 : 0);
  }
  for (auto kind : {LearnerKind::trees, LearnerKind::logistic}) {
    LearnerConfig cfg;
    cfg.kind = kind;
    auto a = make_predictor(PolicyKind::popneg, cfg);
    auto b = make_predictor(PolicyKind::popneg, cfg);
    a->fit(rows, labels);
    b->fit(rows, labels);
    const auto blob = a->serialize("PopNeg");
    CHECK(blob == b->serialize("PopNeg"));
    CHECK(Predictor::blob_policy(blob) == "PopNeg");
    auto c = Predictor::deserialize(blob);
    CHECK(c->learner() == a->learner());
    CHECK(c->columns() == a->columns());
    CHECK(c->serialize("PopNeg") == blob);
    for (const auto& r : rows) REQUIRE(c->predict(r) == a->predict(r));

    // Empty training data leaves the model as it was.
    c->fit({}, {});
    CHECK(c->serialize("PopNeg") == blob);
  }
}

TEST_CASE("training window slides and subsamples") {
  TrainingWindow w(2, 5);
  auto day = [](Day t, int n, bool label) {
    std::vector<ImpressionRecord> recs(static_cast<std::size_t>(n));
    for (auto& r : recs) {
      r.t = t;
      r.was_read = label;
      r.was_retweeted = label;
    }
    return recs;
  };
  w.append_day(0, day(0, 3, false));
  w.append_day(1, day(1, 2, true));
  CHECK(w.size() == 5);
  w.append_day(2, day(2, 4, true));
  CHECK(w.size() == 6);
  Rng rng(1);
  std::vector<FeatureRow> rows;
  std::vector<std::uint8_t> labels;
  w.training_set(rng, rows, labels);
  CHECK(rows.size() == 5);
  CHECK(std::count(labels.begin(), labels.end(), 1) == 5);
}
