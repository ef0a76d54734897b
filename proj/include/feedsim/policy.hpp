#pragma once

#include <array>
#include <span>
#include <string_view>

namespace feedsim {

/// Columns of a feature row, in storage order.
enum class Feature : std::size_t {
  msg_is_negative = 0,
  user_past_negativity_share = 1,
  author_avg_retweets = 2,
  msg_retweet_count = 3,
  user_author_share_freq = 4,
};

inline constexpr std::size_t kNumFeatures = 5;
using FeatureRow = std::array<double, kNumFeatures>;

std::string_view feature_name(std::size_t column) noexcept;

/// Feed ranking policies: reverse-chronological, or engagement prediction
/// over the sentiment features (Neg), the popularity features (Pop) or both.
enum class PolicyKind { chrono, neg, pop, popneg };

std::string_view to_string(PolicyKind kind) noexcept;
/// Accepts "Chrono", "Neg", "Pop", "PopNeg" (case-insensitive). Throws ConfigError.
PolicyKind parse_policy(std::string_view name);

/// Feature columns visible to a policy's predictor. Empty for Chrono.
std::span<const std::size_t> policy_features(PolicyKind kind) noexcept;

inline constexpr std::array<PolicyKind, 4> kAllPolicies{PolicyKind::chrono, PolicyKind::neg, PolicyKind::pop,
                                                        PolicyKind::popneg};

}  // namespace feedsim
