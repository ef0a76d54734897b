#include "feedsim/policy.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "feedsim/errors.hpp"

namespace feedsim {

std::string_view feature_name(std::size_t column) noexcept {
  static constexpr std::array<std::string_view, kNumFeatures> names{
      "msg_is_negative", "user_past_negativity_share", "author_avg_retweets", "msg_retweet_count",
      "user_author_share_freq"};
  return column < names.size() ? names[column] : "unknown";
}

std::string_view to_string(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::chrono: return "Chrono";
    case PolicyKind::neg: return "Neg";
    case PolicyKind::pop: return "Pop";
    case PolicyKind::popneg: return "PopNeg";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "chrono") return PolicyKind::chrono;
  if (lower == "neg") return PolicyKind::neg;
  if (lower == "pop") return PolicyKind::pop;
  if (lower == "popneg") return PolicyKind::popneg;
  throw ConfigError("unknown policy '" + std::string(name) + "' (expected Chrono, Neg, Pop or PopNeg)");
}

std::span<const std::size_t> policy_features(PolicyKind kind) noexcept {
  static constexpr std::array<std::size_t, 2> neg{0, 1};
  static constexpr std::array<std::size_t, 3> pop{2, 3, 4};
  static constexpr std::array<std::size_t, 5> all{0, 1, 2, 3, 4};
  switch (kind) {
    case PolicyKind::chrono: return {};
    case PolicyKind::neg: return neg;
    case PolicyKind::pop: return pop;
    case PolicyKind::popneg: return all;
  }
  return {};
}

}  // namespace feedsim
