#include "feedsim/random.hpp"

namespace feedsim {

std::string_view stream_name(Stream s) noexcept {
  switch (s) {
    case Stream::traits: return "traits";
    case Stream::graph: return "graph";
    case Stream::activity: return "activity";
    case Stream::valence: return "valence";
    case Stream::reading: return "reading";
    case Stream::engagement: return "engagement";
    case Stream::rewiring: return "rewiring";
    case Stream::learner: return "learner";
    case Stream::analysis: return "analysis";
    case Stream::dynamics: return "dynamics";
  }
  return "unknown";
}

}  // namespace feedsim
