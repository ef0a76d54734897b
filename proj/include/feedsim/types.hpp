#pragma once

#include <cstdint>

namespace feedsim {

using AgentId = std::uint32_t;
using MessageId = std::uint32_t;
using Day = std::int32_t;

}  // namespace feedsim
