#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace feedsim {

/// Invalid or inconsistent configuration, detected at load time.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system failure; the message always names the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A subsystem failed while stepping the simulation.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(std::int64_t day, std::string phase, std::int64_t agent, const std::string& what)
      : std::runtime_error("day " + std::to_string(day) + ", phase " + phase +
                           (agent >= 0 ? ", agent " + std::to_string(agent) : std::string{}) + ": " + what),
        day_(day),
        phase_(std::move(phase)),
        agent_(agent) {}

  std::int64_t day() const noexcept { return day_; }
  const std::string& phase() const noexcept { return phase_; }
  std::int64_t agent() const noexcept { return agent_; }

 private:
  std::int64_t day_;
  std::string phase_;
  std::int64_t agent_;
};

}  // namespace feedsim
