#pragma once

#include <stdexcept>
#include <string>

namespace gfm {

/// Invalid parameters or scenario description. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The current-disc radius formula hit a vanishing denominator
/// (r_f ~ 0 together with omega*tau ~ 2*pi*k).
class NonFiniteRadius : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Polar recovery of a (numerically) zero dq vector.
class ZeroVector : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// No feasible point was found where one was required.
class EmptySet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plant state became non-finite. Maps to CLI exit code 3.
class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(const std::string& what, double t) : std::runtime_error(what), time(t) {}
  double time;
};

/// Feasible set stayed empty longer than the hold policy allows. Exit code 4.
class InfeasibleTrip : public std::runtime_error {
 public:
  InfeasibleTrip(const std::string& what, double t) : std::runtime_error(what), time(t) {}
  double time;
};

}  // namespace gfm
