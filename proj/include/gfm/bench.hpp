#pragma once

// Timing and accuracy of the projection solvers on recorded instances.

#include <string>
#include <vector>

#include "gfm/controller.hpp"
#include "gfm/scenarios.hpp"

namespace gfm {

/// A projection problem captured from a running controller.
struct RecordedInstance {
  ProjectionInstance inst;
  double w_theta = 0.0;
};

/// Runs the fault scenario and records up to `max_count` feasible instances
/// from the fault window, evenly thinned. Instances are recorded whether or
/// not the candidate is inside the set.
std::vector<RecordedInstance> record_fault_instances(const ParameterSet& params,
                                                     std::size_t max_count);

struct BenchRow {
  std::string name;
  double min_us = 0.0;
  double mean_us = 0.0;
  double max_us = 0.0;
  double max_deviation = 0.0;  ///< pu, against the polar oracle on the same discs
};

/// Times ADMM(rho=5, n=5), ADMM(rho=1, n=10) and the polar oracle. Each
/// instance is solved `repeats` times per timing sample.
std::vector<BenchRow> bench_projection(const std::vector<RecordedInstance>& instances, int repeats,
                                       int oracle_samples = 3600);

}  // namespace gfm
