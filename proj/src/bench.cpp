#include "gfm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "gfm/errors.hpp"
#include "gfm/projection.hpp"

namespace gfm {

std::vector<RecordedInstance> record_fault_instances(const ParameterSet& params,
                                                     std::size_t max_count) {
  std::vector<RecordedInstance> all;
  const double t0 = params.number("fault.start");
  const double t1 = t0 + params.number("fault.duration");
  RunOptions opts;
  opts.observer = [&](int, double t, const ConstraintAwareController& ctrl,
                      const ControllerState& state, const FilterMeasurement& meas) {
    if (t < t0 || t > t1) return;
    RecordedInstance r{ctrl.snapshot(state, meas), ctrl.config().w_theta()};
    if (intersection_nonempty(r.inst.set.discs())) all.push_back(r);
  };
  ParameterSet p = params;
  p.set("controller.kind", "constraint_aware");
  run_scenario("ib_fault", p, opts);
  if (all.size() <= max_count) return all;
  std::vector<RecordedInstance> thinned;
  thinned.reserve(max_count);
  for (std::size_t k = 0; k < max_count; ++k) thinned.push_back(all[k * all.size() / max_count]);
  return thinned;
}

namespace {

DiscTriple<Frame::Stationary> to_stationary(const FeasibleSet& set) {
  DiscTriple<Frame::Stationary> out;
  const auto d = set.discs();
  for (std::size_t k = 0; k < 3; ++k) {
    out[k] = {to_alpha_beta(d[k].center, set.frame_angle), d[k].radius};
  }
  return out;
}

AlphaBeta admm_solution(const RecordedInstance& r, const AdmmConfig& cfg) {
  const ProjectionInstance& in = r.inst;
  const ProjectionResult res = admm_project(Dq{in.v_hat, 0.0}, in.set, cfg, in.v_hat);
  return to_alpha_beta(res.v_dq, in.set.frame_angle);
}

}  // namespace

std::vector<BenchRow> bench_projection(const std::vector<RecordedInstance>& instances, int repeats,
                                       int oracle_samples) {
  if (instances.empty()) throw ConfigError("no instances to benchmark");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");

  // Reference solutions.
  std::vector<AlphaBeta> reference;
  reference.reserve(instances.size());
  for (const auto& r : instances) {
    const PolarVoltage pv = polar_project_oracle(r.inst.theta_hat, r.inst.v_hat,
                                                 to_stationary(r.inst.set), r.w_theta, oracle_samples);
    reference.push_back(to_alpha_beta(Dq{pv.magnitude, 0.0}, pv.theta));
  }

  struct Config {
    std::string name;
    double rho;
    int n_it;
    bool oracle;
  };
  const std::vector<Config> configs{{"admm_rho5_n5", 5.0, 5, false},
                                    {"admm_rho1_n10", 1.0, 10, false},
                                    {"polar_oracle", 0.0, 0, true}};
  std::vector<BenchRow> rows;
  volatile double sink = 0.0;
  for (const auto& c : configs) {
    BenchRow row;
    row.name = c.name;
    row.min_us = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t k = 0; k < instances.size(); ++k) {
      const RecordedInstance& r = instances[k];
      AdmmConfig cfg;
      cfg.rho = c.rho;
      cfg.n_it = std::max(1, c.n_it);
      cfg.w_theta = r.w_theta;
      const DiscTriple<Frame::Stationary> ab = to_stationary(r.inst.set);

      AlphaBeta sol;
      const auto start = std::chrono::steady_clock::now();
      for (int rep = 0; rep < repeats; ++rep) {
        if (c.oracle) {
          const PolarVoltage pv =
              polar_project_oracle(r.inst.theta_hat, r.inst.v_hat, ab, r.w_theta, oracle_samples);
          sol = to_alpha_beta(Dq{pv.magnitude, 0.0}, pv.theta);
        } else {
          sol = admm_solution(r, cfg);
        }
        sink = sink + sol.x;
      }
      const double us =
          std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count() /
          repeats;
      row.min_us = std::min(row.min_us, us);
      row.max_us = std::max(row.max_us, us);
      total += us;
      row.max_deviation = std::max(row.max_deviation, (sol - reference[k]).norm());
    }
    row.mean_us = total / static_cast<double>(instances.size());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gfm
