// Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
// the number of failed criteria (0 when everything passes).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <future>
#include <random>
#include <string>
#include <vector>

#include "gfm/bench.hpp"
#include "gfm/constraints.hpp"
#include "gfm/projection.hpp"
#include "gfm/scenarios.hpp"
#include "oracles.hpp"

using namespace gfm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunResult fault_run(double rho, int n_it) {
  ParameterSet p = scenario_defaults("ib_fault");
  p.set("controller.rho", rho);
  p.set("controller.n_it", n_it);
  return run_scenario("ib_fault", p);
}

Outcome criterion1() {
  const ParameterSet p = scenario_defaults("ib_fault");
  const RunResult r = run_scenario("ib_fault", p);
  const double cycle = 1.0 / 60.0;
  const double peak = r.metrics.peak_current;
  const double reach = r.extras.at("time_to_95pct_limit");
  const double settle = r.metrics.settle_time_voltage;
  const bool fidelity = p.number("sim.tau_sim") == 1e-6 && p.number("sim.t_end") == 1.5;
  const bool pass = fidelity && peak <= 1.26 && reach <= 16.7e-3 && settle <= 2.0 * cycle &&
                    r.wall_seconds < 60.0;
  return {pass, fmt("peak %.4f pu (<= 1.26), 95%% of i_max after %.2f ms (<= 16.7), "
                    "|v_f| settles in %.2f ms (<= 33.3), runtime %.2f s (< 60)",
                    peak, reach * 1e3, settle * 1e3, r.wall_seconds)};
}

Outcome criterion2() {
  const double target = 1.015;
  bool pass = true;
  std::string detail;
  for (auto [rho, n] : {std::pair{1.0, 10}, std::pair{5.0, 5}}) {
    const RunResult r = fault_run(rho, n);
    const double f = r.metrics.freq_mean_during_event;
    const double err = std::abs(f - target) / target;
    pass = pass && err <= 0.005;
    detail += fmt("ADMM(rho=%g,n=%d): %.5f pu, error %.3f%%; ", rho, n, f, 100.0 * err);
  }
  return {pass, detail + "bound 0.5%"};
}

Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  oracle::InstanceGenerator gen(20240601);
  const oracle::QcqpOracle qo;
  const int count = 500;
  int fail100 = 0;
  int fail5 = 0;
  int missing = 0;
  double worst100 = 0.0;
  double worst5 = 0.0;
  for (int k = 0; k < count; ++k) {
    const oracle::RandomInstance in = gen.next();
    const auto ref = qo.solve(oracle::circles(in.set), in.v_hat, 0.0, 1.0,
                              in.w_theta / (in.v_hat * in.v_hat));
    if (!ref) {
      ++missing;
      continue;
    }
    auto deviation = [&](double rho, int n_it) {
      AdmmConfig cfg;
      cfg.rho = rho;
      cfg.n_it = n_it;
      cfg.w_theta = in.w_theta;
      const ProjectionResult r = admm_project(Dq{in.v_hat, 0.0}, in.set, cfg, in.v_hat);
      return std::hypot(r.v_dq.x - (*ref)[0], r.v_dq.y - (*ref)[1]);
    };
    const double d100 = deviation(5.0, 100);
    const double d5 = deviation(5.0, 5);
    worst100 = std::max(worst100, d100);
    worst5 = std::max(worst5, d5);
    fail100 += d100 > 1e-3;
    fail5 += d5 > 2e-2;
  }
  const double elapsed = seconds_since(t0);
  const bool pass = fail100 == 0 && fail5 == 0 && missing == 0 && elapsed < 300.0;
  return {pass, fmt("%d instances: ADMM(rho=5,n=100) worst %.2e pu, %d above 1e-3; "
                    "ADMM(rho=5,n=5) worst %.2e pu, %d above 2e-2; %.1f s",
                    count, worst100, fail100, worst5, fail5, elapsed)};
}

Outcome criterion4() {
  const ConverterRatings r = oracle::small_converter();
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int tested = 0;
  int violations = 0;
  int norm_form_tested = 0;
  int norm_form_violations = 0;
  while (tested < 10000) {
    Measurements m;
    m.i_f = rotate(AlphaBeta{r.i_max * std::sqrt(unit(rng)), 0.0}, angle(rng));
    m.v_f = rotate(AlphaBeta{1.25 * std::sqrt(unit(rng)), 0.0}, angle(rng));
    m.v_ad = rotate(AlphaBeta{0.1 * unit(rng), 0.0}, angle(rng));
    const auto discs = build_discs_alpha_beta(m, oracle::nominal_omega(), r, 1e-4, 20e-3);
    const AlphaBeta point = m.v_f + m.v_ad;
    bool inside = true;
    for (const auto& d : discs) inside = inside && d.contains(point, 1e-12);
    // The stricter reading ||v_f + v_ad|| <= V_max is tallied for information.
    if (m.i_f.norm() <= r.i_max && point.norm() <= r.v_max) {
      ++norm_form_tested;
      norm_form_violations += !inside;
    }
    if (!feasibility_precondition_holds(m, r)) continue;
    ++tested;
    violations += !inside || !intersection_nonempty(discs);
  }
  return {violations == 0,
          fmt("%d states with ||i_f|| <= i_max and v_f + v_ad in the modulation disc: %d "
              "violations (for information: %d of %d states with ||v_f + v_ad|| <= V_max fall "
              "outside)",
              tested, violations, norm_form_violations, norm_form_tested)};
}

Outcome criterion5() {
  const ConverterRatings r = oracle::small_converter();
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  std::uniform_real_distribution<double> omega_pu(0.9, 1.1);
  std::uniform_real_distribution<double> log_tau(std::log(2e-5), std::log(20e-3));
  std::uniform_real_distribution<double> scale(0.0, 3.0);
  double worst = 0.0;
  int misclassified = 0;
  int classified = 0;
  for (int k = 0; k < 1000; ++k) {
    PredictionContext<Frame::Stationary> ctx{{u(rng), u(rng)},
                                             {u(rng), u(rng)},
                                             {small(rng), small(rng)},
                                             omega_pu(rng) * oracle::nominal_omega(),
                                             std::exp(log_tau(rng))};
    const Disc<Frame::Stationary> d = current_disc(ctx, r);
    for (int s = 0; s < 64; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / 64.0;
      const AlphaBeta p = d.center + rotate(AlphaBeta{d.radius, 0.0}, phi);
      worst = std::max(worst, std::abs(predict_current(ctx, p, r).norm() - r.i_max) / r.i_max);
      // Interior / exterior: radial scalings away from the boundary band.
      double f = scale(rng);
      if (std::abs(f - 1.0) < 1e-6) f = 1.0 + 1e-3;
      const AlphaBeta q = d.center + rotate(AlphaBeta{f * d.radius, 0.0}, phi + 0.37);
      const bool in_disc = d.contains(q);
      const bool in_limit = predict_current(ctx, q, r).norm() <= r.i_max;
      misclassified += in_disc != in_limit;
      ++classified;
    }
  }
  return {worst <= 1e-7 && misclassified == 0,
          fmt("64000 boundary samples: worst relative error %.2e (<= 1e-7); %d of %d "
              "interior/exterior samples misclassified",
              worst, misclassified, classified)};
}

Outcome criterion6() {
  const ParameterSet base = scenario_defaults("ib_robustness");
  const std::vector<double> ls{0.9, 1.0, 1.05, 1.06, 1.07, 1.08};
  const std::vector<RobustnessRow> rows = robustness_sweep(base, ls, {1.0});
  const double i_max = base.number("limits.i_max");
  auto row = [&](double l) {
    for (const auto& r : rows) {
      if (std::abs(r.l_ratio - l) < 1e-9) return r;
    }
    return RobustnessRow{};
  };
  const bool matched = std::abs(row(1.0).steady - i_max) <= 0.01 * i_max;
  const bool under = row(0.9).steady < i_max;
  const bool over = row(1.05).steady <= 1.05 * i_max;
  const bool osc = row(1.07).oscillating && row(1.08).oscillating && !row(1.05).oscillating;
  std::string table;
  for (const auto& r : rows) {
    table += fmt("l=%.2f steady %.4f osc %d; ", r.l_ratio, r.steady, r.oscillating ? 1 : 0);
  }
  return {matched && under && over && osc, table};
}

Outcome criterion7() {
  const RunResult r = run_scenario("ib_freq_drop", scenario_defaults("ib_freq_drop"));
  const double i = r.metrics.steady_current;
  const double vmin = r.extras.at("voltage_min_in_event");
  const double vmax = r.extras.at("voltage_max_in_event");
  const bool pass = std::abs(i - 1.10) <= 0.03 && !r.metrics.lost_sync && vmin >= 0.85 &&
                    vmax <= 1.1;
  return {pass, fmt("steady current %.4f pu (1.10 +/- 0.03), lost_sync %s, |v_f| in [%.3f, %.3f]",
                    i, r.metrics.lost_sync ? "yes" : "no", vmin, vmax)};
}

Outcome criterion8() {
  auto run = [](const char* kind) {
    ParameterSet p = scenario_defaults("comparison_timeline");
    p.set("controller.kind", kind);
    return run_scenario("comparison_timeline", p);
  };
  auto ca = std::async(std::launch::async, run, "constraint_aware");
  auto crl = std::async(std::launch::async, run, "current_ref_limit");
  auto vvi = std::async(std::launch::async, run, "variable_vi");
  const RunResult a = ca.get();
  const RunResult b = crl.get();
  const RunResult c = vvi.get();
  const double i_max = a.params.number("limits.i_max");
  const bool ca_ok = !a.metrics.lost_sync;
  const bool crl_ok = b.extras.at("lost_sync_after_fault") > 0.5;
  const double vvi_peak = c.extras.at("peak_current_freq_drop");
  const bool vvi_ok = vvi_peak > i_max;
  return {ca_ok && crl_ok && vvi_ok,
          fmt("constraint-aware lost_sync %s; current-reference limiter lost_sync after fault "
              "%s; variable VI peak in frequency drop %.3f pu (limit %.2f)",
              ca_ok ? "no" : "yes", crl_ok ? "yes" : "no", vvi_peak, i_max)};
}

Outcome criterion9() {
  const ParameterSet base = scenario_defaults("overload_trial");
  auto margin = [&](const char* kind) {
    ParameterSet p = base;
    p.set("controller.kind", kind);
    return overload_margin(p).max_total_load_mw;
  };
  auto ca = std::async(std::launch::async, margin, "constraint_aware");
  auto crl = std::async(std::launch::async, margin, "current_ref_limit");
  auto vvi = std::async(std::launch::async, margin, "variable_vi");
  const double a = ca.get();
  const double b = crl.get();
  const double c = vvi.get();
  const bool pass = a > b && b > c && a >= 1.45 && c <= 1.40;
  return {pass, fmt("max total load: constraint-aware %.2f MW, current-reference limiter %.2f MW, "
                    "variable VI %.2f MW",
                    a, b, c)};
}

Outcome criterion10() {
  const auto inst = record_fault_instances(scenario_defaults("ib_fault"), 1000);
  const auto rows = bench_projection(inst, 20);
  // Rows: ADMM(5,5), ADMM(1,10), polar oracle.
  const bool enough = inst.size() >= 1000;
  const bool order = rows[2].mean_us > rows[1].mean_us && rows[1].mean_us > rows[0].mean_us;
  return {enough && order, fmt("%zu instances, mean us: oracle %.3f, ADMM(1,10) %.3f, ADMM(5,5) %.3f",
                               inst.size(), rows[2].mean_us, rows[1].mean_us, rows[0].mean_us)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 fault ride-through", criterion1},
      {"2 fault frequency", criterion2},
      {"3 projection vs QCQP oracle", criterion3},
      {"4 non-empty set property", criterion4},
      {"5 disc equivalence", criterion5},
      {"6 robustness sweep", criterion6},
      {"7 frequency drop", criterion7},
      {"8 comparison timeline", criterion8},
      {"9 two-bus overload margin", criterion9},
      {"10 projection bench ordering", criterion10},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed;
}
