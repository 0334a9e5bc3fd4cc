// Command-line driver: simulate, sweep, bench-projection.

#include <algorithm>
#include <cmath>
#include <atomic>
#include <filesystem>
#include <functional>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "gfm/bench.hpp"
#include "gfm/config.hpp"
#include "gfm/errors.hpp"
#include "gfm/report.hpp"
#include "gfm/scenarios.hpp"

namespace fs = std::filesystem;
using namespace gfm;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kDiverged = 3, kTrip = 4 };

struct CommonArgs {
  std::string scenario;
  std::string config;
  std::string out = "results";
  std::vector<std::string> overrides;
  double tau_sim = 0.0;
  bool log_full = false;
};

/// Resolves scenario defaults, then the config file, then --tau-sim, then --set.
ParameterSet resolve_parameters(const CommonArgs& a, std::string& scenario, ConfigFile* file_out) {
  ConfigFile file;
  if (!a.config.empty()) file = load_config(a.config);
  scenario = !a.scenario.empty() ? a.scenario : file.scenario;
  if (scenario.empty()) throw ConfigError("no scenario given (use --scenario or a config file)");

  std::string preset = file.preset;
  for (const auto& o : a.overrides) {
    if (o.rfind("preset=", 0) == 0) preset = o.substr(7);
  }
  ParameterSet p = scenario_defaults(scenario, preset);
  for (const auto& [k, v] : file.values) p.set(k, v, true);
  if (a.tau_sim > 0.0) p.set("sim.tau_sim", a.tau_sim);
  std::vector<std::string> rest;
  for (const auto& o : a.overrides) {
    if (o.rfind("preset=", 0) != 0) rest.push_back(o);
  }
  p.apply_overrides(rest);
  if (file_out) *file_out = file;
  return p;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + dir + "'");
}

void write_run(const RunResult& r, const std::string& dir, const std::string& stem) {
  const std::vector<Series>& data = r.full_rate.empty() ? r.series : r.full_rate;
  for (std::size_t c = 0; c < data.size(); ++c) {
    const std::string name = c == 0 ? stem + ".csv" : stem + ".vsc" + std::to_string(c + 1) + ".csv";
    std::ofstream csv(fs::path(dir) / name, std::ios::binary);
    write_series_csv(csv, data[c]);
    if (!csv) throw std::runtime_error("failed writing " + name);
  }
  std::ofstream rep(fs::path(dir) / (stem + ".report.json"));
  rep << std::setw(2) << report_json(r) << '\n';
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const SimulationDiverged& e) {
    std::cerr << "simulation diverged at t=" << e.time << ": " << e.what() << '\n';
    return kDiverged;
  } catch (const InfeasibleTrip& e) {
    std::cerr << "infeasible-set trip at t=" << e.time << ": " << e.what() << '\n';
    return kTrip;
  }
}

int cmd_simulate(const CommonArgs& a) {
  std::string scenario;
  const ParameterSet p = resolve_parameters(a, scenario, nullptr);
  ensure_dir(a.out);
  RunOptions opts;
  opts.log_full = a.log_full;
  const RunResult r = run_scenario(scenario, p, opts);
  write_run(r, a.out, scenario);
  std::cout << scenario << ": peak " << r.metrics.peak_current << " pu, steady "
            << r.metrics.steady_current << " pu, lost_sync " << (r.metrics.lost_sync ? "yes" : "no")
            << ", " << r.wall_seconds << " s\n";
  return kOk;
}

/// Runs tasks on a small worker pool, preserving order.
template <class T>
std::vector<T> parallel_map(std::size_t n, int jobs, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> workers;
  const int count = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  for (int w = 0; w < count; ++w) {
    workers.push_back(std::async(std::launch::async, [&] {
      for (std::size_t k; (k = next++) < n;) out[k] = f(k);
    }));
  }
  for (auto& w : workers) w.get();
  return out;
}

int cmd_sweep(const CommonArgs& a, const std::string& builtin, int jobs) {
  ensure_dir(a.out);
  std::string scenario;
  ConfigFile file;

  if (builtin == "robustness") {
    CommonArgs b = a;
    if (b.scenario.empty()) b.scenario = "ib_robustness";
    const ParameterSet p = resolve_parameters(b, scenario, &file);
    const std::vector<double> l{0.9, 0.95, 1.0, 1.05, 1.06, 1.07, 1.08};
    const std::vector<double> rr{0.0, 0.5, 1.0, 1.5, 2.0};
    std::ofstream out(fs::path(a.out) / "robustness.csv");
    out << "l_ratio,r_ratio,peak,steady,oscillating\r\n";
    for (const auto& row : robustness_sweep(p, l, rr)) {
      out << row.l_ratio << ',' << row.r_ratio << ',' << row.peak << ',' << row.steady << ','
          << (row.oscillating ? 1 : 0) << "\r\n";
    }
    return kOk;
  }
  if (builtin == "voltage_support") {
    CommonArgs b = a;
    if (b.scenario.empty()) b.scenario = "voltage_support";
    const ParameterSet p = resolve_parameters(b, scenario, &file);
    std::ofstream out(fs::path(a.out) / "voltage_support.csv");
    out << "x_over_r,controller,current,voltage\r\n";
    for (const auto& row : voltage_support_sweep(p, {2, 3, 4, 5, 6, 7})) {
      out << row.x_over_r << ',' << csv_field(row.controller) << ',' << row.current << ','
          << row.voltage << "\r\n";
    }
    return kOk;
  }
  if (builtin == "overload_margin") {
    CommonArgs b = a;
    if (b.scenario.empty()) b.scenario = "overload_trial";
    const ParameterSet p = resolve_parameters(b, scenario, &file);
    const std::vector<std::string> kinds{"constraint_aware", "current_ref_limit", "variable_vi"};
    const auto results = parallel_map<OverloadResult>(kinds.size(), jobs, [&](std::size_t k) {
      ParameterSet q = p;
      q.set("controller.kind", kinds[k]);
      return overload_margin(q);
    });
    std::ofstream out(fs::path(a.out) / "overload_margin.csv");
    out << "controller,max_total_load_mw\r\n";
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      out << kinds[k] << ',' << results[k].max_total_load_mw << "\r\n";
      std::cout << kinds[k] << ": " << results[k].max_total_load_mw << " MW\n";
    }
    return kOk;
  }
  if (!builtin.empty()) throw ConfigError("unknown builtin sweep '" + builtin + "'");

  // Grid sweep from a config file.
  const ParameterSet base = resolve_parameters(a, scenario, &file);
  if (file.sweep.empty()) throw ConfigError("sweep file has no 'sweep' section");
  for (const auto& [key, values] : file.sweep) {
    if (!base.has(key)) throw ConfigError("unknown sweep key '" + key + "'");
  }
  std::vector<std::vector<std::string>> grid{{}};
  for (const auto& axis : file.sweep) {
    std::vector<std::vector<std::string>> next;
    for (const auto& g : grid) {
      for (const auto& v : axis.second) {
        next.push_back(g);
        next.back().push_back(v);
      }
    }
    grid = std::move(next);
  }
  std::vector<std::string> metrics = file.metrics;
  if (metrics.empty()) metrics = {"peak_current", "steady_current", "lost_sync"};

  struct Row {
    std::string status = "ok";
    nlohmann::json report;
  };
  const auto rows = parallel_map<Row>(grid.size(), jobs, [&](std::size_t k) {
    ParameterSet p = base;
    for (std::size_t d = 0; d < file.sweep.size(); ++d) p.set(file.sweep[d].first, grid[k][d]);
    Row row;
    try {
      const RunResult r = run_scenario(scenario, p);
      write_run(r, a.out, scenario + ".point" + std::to_string(k));
      row.report = report_json(r);
    } catch (const SimulationDiverged&) {
      row.status = "diverged";
    } catch (const InfeasibleTrip&) {
      row.status = "infeasible_trip";
    }
    return row;
  });

  std::ofstream out(fs::path(a.out) / (scenario + ".sweep.csv"));
  for (const auto& axis : file.sweep) out << csv_field(axis.first) << ',';
  out << "status";
  for (const auto& m : metrics) out << ',' << csv_field(m);
  out << "\r\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (const auto& v : grid[k]) out << csv_field(v) << ',';
    out << rows[k].status;
    for (const auto& m : metrics) {
      out << ',';
      const auto& rep = rows[k].report;
      if (rep.contains(m)) {
        out << csv_field(rep[m].dump());
      } else if (rep.contains("extras") && rep["extras"].contains(m)) {
        out << csv_field(rep["extras"][m].dump());
      }
    }
    out << "\r\n";
  }
  return kOk;
}

int cmd_bench(const CommonArgs& a, int n_instances, int repeats) {
  if (n_instances < 100) throw ConfigError("bench-projection needs at least 100 instances");
  CommonArgs b = a;
  if (b.scenario.empty()) b.scenario = "ib_fault";
  std::string scenario;
  const ParameterSet p = resolve_parameters(b, scenario, nullptr);
  const auto inst = record_fault_instances(p, static_cast<std::size_t>(n_instances));
  const auto rows = bench_projection(inst, repeats);
  std::cout << "instances: " << inst.size() << "\n";
  std::cout << std::left << std::setw(16) << "solver" << std::right << std::setw(12) << "min_us"
            << std::setw(12) << "mean_us" << std::setw(12) << "max_us" << std::setw(14)
            << "max_dev_pu" << '\n';
  for (const auto& r : rows) {
    std::cout << std::left << std::setw(16) << r.name << std::right << std::fixed
              << std::setprecision(3) << std::setw(12) << r.min_us << std::setw(12) << r.mean_us
              << std::setw(12) << r.max_us << std::setw(14) << std::setprecision(5)
              << r.max_deviation << '\n';
  }
  const bool ordered = rows[2].mean_us > rows[1].mean_us && rows[1].mean_us > rows[0].mean_us;
  std::cout << "ordering oracle > admm(1,10) > admm(5,5): " << (ordered ? "yes" : "no") << '\n';
  if (!a.out.empty()) {
    ensure_dir(a.out);
    std::ofstream out(fs::path(a.out) / "bench_projection.csv");
    out << "solver,min_us,mean_us,max_us,max_deviation_pu\r\n";
    for (const auto& r : rows) {
      out << r.name << ',' << r.min_us << ',' << r.mean_us << ',' << r.max_us << ','
          << r.max_deviation << "\r\n";
    }
  }
  return ordered ? kOk : 1;
}

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario, "scenario name");
  cmd->add_option("--config", a.config, "YAML config file");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--set", a.overrides, "parameter override key=value (repeatable)");
  cmd->add_option("--tau-sim", a.tau_sim, "plant step in seconds");
  cmd->add_flag("--log-full", a.log_full, "log every plant step instead of every controller step");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid-forming converter simulator with constraint-aware current limiting"};
  app.require_subcommand(1);
  CommonArgs sim_args;
  CommonArgs sweep_args;
  CommonArgs bench_args;
  std::string builtin;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int n_instances = 1000;
  int repeats = 20;

  auto* sim = app.add_subcommand("simulate", "run one scenario");
  add_common(sim, sim_args);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep, sweep_args);
  sweep->add_option("--builtin", builtin, "robustness | voltage_support | overload_margin");
  sweep->add_option("--jobs", jobs, "worker threads");
  auto* bench = app.add_subcommand("bench-projection", "time the projection solvers");
  add_common(bench, bench_args);
  bench->add_option("--instances", n_instances, "number of recorded instances");
  bench->add_option("--repeats", repeats, "solves per timing sample");
  for (auto* cmd : {sim, sweep, bench}) {
    cmd->get_option("--tau-sim")->check(CLI::Range(1e-7, 1e-4));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (sim->parsed()) return run_guarded([&] { return cmd_simulate(sim_args); });
  if (sweep->parsed()) return run_guarded([&] { return cmd_sweep(sweep_args, builtin, jobs); });
  return run_guarded([&] { return cmd_bench(bench_args, n_instances, repeats); });
}
