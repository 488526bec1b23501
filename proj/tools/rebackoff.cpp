// Experiment runner: scenarios in, traces/metrics/CSV out.

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rebackoff/analysis.hpp"
#include "rebackoff/engine.hpp"
#include "rebackoff/scenario.hpp"
#include "rebackoff/trace_io.hpp"
#include "rebackoff/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;     // failed verification / bad usage
constexpr int kExitSchemaError = 2; // scenario or sweep file rejected
constexpr int kExitIncomplete = 3;  // slot cap hit before all packets done

namespace fs = std::filesystem;
using namespace rebackoff;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  return j;
}

fs::path resolve_out(const std::string& out_dir, const std::string& name) {
  fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  return dir / name;
}

// Runs fn(i) for i in [0, count) across `jobs` threads; results land in a
// caller-provided slot per index, so output order is deterministic.
void parallel_for(std::uint64_t count, unsigned jobs,
                  const std::function<void(std::uint64_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::vector<std::thread> pool;
  const unsigned width = std::min<std::uint64_t>(jobs, count);
  for (unsigned w = 0; w < width; ++w)
    pool.emplace_back([&] {
      for (std::uint64_t i = next.fetch_add(1); i < count;
           i = next.fetch_add(1))
        fn(i);
    });
  for (auto& th : pool) th.join();
}

Metrics metrics_for(const Trace& trace) { return run_metrics(trace); }

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override, unsigned jobs) {
  Scenario sc = parse_scenario(load_json(scenario_path));
  if (seed_override) sc.seeds = {*seed_override};

  const bool multi = sc.seeds.size() > 1;
  std::vector<Trace> traces(sc.seeds.size());
  parallel_for(sc.seeds.size(), jobs, [&](std::uint64_t i) {
    RunConfig cfg = sc.config;
    cfg.seed = sc.seeds[i];
    traces[i] = run(cfg);
  });

  bool incomplete = false;
  for (std::size_t i = 0; i < sc.seeds.size(); ++i) {
    const Trace& trace = traces[i];
    if (!trace.complete) incomplete = true;
    const std::string suffix =
        multi ? "_" + std::to_string(sc.seeds[i]) : "";
    const std::string trace_name = sc.outputs.trace_path.empty()
                                       ? "trace" + suffix + ".jsonl"
                                       : sc.outputs.trace_path + suffix;
    const std::string metrics_name = sc.outputs.metrics_path.empty()
                                         ? "metrics" + suffix + ".json"
                                         : sc.outputs.metrics_path + suffix;
    {
      std::ofstream os(resolve_out(out_dir, trace_name));
      write_trace_jsonl(os, trace, sc);
    }
    {
      json j;
      j["scenario"] = scenario_to_json(sc);
      j["seed"] = sc.seeds[i];
      j["complete"] = trace.complete;
      j["total_arrivals"] = trace.total_arrivals;
      j["total_successes"] = trace.total_successes;
      j["metrics"] = metrics_to_json(metrics_for(trace));
      std::ofstream os(resolve_out(out_dir, metrics_name));
      os << j.dump(2) << '\n';
    }
    std::cout << "seed " << sc.seeds[i] << ": " << trace.records.size()
              << " slots, " << trace.total_successes << "/"
              << trace.total_arrivals << " delivered"
              << (trace.complete ? "" : " (incomplete)") << '\n';
  }
  return incomplete ? kExitIncomplete : kExitOk;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override, unsigned jobs) {
  SweepSpec spec = parse_sweep(load_json(spec_path));
  const std::uint64_t base_seed =
      seed_override ? *seed_override : spec.base.seeds.front();

  struct PointRun {
    Metrics metrics;
    double mean_attempts = 0.0;
    double mean_resets = 0.0;
    bool complete = true;
  };
  std::vector<std::vector<PointRun>> results(
      spec.values.size(), std::vector<PointRun>(spec.seeds_per_point));

  const std::uint64_t total = spec.values.size() * spec.seeds_per_point;
  bool incomplete = false;
  std::mutex flag_mutex;
  parallel_for(total, jobs, [&](std::uint64_t idx) {
    const std::size_t point = idx / spec.seeds_per_point;
    const std::uint64_t s = idx % spec.seeds_per_point;
    RunConfig cfg = apply_sweep_value(spec.base.config, spec.parameter,
                                      spec.values[point]);
    cfg.seed = base_seed + idx;
    cfg.verbosity = Verbosity::PerPacket;  // attempts/resets need the ledger
    Trace trace = run(cfg);
    PointRun& out = results[point][s];
    out.metrics = metrics_for(trace);
    AttemptsStats att = attempts_stats(trace);
    out.mean_attempts = att.mean;
    double resets = 0.0;
    for (const PacketLedger& led : trace.ledger)
      resets += static_cast<double>(led.reset_slots.size());
    out.mean_resets =
        trace.ledger.empty()
            ? 0.0
            : resets / static_cast<double>(trace.ledger.size());
    if (!trace.complete) {
      std::lock_guard<std::mutex> lock(flag_mutex);
      incomplete = true;
    }
  });

  std::vector<SweepRow> rows;
  for (std::size_t point = 0; point < spec.values.size(); ++point) {
    std::vector<double> lambda, Lambda, waste, makespan, attempts, resets;
    for (const PointRun& r : results[point]) {
      lambda.push_back(r.metrics.lambda);
      Lambda.push_back(r.metrics.Lambda);
      waste.push_back(r.metrics.waste);
      if (r.metrics.makespan)
        makespan.push_back(static_cast<double>(*r.metrics.makespan));
      attempts.push_back(r.mean_attempts);
      resets.push_back(r.mean_resets);
    }
    SweepRow row;
    row.param = spec.parameter;
    row.value = spec.values[point];
    row.seeds = spec.seeds_per_point;
    row.lambda = aggregate(lambda, spec.aggregation, spec.percentile);
    row.Lambda = aggregate(Lambda, spec.aggregation, spec.percentile);
    row.waste = aggregate(waste, spec.aggregation, spec.percentile);
    row.makespan = aggregate(makespan, spec.aggregation, spec.percentile);
    row.mean_attempts = aggregate(attempts, spec.aggregation, spec.percentile);
    row.mean_resets = aggregate(resets, spec.aggregation, spec.percentile);
    rows.push_back(row);
  }

  const std::string csv_name = spec.base.outputs.csv_path.empty()
                                   ? "sweep.csv"
                                   : spec.base.outputs.csv_path;
  std::ofstream os(resolve_out(out_dir, csv_name));
  write_sweep_csv(os, rows);
  std::cout << rows.size() << " sweep rows -> "
            << resolve_out(out_dir, csv_name).string() << '\n';
  return incomplete ? kExitIncomplete : kExitOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, bool full) {
  std::vector<std::string> to_run;
  if (suite == "all")
    to_run = suite_names();
  else
    to_run.push_back(suite);

  bool all_pass = true;
  for (const std::string& name : to_run) {
    std::optional<SuiteResult> result = run_suite(name, seed, full);
    if (!result) {
      std::cerr << "unknown suite '" << name << "'\n";
      return kExitFailure;
    }
    for (const CheckResult& c : result->checks) {
      std::cout << (c.pass ? "PASS" : "FAIL") << " [" << result->suite << "] "
                << c.name << ": " << c.detail << '\n';
      if (!c.pass) all_pass = false;
    }
  }
  return all_pass ? kExitOk : kExitFailure;
}

int cmd_compare(const std::string& scenario_path, const std::string& out_dir,
                const std::vector<std::string>& protocols, unsigned jobs) {
  Scenario sc = parse_scenario(load_json(scenario_path));
  if (protocols.empty())
    throw ScenarioError("compare: need at least one protocol");
  std::vector<ProtocolKind> kinds;
  for (const std::string& p : protocols) kinds.push_back(parse_protocol_kind(p));

  std::vector<CompareRow> rows(sc.seeds.size());
  const std::uint64_t total = sc.seeds.size() * kinds.size();
  for (auto& row : rows) row.groups.resize(kinds.size());
  parallel_for(total, jobs, [&](std::uint64_t idx) {
    const std::size_t si = idx / kinds.size();
    const std::size_t ki = idx % kinds.size();
    RunConfig cfg = sc.config;
    cfg.protocol = kinds[ki];
    cfg.seed = sc.seeds[si];
    Trace trace = run(cfg);
    Metrics m = metrics_for(trace);
    CompareColumnGroup& g = rows[si].groups[ki];
    g.protocol = protocols[ki];
    g.lambda = m.lambda;
    g.Lambda = m.Lambda;
    g.waste = m.waste;
    g.makespan = trace.complete && m.makespan
                     ? static_cast<double>(*m.makespan)
                     : std::nan("");
    g.backlog =
        static_cast<double>(trace.total_arrivals - trace.total_successes);
    rows[si].seed = sc.seeds[si];
  });

  const std::string csv_name = sc.outputs.csv_path.empty()
                                   ? "compare.csv"
                                   : sc.outputs.csv_path;
  std::ofstream os(resolve_out(out_dir, csv_name));
  write_compare_csv(os, protocols, rows);
  std::cout << rows.size() << " compare rows -> "
            << resolve_out(out_dir, csv_name).string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic slotted-channel backoff simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool full = false;

  auto add_common = [&](CLI::App* cmd, bool need_scenario) {
    if (need_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario/spec file")
          ->required();
    cmd->add_option("--out", out_dir, "output directory (default .)");
    cmd->add_option("--seed", seed, "override the scenario seed");
    cmd->add_option("--jobs", jobs, "worker threads for independent runs");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one scenario");
  add_common(run_cmd, true);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(sweep_cmd, true);

  std::string suite = "all";
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "run a verification suite");
  verify_cmd->add_option("suite", suite,
                         "bounds|sigma|sync|prefix|borrower|scaling|"
                         "beb-contrast|all");
  verify_cmd->add_option("--seed", seed, "battery seed");
  verify_cmd->add_flag("--full", full, "full-size batteries (slow)");

  std::vector<std::string> protocols = {"rebackoff2", "beb"};
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "same scenario under several protocols");
  add_common(compare_cmd, true);
  compare_cmd->add_option("--protocols", protocols,
                          "protocols to compare (rebackoff2|rebackoff1|beb)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(scenario_path, out_dir, seed, jobs);
    if (sweep_cmd->parsed())
      return cmd_sweep(scenario_path, out_dir, seed, jobs);
    if (verify_cmd->parsed()) return cmd_verify(suite, seed.value_or(1), full);
    if (compare_cmd->parsed())
      return cmd_compare(scenario_path, out_dir, protocols, jobs);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSchemaError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
