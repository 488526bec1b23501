#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rebackoff/analysis.hpp"
#include "rebackoff/scenario.hpp"

namespace rebackoff {

// ---------------------------------------------------------------------------
// JSONL traces: one header object, then one object per slot.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string outcome_code(const SlotOutcome& o) {
  switch (o.kind) {
    case SlotOutcome::Kind::Empty:
      return "E";
    case SlotOutcome::Kind::Success:
      return "S:" + std::to_string(o.winner);
    case SlotOutcome::Kind::Collision:
      return "C:" + std::to_string(o.transmitters);
    case SlotOutcome::Kind::Disrupted:
      return "D:" + std::to_string(o.transmitters);
  }
  return "?";
}

inline const char* designation_code(SlotDesignation d) {
  switch (d) {
    case SlotDesignation::TwoChannel: return "2";
    case SlotDesignation::Idle: return "i";
    case SlotDesignation::Control: return "c";
    case SlotDesignation::Data: return "d";
  }
  return "?";
}

inline const char* event_code(SlotEvent::Kind k) {
  switch (k) {
    case SlotEvent::Kind::Activation: return "a";
    case SlotEvent::Kind::Success: return "s";
    case SlotEvent::Kind::Reset: return "r";
  }
  return "?";
}

}  // namespace detail

inline void write_trace_jsonl(std::ostream& os, const Trace& trace,
                              const Scenario& scenario) {
  json header;
  header["type"] = "header";
  header["scenario"] = scenario_to_json(scenario);
  header["seed"] = trace.config.seed;
  header["slots"] = trace.records.size();
  header["complete"] = trace.complete;
  header["total_arrivals"] = trace.total_arrivals;
  header["total_successes"] = trace.total_successes;
  os << header.dump() << '\n';
  for (const SlotRecord& rec : trace.records) {
    json j;
    j["t"] = rec.slot;
    if (rec.directive.arrivals > 0) j["arr"] = rec.directive.arrivals;
    if (rec.directive.disrupt_control) j["jc"] = true;
    if (rec.directive.disrupt_data) j["jd"] = true;
    j["ctl"] = detail::outcome_code(rec.control_outcome);
    j["dat"] = detail::outcome_code(rec.data_outcome);
    if (rec.designation != SlotDesignation::TwoChannel)
      j["des"] = detail::designation_code(rec.designation);
    j["live"] = rec.live_count;
    j["act"] = rec.active_count;
    j["x"] = rec.contention;
    if (rec.system_empty) j["idle"] = true;
    if (!rec.events.empty()) {
      json evs = json::array();
      for (const SlotEvent& ev : rec.events)
        evs.push_back({{"k", detail::event_code(ev.kind)}, {"p", ev.packet}});
      j["ev"] = evs;
    }
    os << j.dump() << '\n';
  }
}

inline json metrics_to_json(const Metrics& m) {
  json j;
  j["begin"] = m.begin;
  j["end"] = m.end;
  j["interval_slots"] = m.interval_slots;
  j["successes"] = m.successes;
  j["disrupted"] = m.disrupted;
  j["defined"] = m.defined;
  j["lambda"] = m.lambda;
  j["Lambda"] = m.Lambda;
  j["waste"] = m.waste;
  if (m.makespan) j["makespan"] = *m.makespan;
  return j;
}

// ---------------------------------------------------------------------------
// Sweep CSV: fixed column order, documented in the README.
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::uint64_t seeds = 0;
  double lambda = 0.0;
  double Lambda = 0.0;
  double waste = 0.0;
  double makespan = 0.0;
  double mean_attempts = 0.0;
  double mean_resets = 0.0;
};

inline constexpr const char* kSweepCsvHeader =
    "param,value,seeds,lambda,Lambda,waste,makespan,mean_attempts,"
    "mean_resets";

namespace detail {

inline std::string csv_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline void write_sweep_csv(std::ostream& os,
                            const std::vector<SweepRow>& rows) {
  os << kSweepCsvHeader << '\n';
  for (const SweepRow& r : rows) {
    os << r.param << ',' << detail::csv_double(r.value) << ',' << r.seeds
       << ',' << detail::csv_double(r.lambda) << ','
       << detail::csv_double(r.Lambda) << ',' << detail::csv_double(r.waste)
       << ',' << detail::csv_double(r.makespan) << ','
       << detail::csv_double(r.mean_attempts) << ','
       << detail::csv_double(r.mean_resets) << '\n';
  }
}

inline std::vector<SweepRow> parse_sweep_csv(std::istream& is) {
  std::vector<SweepRow> rows;
  std::string line;
  if (!std::getline(is, line) || line != kSweepCsvHeader)
    throw ScenarioError("sweep csv: bad header line");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 9)
      throw ScenarioError("sweep csv: expected 9 fields per row");
    SweepRow r;
    r.param = fields[0];
    r.value = std::stod(fields[1]);
    r.seeds = std::stoull(fields[2]);
    r.lambda = std::stod(fields[3]);
    r.Lambda = std::stod(fields[4]);
    r.waste = std::stod(fields[5]);
    r.makespan = std::stod(fields[6]);
    r.mean_attempts = std::stod(fields[7]);
    r.mean_resets = std::stod(fields[8]);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Compare CSV: one column group per protocol, same scenario and seeds.
// ---------------------------------------------------------------------------

struct CompareColumnGroup {
  std::string protocol;
  double lambda = 0.0;
  double Lambda = 0.0;
  double waste = 0.0;
  double makespan = 0.0;  // NaN when the run did not complete
  double backlog = 0.0;   // live packets at the end of the run
};

struct CompareRow {
  std::uint64_t seed = 0;
  std::vector<CompareColumnGroup> groups;
};

inline void write_compare_csv(std::ostream& os,
                              const std::vector<std::string>& protocols,
                              const std::vector<CompareRow>& rows) {
  os << "seed";
  for (const std::string& p : protocols)
    os << ',' << p << "_lambda," << p << "_Lambda," << p << "_waste," << p
       << "_makespan," << p << "_backlog";
  os << '\n';
  for (const CompareRow& row : rows) {
    os << row.seed;
    for (const CompareColumnGroup& g : row.groups)
      os << ',' << detail::csv_double(g.lambda) << ','
         << detail::csv_double(g.Lambda) << ',' << detail::csv_double(g.waste)
         << ',' << detail::csv_double(g.makespan) << ','
         << detail::csv_double(g.backlog);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Aggregation helpers shared by sweep and the acceptance battery.
// ---------------------------------------------------------------------------

inline double aggregate(std::vector<double> values, const std::string& how,
                        double percentile = 0.5) {
  if (values.empty()) return std::nan("");
  if (how == "mean") {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
  }
  const double q = how == "median" ? 0.5 : percentile;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace rebackoff
