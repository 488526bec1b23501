#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rebackoff/engine.hpp"

namespace rebackoff {

using nlohmann::json;

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioOutputs {
  std::string trace_path;
  std::string metrics_path;
  std::string csv_path;
};

struct Scenario {
  RunConfig config;
  std::vector<std::uint64_t> seeds;  // at least one; config.seed = seeds[0]
  ScenarioOutputs outputs;
};

struct SweepSpec {
  Scenario base;
  std::string parameter;               // "n", "burst_size", "spoof_length", "c"
  std::vector<double> values;          // >= 2 points
  std::uint64_t seeds_per_point = 10;  // >= 10
  std::string aggregation = "median";  // mean | median | percentile
  double percentile = 0.5;             // only for aggregation == percentile
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const char* where,
                                std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ScenarioError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (key == k) known = true;
    if (!known)
      throw ScenarioError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T require(const json& obj, const char* where, const char* key) {
  if (!obj.contains(key))
    throw ScenarioError(std::string(where) + ": missing required key '" +
                        key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <typename T>
T optional_or(const json& obj, const char* where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ScenarioError(std::string(where) + "." + key + ": " + e.what());
  }
}

inline AdversaryConfig parse_adversary(const json& obj, const char* where);

inline AdversaryConfig parse_adversary(const json& obj, const char* where) {
  const std::string kind = require<std::string>(obj, where, "kind");
  AdversaryConfig cfg;
  if (kind == "batch") {
    reject_unknown_keys(obj, where, {"kind", "n"});
    cfg = AdversaryConfig::batch(require<std::uint64_t>(obj, where, "n"));
  } else if (kind == "stream_burst") {
    reject_unknown_keys(obj, where,
                        {"kind", "period", "burst_size", "burst_slot"});
    cfg = AdversaryConfig::stream_burst(
        require<std::uint64_t>(obj, where, "period"),
        require<std::uint64_t>(obj, where, "burst_size"),
        require<std::uint64_t>(obj, where, "burst_slot"));
  } else if (kind == "poisson") {
    reject_unknown_keys(obj, where, {"kind", "rate"});
    cfg = AdversaryConfig::poisson(require<double>(obj, where, "rate"));
    if (cfg.rate < 0.0)
      throw ScenarioError(std::string(where) + ".rate: must be >= 0");
  } else if (kind == "window_jammer") {
    reject_unknown_keys(obj, where,
                        {"kind", "intervals", "duty_period", "duty_len",
                         "duty_end", "jam_control", "jam_data"});
    cfg.kind = AdversaryConfig::Kind::WindowJammer;
    if (obj.contains("intervals")) {
      for (const json& it : obj.at("intervals")) {
        reject_unknown_keys(it, where, {"begin", "end", "control", "data"});
        JamInterval iv;
        iv.begin = require<std::uint64_t>(it, where, "begin");
        iv.end = require<std::uint64_t>(it, where, "end");
        iv.control = optional_or(it, where, "control", true);
        iv.data = optional_or(it, where, "data", true);
        if (iv.end < iv.begin)
          throw ScenarioError(std::string(where) +
                              ".intervals: end precedes begin");
        cfg.intervals.push_back(iv);
      }
    }
    cfg.duty_period = optional_or<std::uint64_t>(obj, where, "duty_period", 0);
    cfg.duty_len = optional_or<std::uint64_t>(obj, where, "duty_len", 0);
    cfg.duty_end = optional_or<std::uint64_t>(obj, where, "duty_end", 0);
    cfg.jam_control = optional_or(obj, where, "jam_control", true);
    cfg.jam_data = optional_or(obj, where, "jam_data", true);
    if (cfg.duty_len > cfg.duty_period)
      throw ScenarioError(std::string(where) +
                          ": duty_len exceeds duty_period");
  } else if (kind == "spoof_jammer") {
    reject_unknown_keys(obj, where,
                        {"kind", "spoof_length", "adaptive_age_threshold"});
    cfg.kind = AdversaryConfig::Kind::SpoofJammer;
    cfg.spoof_length =
        optional_or<std::uint64_t>(obj, where, "spoof_length", 0);
    cfg.adaptive_age_threshold =
        optional_or(obj, where, "adaptive_age_threshold", 0.0);
    if (cfg.spoof_length == 0 && cfg.adaptive_age_threshold <= 0.0)
      throw ScenarioError(std::string(where) +
                          ": spoof_jammer needs spoof_length or "
                          "adaptive_age_threshold");
  } else if (kind == "composite") {
    reject_unknown_keys(obj, where, {"kind", "parts"});
    cfg.kind = AdversaryConfig::Kind::Composite;
    const json& parts = obj.contains("parts") ? obj.at("parts") : json::array();
    if (!parts.is_array() || parts.empty())
      throw ScenarioError(std::string(where) +
                          ".parts: expected a non-empty array");
    for (const json& part : parts)
      cfg.parts.push_back(parse_adversary(part, where));
  } else {
    throw ScenarioError(std::string(where) + ".kind: unknown adversary '" +
                        kind + "'");
  }
  return cfg;
}

inline json adversary_to_json(const AdversaryConfig& cfg) {
  json j;
  switch (cfg.kind) {
    case AdversaryConfig::Kind::Batch:
      j["kind"] = "batch";
      j["n"] = cfg.n;
      break;
    case AdversaryConfig::Kind::StreamBurst:
      j["kind"] = "stream_burst";
      j["period"] = cfg.period;
      j["burst_size"] = cfg.burst_size;
      j["burst_slot"] = cfg.burst_slot;
      break;
    case AdversaryConfig::Kind::Poisson:
      j["kind"] = "poisson";
      j["rate"] = cfg.rate;
      break;
    case AdversaryConfig::Kind::WindowJammer: {
      j["kind"] = "window_jammer";
      json ivs = json::array();
      for (const JamInterval& iv : cfg.intervals)
        ivs.push_back({{"begin", iv.begin},
                       {"end", iv.end},
                       {"control", iv.control},
                       {"data", iv.data}});
      if (!ivs.empty()) j["intervals"] = ivs;
      if (cfg.duty_period > 0) {
        j["duty_period"] = cfg.duty_period;
        j["duty_len"] = cfg.duty_len;
        if (cfg.duty_end > 0) j["duty_end"] = cfg.duty_end;
        j["jam_control"] = cfg.jam_control;
        j["jam_data"] = cfg.jam_data;
      }
      break;
    }
    case AdversaryConfig::Kind::SpoofJammer:
      j["kind"] = "spoof_jammer";
      if (cfg.spoof_length > 0) j["spoof_length"] = cfg.spoof_length;
      if (cfg.adaptive_age_threshold > 0.0)
        j["adaptive_age_threshold"] = cfg.adaptive_age_threshold;
      break;
    case AdversaryConfig::Kind::Composite: {
      j["kind"] = "composite";
      json parts = json::array();
      for (const AdversaryConfig& part : cfg.parts)
        parts.push_back(adversary_to_json(part));
      j["parts"] = parts;
      break;
    }
  }
  return j;
}

}  // namespace detail

inline ProtocolKind parse_protocol_kind(const std::string& s) {
  if (s == "rebackoff2" || s == "rb2") return ProtocolKind::ReBackoff2;
  if (s == "rebackoff1" || s == "rb1") return ProtocolKind::ReBackoff1;
  if (s == "beb") return ProtocolKind::Beb;
  throw ScenarioError("protocol.kind: unknown protocol '" + s + "'");
}

inline std::string protocol_kind_name(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::ReBackoff2: return "rebackoff2";
    case ProtocolKind::ReBackoff1: return "rebackoff1";
    case ProtocolKind::Beb: return "beb";
  }
  return "?";
}

inline Scenario parse_scenario(const json& root) {
  detail::reject_unknown_keys(
      root, "scenario",
      {"protocol", "adversary", "seed", "seeds", "stop", "verbosity",
       "outputs"});
  Scenario sc;

  if (!root.contains("protocol"))
    throw ScenarioError("scenario: missing required key 'protocol'");
  const json& proto = root.at("protocol");
  detail::reject_unknown_keys(proto, "protocol", {"kind", "c", "d", "gamma"});
  sc.config.protocol = parse_protocol_kind(
      detail::require<std::string>(proto, "protocol", "kind"));
  sc.config.params.c = detail::optional_or(proto, "protocol", "c", 2.0);
  sc.config.params.d = detail::optional_or(proto, "protocol", "d", 0.5);
  sc.config.params.gamma =
      detail::optional_or(proto, "protocol", "gamma", 15.0 / 16.0);
  if (!sc.config.params.valid())
    throw ScenarioError("protocol: parameters out of range");

  if (!root.contains("adversary"))
    throw ScenarioError("scenario: missing required key 'adversary'");
  sc.config.adversary =
      detail::parse_adversary(root.at("adversary"), "adversary");

  if (root.contains("seed") && root.contains("seeds"))
    throw ScenarioError("scenario: give either 'seed' or 'seeds', not both");
  if (root.contains("seeds")) {
    sc.seeds = detail::require<std::vector<std::uint64_t>>(root, "scenario",
                                                           "seeds");
    if (sc.seeds.empty())
      throw ScenarioError("scenario.seeds: must be non-empty");
  } else if (root.contains("seed")) {
    sc.seeds = {detail::require<std::uint64_t>(root, "scenario", "seed")};
  } else {
    throw ScenarioError("scenario: missing required key 'seed'");
  }
  sc.config.seed = sc.seeds.front();

  if (!root.contains("stop"))
    throw ScenarioError("scenario: missing required key 'stop'");
  const json& stop = root.at("stop");
  detail::reject_unknown_keys(stop, "stop", {"mode", "max_slots"});
  const std::string mode = detail::require<std::string>(stop, "stop", "mode");
  const std::uint64_t max_slots =
      detail::optional_or<std::uint64_t>(stop, "stop", "max_slots", 0);
  if (mode == "all_done") {
    sc.config.stop = StopRule::all_packets_done(max_slots);
  } else if (mode == "horizon") {
    if (max_slots == 0)
      throw ScenarioError("stop: horizon mode needs max_slots > 0");
    sc.config.stop = StopRule::horizon(max_slots);
  } else {
    throw ScenarioError("stop.mode: expected 'all_done' or 'horizon'");
  }

  const std::string verb =
      detail::optional_or<std::string>(root, "scenario", "verbosity",
                                       "summary");
  if (verb == "summary") {
    sc.config.verbosity = Verbosity::Summary;
  } else if (verb == "per_packet") {
    sc.config.verbosity = Verbosity::PerPacket;
  } else {
    throw ScenarioError("verbosity: expected 'summary' or 'per_packet'");
  }

  if (root.contains("outputs")) {
    const json& out = root.at("outputs");
    detail::reject_unknown_keys(out, "outputs",
                                {"trace_path", "metrics_path", "csv_path"});
    sc.outputs.trace_path =
        detail::optional_or<std::string>(out, "outputs", "trace_path", "");
    sc.outputs.metrics_path =
        detail::optional_or<std::string>(out, "outputs", "metrics_path", "");
    sc.outputs.csv_path =
        detail::optional_or<std::string>(out, "outputs", "csv_path", "");
  }
  return sc;
}

inline json scenario_to_json(const Scenario& sc) {
  json j;
  j["protocol"] = {{"kind", protocol_kind_name(sc.config.protocol)},
                   {"c", sc.config.params.c},
                   {"d", sc.config.params.d},
                   {"gamma", sc.config.params.gamma}};
  j["adversary"] = detail::adversary_to_json(sc.config.adversary);
  if (sc.seeds.size() == 1)
    j["seed"] = sc.seeds.front();
  else
    j["seeds"] = sc.seeds;
  j["stop"] = {{"mode", sc.config.stop.all_done ? "all_done" : "horizon"},
               {"max_slots", sc.config.stop.max_slots}};
  j["verbosity"] = sc.config.verbosity == Verbosity::Summary ? "summary"
                                                             : "per_packet";
  if (!sc.outputs.trace_path.empty() || !sc.outputs.metrics_path.empty() ||
      !sc.outputs.csv_path.empty()) {
    json out;
    if (!sc.outputs.trace_path.empty())
      out["trace_path"] = sc.outputs.trace_path;
    if (!sc.outputs.metrics_path.empty())
      out["metrics_path"] = sc.outputs.metrics_path;
    if (!sc.outputs.csv_path.empty()) out["csv_path"] = sc.outputs.csv_path;
    j["outputs"] = out;
  }
  return j;
}

// Applies one swept parameter value onto a copy of the base run config.
inline RunConfig apply_sweep_value(const RunConfig& base,
                                   const std::string& parameter,
                                   double value) {
  RunConfig cfg = base;
  if (parameter == "n") {
    if (cfg.adversary.kind != AdversaryConfig::Kind::Batch)
      throw ScenarioError("sweep: parameter 'n' needs a batch adversary");
    cfg.adversary.n = static_cast<std::uint64_t>(value);
  } else if (parameter == "burst_size") {
    if (cfg.adversary.kind != AdversaryConfig::Kind::StreamBurst)
      throw ScenarioError(
          "sweep: parameter 'burst_size' needs a stream_burst adversary");
    cfg.adversary.burst_size = static_cast<std::uint64_t>(value);
  } else if (parameter == "spoof_length") {
    if (cfg.adversary.kind != AdversaryConfig::Kind::SpoofJammer)
      throw ScenarioError(
          "sweep: parameter 'spoof_length' needs a spoof_jammer adversary");
    cfg.adversary.spoof_length = static_cast<std::uint64_t>(value);
  } else if (parameter == "c") {
    cfg.params.c = value;
    if (!cfg.params.valid())
      throw ScenarioError("sweep: swept c leaves parameters out of range");
  } else {
    throw ScenarioError("sweep: unknown parameter '" + parameter + "'");
  }
  return cfg;
}

inline SweepSpec parse_sweep(const json& root) {
  detail::reject_unknown_keys(
      root, "sweep",
      {"base", "parameter", "values", "seeds_per_point", "aggregation",
       "percentile"});
  SweepSpec spec;
  if (!root.contains("base"))
    throw ScenarioError("sweep: missing required key 'base'");
  spec.base = parse_scenario(root.at("base"));
  spec.parameter = detail::require<std::string>(root, "sweep", "parameter");
  spec.values = detail::require<std::vector<double>>(root, "sweep", "values");
  if (spec.values.size() < 2)
    throw ScenarioError("sweep.values: need at least 2 sweep points");
  spec.seeds_per_point =
      detail::optional_or<std::uint64_t>(root, "sweep", "seeds_per_point", 10);
  if (spec.seeds_per_point < 10)
    throw ScenarioError("sweep.seeds_per_point: need at least 10 seeds");
  spec.aggregation =
      detail::optional_or<std::string>(root, "sweep", "aggregation", "median");
  if (spec.aggregation != "mean" && spec.aggregation != "median" &&
      spec.aggregation != "percentile")
    throw ScenarioError(
        "sweep.aggregation: expected 'mean', 'median', or 'percentile'");
  spec.percentile =
      detail::optional_or(root, "sweep", "percentile", 0.5);
  if (spec.percentile < 0.0 || spec.percentile > 1.0)
    throw ScenarioError("sweep.percentile: must lie in [0, 1]");
  // Validate the parameter name against the base config up front.
  apply_sweep_value(spec.base.config, spec.parameter, spec.values.front());
  return spec;
}

}  // namespace rebackoff
