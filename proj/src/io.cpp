#include "fcsim/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace fcsim::io {

using nlohmann::json;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

// Reads one section, remembering every problem instead of stopping at the
// first.
class Section {
 public:
  Section(const json& root, std::string name, std::vector<std::string>& errors)
      : name_(std::move(name)), errors_(errors) {
    if (!root.contains(name_)) return;
    const json& s = root.at(name_);
    if (!s.is_object()) {
      errors_.push_back(name_ + ": must be an object");
      return;
    }
    obj_ = &s;
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.emplace_back(key);
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = obj_->at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      ok = v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else {
      ok = v.is_string();
    }
    if (!ok) {
      errors_.push_back(field(key) + ": wrong type " + std::string(v.type_name()));
      return;
    }
    out = v.get<T>();
  }

  // Call after all get()s.
  void reject_unknown() {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
        errors_.push_back(field(k.c_str()) + ": unknown key");
      }
    }
  }

  std::string field(const char* key) const { return name_ + "." + key; }

 private:
  std::string name_;
  std::vector<std::string>& errors_;
  const json* obj_ = nullptr;
  std::vector<std::string> seen_;
};

}  // namespace

json config_to_json(const ScenarioConfig& c) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = {{"num_lanes_up", c.num_lanes_up},   {"num_lanes_down", c.num_lanes_down},
                   {"l_upstream", c.l_upstream},       {"l_3", c.l_3},
                   {"volume", c.volume},               {"sim_duration", c.sim_duration},
                   {"tick", c.tick},                   {"warmup", c.warmup},
                   {"mode", to_string(c.mode)},        {"seed", c.seed}};
  j["road"] = {{"v_f", c.road.v_f}, {"T", c.road.T}, {"d_g", c.road.d_g}, {"lane_width", c.road.lane_width}};
  j["limits"] = {{"v_min", c.limits.v_min}, {"v_max", c.limits.v_max},
                 {"a_min", c.limits.a_min}, {"a_max", c.limits.a_max},
                 {"delta_max_deg", c.limits.delta_max * kDeg}, {"wheelbase", c.limits.wheelbase}};
  j["vehicle"] = {{"length", c.vehicle_length}, {"width", c.vehicle_width}};
  j["control"] = {{"plan_dt", c.plan_dt},         {"sim_dt", c.control_dt},
                  {"k_y", c.gains.k_y},           {"k_theta", c.gains.k_theta},
                  {"preview", c.gains.preview},   {"envelope", c.gains.envelope},
                  {"midpoint_waypoints", c.midpoint_waypoints}};
  j["formation"] = {{"max_size", c.formation.max_size}, {"max_wait", c.formation.max_wait}};
  j["idm"] = {{"v0", c.idm.v0},       {"time_headway", c.idm.time_headway}, {"min_gap", c.idm.min_gap},
              {"accel", c.idm.accel}, {"decel", c.idm.decel},               {"delta", c.idm.delta}};
  j["lane_change"] = {{"lookahead", c.lane_change.lookahead},
                      {"time_headway", c.lane_change.time_headway}};
  j["fuel"] = {{"alpha", c.fuel.alpha}, {"beta1", c.fuel.beta1}, {"beta2", c.fuel.beta2},
               {"b1", c.fuel.b1},       {"b2", c.fuel.b2},       {"mass", c.fuel.mass}};
  j["heatmap"] = {{"t_bin", c.heatmap.t_bin}, {"x_bin", c.heatmap.x_bin}};
  j["log"] = {{"interval", c.log_interval}};
  return j;
}

ScenarioConfig config_from_json(const json& j, const ScenarioConfig& base) {
  std::vector<std::string> errors;
  if (!j.is_object()) throw ConfigError({"config: must be a JSON object"});
  if (!j.contains("schema_version")) {
    errors.push_back("schema_version: missing");
  } else if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion) {
    errors.push_back("schema_version: unsupported (expected " + std::to_string(kSchemaVersion) + ")");
  }
  static const char* const kSections[] = {"scenario", "road",        "limits", "vehicle", "control", "formation",
                                          "idm",      "lane_change", "fuel",   "heatmap", "log"};
  for (const auto& [k, v] : j.items()) {
    if (k == "schema_version") continue;
    if (std::find(std::begin(kSections), std::end(kSections), k) == std::end(kSections)) {
      errors.push_back(k + ": unknown section");
    }
  }

  ScenarioConfig c = base;
  {
    Section s(j, "scenario", errors);
    s.get("num_lanes_up", c.num_lanes_up);
    s.get("num_lanes_down", c.num_lanes_down);
    s.get("l_upstream", c.l_upstream);
    s.get("l_3", c.l_3);
    s.get("volume", c.volume);
    s.get("sim_duration", c.sim_duration);
    s.get("tick", c.tick);
    s.get("warmup", c.warmup);
    std::string mode = to_string(c.mode);
    s.get("mode", mode);
    try {
      c.mode = mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
      errors.push_back(s.field("mode") + ": " + e.what());
    }
    s.get("seed", c.seed);
    s.reject_unknown();
  }
  {
    Section s(j, "road", errors);
    s.get("v_f", c.road.v_f);
    s.get("T", c.road.T);
    s.get("d_g", c.road.d_g);
    s.get("lane_width", c.road.lane_width);
    s.reject_unknown();
  }
  {
    Section s(j, "limits", errors);
    s.get("v_min", c.limits.v_min);
    s.get("v_max", c.limits.v_max);
    s.get("a_min", c.limits.a_min);
    s.get("a_max", c.limits.a_max);
    double deg = c.limits.delta_max * kDeg;
    s.get("delta_max_deg", deg);
    c.limits.delta_max = deg / kDeg;
    s.get("wheelbase", c.limits.wheelbase);
    s.reject_unknown();
  }
  {
    Section s(j, "vehicle", errors);
    s.get("length", c.vehicle_length);
    s.get("width", c.vehicle_width);
    s.reject_unknown();
  }
  {
    Section s(j, "control", errors);
    s.get("plan_dt", c.plan_dt);
    s.get("sim_dt", c.control_dt);
    s.get("k_y", c.gains.k_y);
    s.get("k_theta", c.gains.k_theta);
    s.get("preview", c.gains.preview);
    s.get("envelope", c.gains.envelope);
    s.get("midpoint_waypoints", c.midpoint_waypoints);
    s.reject_unknown();
  }
  {
    Section s(j, "formation", errors);
    s.get("max_size", c.formation.max_size);
    s.get("max_wait", c.formation.max_wait);
    s.reject_unknown();
  }
  {
    Section s(j, "idm", errors);
    s.get("v0", c.idm.v0);
    s.get("time_headway", c.idm.time_headway);
    s.get("min_gap", c.idm.min_gap);
    s.get("accel", c.idm.accel);
    s.get("decel", c.idm.decel);
    s.get("delta", c.idm.delta);
    s.reject_unknown();
  }
  {
    Section s(j, "lane_change", errors);
    s.get("lookahead", c.lane_change.lookahead);
    s.get("time_headway", c.lane_change.time_headway);
    s.reject_unknown();
  }
  {
    Section s(j, "fuel", errors);
    s.get("alpha", c.fuel.alpha);
    s.get("beta1", c.fuel.beta1);
    s.get("beta2", c.fuel.beta2);
    s.get("b1", c.fuel.b1);
    s.get("b2", c.fuel.b2);
    s.get("mass", c.fuel.mass);
    s.reject_unknown();
  }
  {
    Section s(j, "heatmap", errors);
    s.get("t_bin", c.heatmap.t_bin);
    s.get("x_bin", c.heatmap.x_bin);
    s.reject_unknown();
  }
  {
    Section s(j, "log", errors);
    s.get("interval", c.log_interval);
    s.reject_unknown();
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"file: cannot open " + path.string()});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({"file: " + path.string() + ": " + e.what()});
  }
  return config_from_json(j);
}

json metrics_to_json(const RunMetrics& m) {
  json j;
  j["mode"] = to_string(m.mode);
  j["volume"] = m.volume;
  j["seed"] = m.seed;
  j["vehicles"] = {{"spawned", m.spawned},     {"entered", m.entered}, {"completed", m.completed},
                   {"on_road", m.on_road},     {"waiting", m.waiting}, {"measured", m.measured}};
  j["avg_travel_time_s"] = m.avg_travel_time;
  j["avg_fuel_l_per_100km"] = m.avg_fuel_per_100km;
  j["avg_entry_delay_s"] = m.avg_entry_delay;
  j["throughput_veh_per_h"] = m.throughput;
  j["min_cell_speed_after_warmup"] =
      m.min_cell_speed_after_warmup ? json(*m.min_cell_speed_after_warmup) : json(nullptr);
  j["heatmap"] = {{"t_bin", m.heatmap.t_bin}, {"x_bin", m.heatmap.x_bin},
                  {"n_t", m.heatmap.n_t},     {"n_x", m.heatmap.n_x}};
  const SafetyReport& s = m.safety;
  j["safety"] = {{"gap_violations", s.gap_violations},
                 {"overlap_violations", s.overlap_violations},
                 {"clearance_violations", s.clearance_violations},
                 {"total_violations", s.total()},
                 {"checks", s.checks},
                 {"min_same_lane_gap", s.checks > 0 && s.min_same_lane_gap < 1e9 ? json(s.min_same_lane_gap) : json(nullptr)},
                 {"min_changing_gap", s.checks > 0 && s.min_changing_gap < 1e9 ? json(s.min_changing_gap) : json(nullptr)}};
  j["integrity_failures"] = m.integrity_failures;
  const FormationStats& f = m.formation;
  j["formation"] = {{"formations", f.formations},
                    {"direct_plans", f.direct_plans},
                    {"straggler_events", f.straggler_events},
                    {"max_size", f.max_size},
                    {"max_switch_cycles", f.max_switch_cycles},
                    {"sequential_holds", f.sequential_holds},
                    {"max_tracking_error_m", f.max_tracking_error}};
  j["capacity_veh_per_h_lane"] = m.capacity;
  return j;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string heatmap_csv(const Heatmap& h) {
  std::string out = "t_bin,x_bin,mean_speed\n";
  for (int it = 0; it < h.n_t; ++it) {
    for (int ix = 0; ix < h.n_x; ++ix) {
      out += num(it * h.t_bin) + "," + num(ix * h.x_bin) + ",";
      if (const auto v = h.mean(it, ix)) out += num(*v);
      out += "\n";
    }
  }
  return out;
}

std::string log_csv(std::span<const LogRow> rows) {
  std::string out = "t,vehicle,lane,x,y,v,a,fuel_rate\n";
  for (const LogRow& r : rows) {
    out += num(r.t) + "," + std::to_string(r.vehicle) + "," + std::to_string(r.lane) + "," + num(r.x) + "," +
           num(r.y) + "," + num(r.v) + "," + num(r.a) + "," + num(r.fuel_rate) + "\n";
  }
  return out;
}

json error_json(const std::string& kind, const std::string& message, const std::vector<std::string>& details) {
  return {{"error", {{"kind", kind}, {"message", message}, {"details", details}}}};
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("cannot write " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace fcsim::io
