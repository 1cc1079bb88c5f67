#pragma once

// Config files, metric documents and CSV artifacts.
//
// Config JSON (every section and key optional, defaults as in ScenarioConfig):
//   { "schema_version": 1,
//     "scenario": {num_lanes_up, num_lanes_down, l_upstream, l_3, volume,
//                  sim_duration, tick, warmup, mode, seed},
//     "road": {v_f, T, d_g, lane_width},
//     "limits": {v_min, v_max, a_min, a_max, delta_max_deg, wheelbase},
//     "vehicle": {length, width},
//     "control": {plan_dt, sim_dt, k_y, k_theta, preview, envelope, midpoint_waypoints},
//     "formation": {max_size, max_wait},
//     "idm": {v0, time_headway, min_gap, accel, decel, delta},
//     "lane_change": {lookahead, time_headway},
//     "fuel": {alpha, beta1, beta2, b1, b2, mass},
//     "heatmap": {t_bin, x_bin},
//     "log": {interval} }

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcsim/sim.hpp"

namespace fcsim::io {

inline constexpr int kSchemaVersion = 1;

nlohmann::json config_to_json(const ScenarioConfig& cfg);

/// Applies `j` on top of `base`. Unknown keys, wrong types and a missing or
/// unsupported schema_version are reported together as a ConfigError; the
/// result is then checked with validate().
ScenarioConfig config_from_json(const nlohmann::json& j, const ScenarioConfig& base = {});

/// Reads and parses a config file. Throws ConfigError (with a "file" entry
/// for unreadable or malformed files).
ScenarioConfig load_config(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const RunMetrics& m);

/// "t_bin,x_bin,mean_speed" with bin start times/positions; empty cells have
/// an empty mean_speed.
std::string heatmap_csv(const Heatmap& h);

/// "t,vehicle,lane,x,y,v,a,fuel_rate"
std::string log_csv(std::span<const LogRow> rows);

/// {"error": {"kind": ..., "message": ..., "details": [...]}}
nlohmann::json error_json(const std::string& kind, const std::string& message,
                          const std::vector<std::string>& details = {});

/// Writes to a temporary sibling and renames it over `path`, so readers see
/// either the old file or the complete new one.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// JSON text used for every artifact: sorted keys, 2-space indent, newline.
std::string dump(const nlohmann::json& j);

}  // namespace fcsim::io
