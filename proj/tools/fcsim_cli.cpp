// fcsim: single runs, volume sweeps and case studies.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 a run failed
// (for sweeps: at least one row failed; the summary is still written).

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fcsim/cases.hpp"
#include "fcsim/io.hpp"
#include "fcsim/pathmap.hpp"
#include "fcsim/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsage = 2;
constexpr int kFailed = 3;

struct UsageError : std::runtime_error {
  UsageError(const std::string& msg, std::vector<std::string> d = {})
      : std::runtime_error(msg), details(std::move(d)) {}
  std::vector<std::string> details;
};

int report(int code, const std::string& kind, const std::string& message,
           const std::vector<std::string>& details = {}) {
  std::cerr << fcsim::io::dump(fcsim::io::error_json(kind, message, details));
  return code;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& flag, const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split(s)) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError(flag + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

struct Common {
  std::string config;
  std::optional<std::string> mode;
  std::optional<double> volume;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

fcsim::ScenarioConfig resolve(const Common& c) {
  fcsim::ScenarioConfig cfg = c.config.empty() ? fcsim::ScenarioConfig{} : fcsim::io::load_config(c.config);
  std::vector<std::string> bad;
  if (c.mode) {
    try {
      cfg.mode = fcsim::mode_from_string(*c.mode);
    } catch (const std::invalid_argument& e) {
      bad.push_back(std::string("--mode: ") + e.what());
    }
  }
  if (c.volume) cfg.volume = *c.volume;
  if (c.seed) cfg.seed = *c.seed;
  if (!bad.empty()) throw fcsim::ConfigError(bad);
  fcsim::validate(cfg);
  return cfg;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw UsageError("--out: cannot create directory " + p.string());
}

int cmd_run(const Common& c) {
  const fcsim::ScenarioConfig cfg = resolve(c);
  const fs::path out = c.out;
  ensure_dir(out);
  fcsim::RunResult r;
  try {
    r = fcsim::run_simulation(cfg);
  } catch (const fcsim::DegenerateRun& e) {
    fs::remove(out / "metrics.json");
    fcsim::io::write_file_atomic(out / "error.json",
                                 fcsim::io::dump(fcsim::io::error_json("degenerate_run", e.what())));
    return report(kFailed, "degenerate_run", e.what());
  } catch (const fcsim::SimulationError& e) {
    fs::remove(out / "metrics.json");
    fcsim::io::write_file_atomic(out / "error.json",
                                 fcsim::io::dump(fcsim::io::error_json("simulation_error", e.what())));
    return report(kFailed, "simulation_error", e.what());
  }
  fs::remove(out / "error.json");
  fcsim::io::write_file_atomic(out / "config.json", fcsim::io::dump(fcsim::io::config_to_json(cfg)));
  fcsim::io::write_file_atomic(out / "run_log.csv", fcsim::io::log_csv(r.log));
  fcsim::io::write_file_atomic(out / "heatmap.csv", fcsim::io::heatmap_csv(r.metrics.heatmap));
  const std::string metrics = fcsim::io::dump(fcsim::io::metrics_to_json(r.metrics));
  fcsim::io::write_file_atomic(out / "metrics.json", metrics);
  std::cout << metrics;
  return r.metrics.safety.total() == 0 ? 0 : kFailed;
}

struct SweepRow {
  double volume;
  std::uint64_t seed;
  fcsim::Mode mode;
  std::optional<fcsim::RunMetrics> metrics;
  std::string error;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_sweep(const Common& c, const std::string& volumes, const std::string& seeds,
              const std::string& modes, int jobs) {
  const fcsim::ScenarioConfig base = resolve(c);
  const auto vols = parse_list<double>("--volumes", volumes);
  const auto seed_list = parse_list<std::uint64_t>("--seeds", seeds);
  std::vector<fcsim::Mode> mode_list;
  for (const auto& m : split(modes)) {
    try {
      mode_list.push_back(fcsim::mode_from_string(m));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--modes: ") + e.what());
    }
  }
  if (mode_list.empty()) throw UsageError("--modes: empty list");
  if (jobs < 1) throw UsageError("--jobs: must be at least 1");

  std::vector<SweepRow> rows;
  for (double v : vols) {
    for (auto s : seed_list) {
      for (auto m : mode_list) rows.push_back({v, s, m, std::nullopt, {}});
    }
  }
  // Check every row's config up front so a bad volume is a usage error.
  for (const auto& row : rows) {
    fcsim::ScenarioConfig cfg = base;
    cfg.volume = row.volume;
    fcsim::validate(cfg);
  }
  const fs::path out = c.out;
  ensure_dir(out / "runs");

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      SweepRow& row = rows[i];
      fcsim::ScenarioConfig cfg = base;
      cfg.volume = row.volume;
      cfg.seed = row.seed;
      cfg.mode = row.mode;
      cfg.log_interval = 0.0;
      try {
        row.metrics = fcsim::run_simulation(cfg).metrics;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string csv =
      "volume,seed,mode,status,avg_travel_time,avg_fuel_per_100km,avg_entry_delay,throughput,"
      "min_cell_speed,safety_violations,measured,message\n";
  int failed = 0;
  for (const auto& row : rows) {
    char vol[32];
    std::snprintf(vol, sizeof vol, "%g", row.volume);
    const std::string name = fcsim::to_string(row.mode) + "_v" + vol + "_s" + std::to_string(row.seed);
    csv += fmt(row.volume) + "," + std::to_string(row.seed) + "," + fcsim::to_string(row.mode) + ",";
    if (row.metrics) {
      const auto& m = *row.metrics;
      csv += "ok," + fmt(m.avg_travel_time) + "," + fmt(m.avg_fuel_per_100km) + "," + fmt(m.avg_entry_delay) +
             "," + fmt(m.throughput) + "," +
             (m.min_cell_speed_after_warmup ? fmt(*m.min_cell_speed_after_warmup) : std::string()) + "," +
             std::to_string(m.safety.total()) + "," + std::to_string(m.measured) + ",\n";
      fcsim::io::write_file_atomic(out / "runs" / (name + ".json"), fcsim::io::dump(fcsim::io::metrics_to_json(m)));
    } else {
      ++failed;
      std::string msg = row.error;
      for (char& ch : msg) {
        if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
      }
      csv += "failed,,,,,,,," + msg + "\n";
    }
  }
  fcsim::io::write_file_atomic(out / "summary.csv", csv);
  std::cout << csv;
  if (failed > 0) {
    return report(kFailed, "sweep_partial_failure",
                  std::to_string(failed) + " of " + std::to_string(rows.size()) + " runs failed");
  }
  return 0;
}

int cmd_case(const std::string& id, const Common& c) {
  const auto ids = fcsim::case_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
    throw UsageError("unknown case '" + id + "'", ids);
  }
  const fcsim::ScenarioConfig cfg = resolve(c);
  const fcsim::CaseResult r = fcsim::run_case(id, cfg);
  std::cout << "# case " << id << ": " << r.study.description << "\n";
  std::cout << "# cycles " << r.plan.cycles() << ", exchanges " << r.plan.assignment.exchanges << ", holds "
            << r.plan.holds.size() << "\n";
  fcsim::write_map(std::cout, r.plan.map);
  const fs::path out = c.out;
  ensure_dir(out);
  const fs::path file = out / ("case_" + id + "_trajectories.csv");
  fcsim::io::write_file_atomic(file, fcsim::case_trajectory_csv(r, cfg.plan_dt, 10));
  std::cout << "# trajectories written to " << file.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-lane formation control simulator"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--mode", c.mode, "fc or baseline");
    sub->add_option("--volume", c.volume, "veh/(h lane)");
    sub->add_option("--seed", c.seed, "RNG seed");
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
  };

  Common run_opts;
  auto* run = app.add_subcommand("run", "one simulation run");
  add_common(run, run_opts);

  Common sweep_opts;
  std::string volumes = "250,500,750,1000,1250,1500,1750,2000";
  std::string seeds = "1";
  std::string modes = "fc,baseline";
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "volume x seed x mode matrix");
  add_common(sweep, sweep_opts);
  sweep->add_option("--volumes", volumes, "comma-separated volumes")->capture_default_str();
  sweep->add_option("--seeds", seeds, "comma-separated seeds")->capture_default_str();
  sweep->add_option("--modes", modes, "comma-separated modes")->capture_default_str();
  sweep->add_option("--jobs", jobs, "parallel runs")->capture_default_str();

  Common case_opts;
  case_opts.out = ".";
  std::string case_id;
  auto* kase = app.add_subcommand("case", "print a case-study path map and write trajectories");
  kase->add_option("id", case_id, "1, 2, lanes-3to1, lanes-3to2 or lanes-3to4")->required();
  kase->add_option("--config", case_opts.config, "JSON config file");
  kase->add_option("--out", case_opts.out, "output directory")->capture_default_str();

  auto* defaults = app.add_subcommand("defaults", "print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return report(kUsage, "usage", e.what());
  }

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, volumes, seeds, modes, jobs);
    if (kase->parsed()) return cmd_case(case_id, case_opts);
    if (defaults->parsed()) {
      std::cout << fcsim::io::dump(fcsim::io::config_to_json(fcsim::ScenarioConfig{}));
      return 0;
    }
  } catch (const fcsim::ConfigError& e) {
    return report(kUsage, "config", e.what(), e.problems);
  } catch (const UsageError& e) {
    return report(kUsage, "usage", e.what(), e.details);
  } catch (const std::exception& e) {
    return report(kFailed, "internal", e.what());
  }
  return kUsage;
}
