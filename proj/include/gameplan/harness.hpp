#pragma once

// Seeded sweeps over the strategy x scenario grid, per-cell aggregation, the
// strategy-ordering comparison and report emission.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gameplan/behavior.hpp"
#include "gameplan/sim/run.hpp"

namespace gameplan::harness {

using sim::Strategy;

inline constexpr double kMph45 = 20.1;  // m/s
inline constexpr double kMph60 = 26.8;

/// Matching key of a grid cell; strategies are compared on equal keys.
struct CellKey {
  sim::ScenarioKind kind = sim::ScenarioKind::intersection4way;
  double fraction = 0.0;
  int count = 0;
  int n_agents = 0;
  double max_speed = 0.0;

  auto operator<=>(const CellKey&) const = default;
};

struct SweepSpec {
  std::vector<Strategy> strategies{Strategy::gameplan, Strategy::economic, Strategy::fifo,
                                   Strategy::random};
  std::vector<double> fractions{0.20, 0.25, 0.33, 0.50};
  std::vector<int> counts{1, 2};
  std::vector<int> agent_counts{4, 6, 8, 10};
  std::vector<double> speeds{kMph45, kMph60};
  int runs_per_cell = 500;
  Seed base_seed = 0;
  unsigned threads = 1;
  sim::ScenarioConfig base;  // every other scenario knob

  void validate() const {
    if (runs_per_cell < 1) throw InvalidInput("runs_per_cell must be at least 1");
    if (strategies.empty() || fractions.empty() || counts.empty() || agent_counts.empty() ||
        speeds.empty()) {
      throw InvalidInput("every sweep axis needs at least one value");
    }
    if (threads < 1) throw InvalidInput("threads must be at least 1");
  }

  std::vector<CellKey> cells() const {
    std::vector<CellKey> out;
    for (double f : fractions)
      for (int c : counts)
        for (int n : agent_counts)
          for (double v : speeds) out.push_back({base.kind, f, c, n, v});
    return out;
  }

  sim::ScenarioConfig config_for(const CellKey& cell, Strategy strategy, int run) const {
    sim::ScenarioConfig c = base;
    c.kind = cell.kind;
    c.aggressive = {cell.fraction, cell.count};
    c.n_agents = cell.n_agents;
    c.max_speed = cell.max_speed;
    c.strategy = strategy;
    c.seed = base_seed + static_cast<Seed>(run);
    return c;
  }
};

struct MetricsRow {
  Strategy strategy = Strategy::gameplan;
  CellKey cell;
  int runs = 0;
  double collision_rate = 0.0;  // percent of episodes with at least one collision
  double deadlock_rate = 0.0;
  double success_rate = 0.0;
  double mean_ttg = NAN;        // over episodes in which every agent finished
  double collision_ci = 0.0;    // 95% half-width, percent
  double deadlock_ci = 0.0;
  double success_ci = 0.0;
  std::string error;            // set when the cell was aborted
};

using Table = std::vector<MetricsRow>;

/// Normal-approximation 95% half-width of a rate, in percent.
inline double ci_halfwidth(double percent, int runs) {
  const double p = percent / 100.0;
  return 100.0 * 1.96 * std::sqrt(p * (1.0 - p) / runs);
}

inline MetricsRow aggregate(Strategy strategy, const CellKey& cell,
                            const std::vector<sim::SimOutcome>& episodes) {
  MetricsRow row;
  row.strategy = strategy;
  row.cell = cell;
  row.runs = static_cast<int>(episodes.size());
  int collided = 0, deadlocked = 0, failed = 0, finished = 0;
  double ttg = 0.0;
  for (const auto& e : episodes) {
    collided += e.collisions > 0;
    deadlocked += e.deadlocks > 0;
    failed += e.collisions > 0 || e.deadlocks > 0;
    if (std::isfinite(e.total_ttg)) {
      ttg += e.total_ttg;
      ++finished;
    }
  }
  const double n = row.runs;
  row.collision_rate = 100.0 * collided / n;
  row.deadlock_rate = 100.0 * deadlocked / n;
  row.success_rate = 100.0 - 100.0 * failed / n;
  row.mean_ttg = finished ? ttg / finished : NAN;
  row.collision_ci = ci_halfwidth(row.collision_rate, row.runs);
  row.deadlock_ci = ci_halfwidth(row.deadlock_rate, row.runs);
  row.success_ci = ci_halfwidth(row.success_rate, row.runs);
  return row;
}

inline int strategy_rank(Strategy s) { return static_cast<int>(s); }

inline bool row_less(const MetricsRow& a, const MetricsRow& b) {
  if (a.strategy != b.strategy) return strategy_rank(a.strategy) < strategy_rank(b.strategy);
  return a.cell < b.cell;
}

/// Runs every (strategy, cell) combination. Episode seeds are
/// base_seed + run index, so matched cells share their random streams.
inline Table run_sweep(const SweepSpec& spec) {
  spec.validate();
  struct Job {
    Strategy strategy;
    CellKey cell;
  };
  std::vector<Job> jobs;
  for (Strategy s : spec.strategies)
    for (const auto& cell : spec.cells()) jobs.push_back({s, cell});

  Table table(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      try {
        std::vector<sim::SimOutcome> episodes;
        episodes.reserve(static_cast<std::size_t>(spec.runs_per_cell));
        for (int r = 0; r < spec.runs_per_cell; ++r) {
          episodes.push_back(sim::run_scenario(spec.config_for(job.cell, job.strategy, r)));
        }
        table[j] = aggregate(job.strategy, job.cell, episodes);
      } catch (const std::exception& e) {
        MetricsRow row;
        row.strategy = job.strategy;
        row.cell = job.cell;
        row.collision_rate = row.deadlock_rate = row.success_rate = NAN;
        row.error = e.what();
        table[j] = row;
      }
    }
  };
  const unsigned workers = std::min<unsigned>(spec.threads, static_cast<unsigned>(jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::sort(table.begin(), table.end(), row_less);
  return table;
}

// ---------------------------------------------------------------------------
// Strategy comparison

/// Expected order of collision rates, safest first.
inline const std::vector<Strategy>& expected_order() {
  static const std::vector<Strategy> order{Strategy::gameplan, Strategy::economic, Strategy::fifo,
                                           Strategy::random};
  return order;
}

struct PairCheck {
  Strategy safer;  // expected to have the lower rate
  Strategy riskier;
  double safer_rate = 0.0, safer_ci = 0.0;
  double riskier_rate = 0.0, riskier_ci = 0.0;
};

struct CellComparison {
  CellKey cell;
  bool strictly_ordered = true;
  std::vector<PairCheck> violations;    // reversed, intervals disjoint
  std::vector<PairCheck> inconclusive;  // reversed, intervals overlap
};

struct OrderingReport {
  std::vector<CellComparison> cells;
  std::size_t strict_cells = 0;
  std::size_t violation_count = 0;
  std::size_t inconclusive_count = 0;

  bool passed() const { return violation_count == 0; }
  double strict_fraction() const {
    return cells.empty() ? 0.0 : static_cast<double>(strict_cells) / cells.size();
  }
};

inline OrderingReport compare_strategies(const Table& table) {
  std::map<CellKey, std::map<Strategy, const MetricsRow*>> by_cell;
  std::set<Strategy> present;
  for (const auto& row : table) {
    if (!row.error.empty()) throw InvalidInput("cannot compare an aborted cell: " + row.error);
    by_cell[row.cell][row.strategy] = &row;
    present.insert(row.strategy);
  }
  if (present.size() < 2) throw InvalidInput("comparison needs at least two strategies");
  std::vector<Strategy> order;
  for (Strategy s : expected_order()) {
    if (present.contains(s)) order.push_back(s);
  }

  OrderingReport report;
  for (const auto& [cell, rows] : by_cell) {
    if (rows.size() != present.size()) throw InvalidInput("unmatched cell in comparison table");
    CellComparison cmp;
    cmp.cell = cell;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const auto* a = rows.at(order[i]);
      const auto* b = rows.at(order[i + 1]);
      const PairCheck check{order[i], order[i + 1], a->collision_rate, a->collision_ci,
                            b->collision_rate, b->collision_ci};
      if (!(a->collision_rate < b->collision_rate)) cmp.strictly_ordered = false;
      if (a->collision_rate > b->collision_rate) {
        const bool overlap = a->collision_rate - a->collision_ci <= b->collision_rate + b->collision_ci;
        (overlap ? cmp.inconclusive : cmp.violations).push_back(check);
      }
    }
    report.strict_cells += cmp.strictly_ordered;
    report.violation_count += cmp.violations.size();
    report.inconclusive_count += cmp.inconclusive.size();
    report.cells.push_back(std::move(cmp));
  }
  return report;
}

enum class Axis { fraction, n_agents, max_speed };

/// Mean collision rate of one strategy along an axis, averaged over the
/// other axes; sorted by axis value.
inline std::vector<std::pair<double, double>> trend(const Table& table, Strategy strategy, Axis axis) {
  std::map<double, std::pair<double, int>> acc;
  for (const auto& row : table) {
    if (row.strategy != strategy || !row.error.empty()) continue;
    const double key = axis == Axis::fraction   ? row.cell.fraction
                       : axis == Axis::n_agents ? static_cast<double>(row.cell.n_agents)
                                                : row.cell.max_speed;
    acc[key].first += row.collision_rate;
    acc[key].second += 1;
  }
  std::vector<std::pair<double, double>> out;
  for (const auto& [k, v] : acc) out.emplace_back(k, v.first / v.second);
  return out;
}

inline bool non_decreasing(const std::vector<std::pair<double, double>>& series) {
  for (std::size_t i = 1; i < series.size(); ++i) {
    if (series[i].second < series[i - 1].second) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { delimited, structured };

inline ReportFormat parse_report_format(const std::string& text) {
  if (text == "csv" || text == "delimited") return ReportFormat::delimited;
  if (text == "json" || text == "structured") return ReportFormat::structured;
  throw InvalidInput("unknown report format '" + text + "'");
}

inline double round2(double x) { return std::isfinite(x) ? std::round(x * 100.0) / 100.0 : x; }

inline std::string fixed2(double x) {
  if (!std::isfinite(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", round2(x));
  return buf;
}

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{
      "scenario",     "strategy",       "aggressive_fraction", "aggressive_count", "n_agents",
      "max_speed",    "runs",           "collision_rate",      "collision_ci",     "deadlock_rate",
      "deadlock_ci",  "success_rate",   "success_ci",          "mean_ttg",         "error"};
  return cols;
}

inline void write_csv(const Table& table, std::ostream& os) {
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : table) {
    os << to_string(r.cell.kind) << ',' << to_string(r.strategy) << ',' << fixed2(r.cell.fraction)
       << ',' << r.cell.count << ',' << r.cell.n_agents << ',' << fixed2(r.cell.max_speed) << ','
       << r.runs << ',' << fixed2(r.collision_rate) << ',' << fixed2(r.collision_ci) << ','
       << fixed2(r.deadlock_rate) << ',' << fixed2(r.deadlock_ci) << ',' << fixed2(r.success_rate)
       << ',' << fixed2(r.success_ci) << ',' << fixed2(r.mean_ttg) << ',' << r.error << '\n';
  }
}

inline nlohmann::ordered_json to_json(const Table& table) {
  auto num = [](double x) -> nlohmann::ordered_json {
    if (!std::isfinite(x)) return nullptr;
    return round2(x);
  };
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : table) {
    nlohmann::ordered_json j;
    j["scenario"] = to_string(r.cell.kind);
    j["strategy"] = to_string(r.strategy);
    j["aggressive_fraction"] = num(r.cell.fraction);
    j["aggressive_count"] = r.cell.count;
    j["n_agents"] = r.cell.n_agents;
    j["max_speed"] = num(r.cell.max_speed);
    j["runs"] = r.runs;
    j["collision_rate"] = num(r.collision_rate);
    j["collision_ci"] = num(r.collision_ci);
    j["deadlock_rate"] = num(r.deadlock_rate);
    j["deadlock_ci"] = num(r.deadlock_ci);
    j["success_rate"] = num(r.success_rate);
    j["success_ci"] = num(r.success_ci);
    j["mean_ttg"] = num(r.mean_ttg);
    j["error"] = r.error;
    rows.push_back(std::move(j));
  }
  return rows;
}

inline void write_json(const Table& table, std::ostream& os) { os << to_json(table).dump(2) << '\n'; }

inline void emit_report(const Table& table, ReportFormat format, std::ostream& os) {
  if (table.empty()) throw InvalidInput("refusing to emit an empty table");
  format == ReportFormat::delimited ? write_csv(table, os) : write_json(table, os);
}

inline void emit_report(const Table& table, ReportFormat format, const std::filesystem::path& path) {
  if (table.empty()) throw InvalidInput("refusing to emit an empty table");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  emit_report(table, format, os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

/// Output directory: GAMEPLAN_OUT_DIR when set, else the working directory.
inline std::filesystem::path default_output_dir() {
  if (const char* dir = std::getenv("GAMEPLAN_OUT_DIR"); dir && *dir) return dir;
  return std::filesystem::current_path();
}

// ---------------------------------------------------------------------------
// Config files
//
//   # comment
//   [sweep]
//   runs_per_cell = 500
//   base_seed = 0
//   [grid]
//   strategies = gameplan, economic, fifo, random
//   fractions = 0.20, 0.25, 0.33, 0.50
//   [scenario]
//   kind = intersection4way
//   timeout = 120

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& value, F parse) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) out.push_back(parse(item));
  if (out.empty()) throw InvalidInput("empty list");
  return out;
}

inline double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("not a number: '" + s + "'");
  }
  if (used != s.size()) throw InvalidInput("not a number: '" + s + "'");
  return v;
}

inline long long to_integer(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("not an integer: '" + s + "'");
  }
  if (used != s.size()) throw InvalidInput("not an integer: '" + s + "'");
  return v;
}

}  // namespace detail

/// Applies one `section.key = value` setting to a sweep spec.
inline void apply_setting(SweepSpec& spec, const std::string& section, const std::string& key,
                          const std::string& value) {
  using namespace detail;
  auto& b = spec.base;
  const std::string k = section.empty() ? key : section + "." + key;
  if (k == "sweep.runs_per_cell") spec.runs_per_cell = static_cast<int>(to_integer(value));
  else if (k == "sweep.base_seed") spec.base_seed = static_cast<Seed>(to_integer(value));
  else if (k == "sweep.threads") spec.threads = static_cast<unsigned>(to_integer(value));
  else if (k == "grid.strategies") spec.strategies = parse_list<Strategy>(value, sim::parse_strategy);
  else if (k == "grid.fractions") spec.fractions = parse_list<double>(value, to_double);
  else if (k == "grid.counts")
    spec.counts = parse_list<int>(value, [](const std::string& s) { return static_cast<int>(to_integer(s)); });
  else if (k == "grid.agents")
    spec.agent_counts =
        parse_list<int>(value, [](const std::string& s) { return static_cast<int>(to_integer(s)); });
  else if (k == "grid.speeds") spec.speeds = parse_list<double>(value, to_double);
  else if (k == "scenario.kind") b.kind = sim::parse_scenario_kind(value);
  else if (k == "scenario.lanes_per_approach") b.lanes_per_approach = static_cast<int>(to_integer(value));
  else if (k == "scenario.density_area") b.density_area = to_double(value);
  else if (k == "scenario.observation_vehicles") b.observation_vehicles = static_cast<int>(to_integer(value));
  else if (k == "scenario.timestep") b.timestep = to_double(value);
  else if (k == "scenario.mu") b.mu = to_double(value);
  else if (k == "scenario.observation_window") b.observation_window = to_double(value);
  else if (k == "scenario.timeout") b.timeout = to_double(value);
  else if (k == "scenario.collision_threshold") b.collision_threshold = to_double(value);
  else if (k == "scenario.deadlock_speed") b.deadlock_speed = to_double(value);
  else if (k == "scenario.deadlock_hold") b.deadlock_hold = to_double(value);
  else if (k == "scenario.zeta_noise") b.zeta_noise = to_double(value);
  else if (k == "scenario.crossing_time") b.crossing_time = to_double(value);
  else if (k == "scenario.decision_radius") b.decision_radius = to_double(value);
  else if (k == "scenario.currency_per_zeta") b.currency_per_zeta = to_double(value);
  else throw InvalidInput("unknown setting '" + k + "'");
}

inline void load_config(SweepSpec& spec, std::istream& in) {
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidInput("line " + std::to_string(number) + ": bad section");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("line " + std::to_string(number) + ": expected key = value");
    try {
      apply_setting(spec, section, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const InvalidInput& e) {
      throw InvalidInput("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

inline SweepSpec load_config_file(const std::filesystem::path& path, SweepSpec spec = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read config " + path.string());
  load_config(spec, in);
  return spec;
}

}  // namespace gameplan::harness
