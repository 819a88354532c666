// gameplan: behavior profiling, turn auctions, single episodes, sweeps and
// property checks from the command line.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "gameplan/auction.hpp"
#include "gameplan/behavior.hpp"
#include "gameplan/harness.hpp"
#include "gameplan/sim/run.hpp"
#include "gameplan/verify.hpp"
#include "json.hpp"

using namespace gameplan;
namespace fs = std::filesystem;

namespace {

// "-" means stdout; relative paths land in the output directory.
class Output {
 public:
  explicit Output(const std::string& where) {
    if (where.empty() || where == "-") return;
    fs::path p(where);
    if (p.is_relative()) p = harness::default_output_dir() / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    file_ = std::make_unique<std::ofstream>(p, std::ios::binary);
    if (!*file_) throw std::runtime_error("cannot write " + p.string());
    path_ = p;
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void close() {
    if (!file_) return;
    file_->close();
    if (!*file_) throw std::runtime_error("failed writing " + path_.string());
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  fs::path path_;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path);
  return in;
}

std::string fmt(double x, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

nlohmann::ordered_json outcome_json(const sim::ScenarioConfig& c, const sim::SimOutcome& o) {
  auto num = [](double x) -> nlohmann::ordered_json {
    if (!std::isfinite(x)) return nullptr;
    return harness::round2(x);
  };
  nlohmann::ordered_json j;
  j["scenario"] = sim::to_string(c.kind);
  j["strategy"] = sim::to_string(c.strategy);
  j["n_agents"] = c.n_agents;
  j["seed"] = c.seed;
  j["collisions"] = o.collisions;
  j["deadlocks"] = o.deadlocks;
  j["timed_out"] = o.timed_out;
  j["success"] = o.success;
  j["defections"] = o.defections;
  j["rounds"] = o.rounds;
  j["max_zone_occupancy"] = o.max_zone_occupancy;
  j["total_ttg"] = num(o.total_ttg);
  j["end_time"] = num(o.end_time);
  auto ttg = nlohmann::ordered_json::array();
  for (const auto& t : o.time_to_goal) ttg.push_back(t ? num(*t) : nullptr);
  j["time_to_goal"] = ttg;
  auto dl = nlohmann::ordered_json::array();
  for (const auto& e : o.deadlock_events) {
    dl.push_back({{"stall_start", num(e.stall_start)},
                  {"detected", num(e.detected)},
                  {"resolved", e.resolved ? num(*e.resolved) : nullptr}});
  }
  j["deadlock_events"] = dl;
  return j;
}

void write_outcome_row(std::ostream& os, const sim::ScenarioConfig& c, const sim::SimOutcome& o) {
  os << "scenario,strategy,n_agents,seed,collisions,deadlocks,timed_out,success,defections,rounds,"
        "max_zone_occupancy,total_ttg,end_time\n";
  os << sim::to_string(c.kind) << ',' << sim::to_string(c.strategy) << ',' << c.n_agents << ',' << c.seed << ','
     << o.collisions << ',' << o.deadlocks << ',' << o.timed_out << ',' << o.success << ',' << o.defections << ','
     << o.rounds << ',' << o.max_zone_occupancy << ',' << harness::fixed2(o.total_ttg) << ','
     << harness::fixed2(o.end_time) << '\n';
}

int run_profile(const std::string& input, const std::string& output, double mu, double start,
                double end) {
  auto in = open_input(input);
  const auto trajectories = behavior::read_trajectories(in);
  const auto profiles = behavior::compute_all_profiles(trajectories, mu, {start, end});
  Output out(output);
  behavior::write_profiles(out.stream(), profiles);
  out.close();
  return 0;
}

int run_auction(const std::string& input, const std::string& output, double tau, Seed seed) {
  auto in = open_input(input);
  const auto profiles = behavior::read_profiles(in);
  std::vector<auction::Valuation> vals;
  for (const auto& p : profiles) vals.push_back({p.agent_id, p.zeta});
  const auto result = auction::run_gameplan_auction(vals, tau, seed);
  Output out(output);
  auto& os = out.stream();
  os << "turn,agent_id,zeta,turn_time,reward,utility,payment\n";
  const auto& by_turn = result.schedule.ordering.agents_by_turn();
  for (std::size_t k = 0; k < by_turn.size(); ++k) {
    os << k + 1 << ',' << by_turn[k] << ',' << fmt(result.bids_by_turn[k]) << ','
       << fmt(result.schedule.turn_times[k]) << ',' << fmt(result.schedule.rewards[k]) << ','
       << fmt(result.utilities_by_turn[k]) << ',' << fmt(result.payments_by_turn[k]) << '\n';
  }
  out.close();
  std::cerr << "welfare " << fmt(result.welfare) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-driven turn ordering for unsignaled intersections"};
  app.require_subcommand(1);

  // profile
  std::string traj_in, prof_out = "-";
  double mu = behavior::kDefaultRadius, win_start = 0.0, win_end = behavior::kDefaultWindowSeconds;
  auto* profile = app.add_subcommand("profile", "trajectories -> per-agent zeta");
  profile->add_option("input", traj_in, "agent_id,time,x,y,speed rows")->required();
  profile->add_option("-o,--output", prof_out, "profile table (default stdout)");
  profile->add_option("--mu", mu, "proximity radius, meters")->check(CLI::PositiveNumber);
  profile->add_option("--window-start", win_start);
  profile->add_option("--window-end", win_end);

  // auction
  std::string prof_in, order_out = "-";
  double tau = 3.0;
  Seed auction_seed = 0;
  auto* auc = app.add_subcommand("auction", "zeta table -> turn ordering, utilities and payments");
  auc->add_option("input", prof_in, "agent_id,zeta rows")->required();
  auc->add_option("-o,--output", order_out);
  auc->add_option("--tau", tau, "crossing time per turn, seconds")->check(CLI::PositiveNumber);
  auc->add_option("--seed", auction_seed, "tie-break seed");

  // simulate
  sim::ScenarioConfig sc;
  std::string kind = "intersection4way", strategy = "gameplan", trace, sim_out = "-", sim_format = "csv";
  std::optional<double> fraction;
  std::optional<int> count;
  auto* simulate = app.add_subcommand("simulate", "run one seeded episode");
  simulate->add_option("--scenario", kind, "intersection4way | roundabout | merge");
  simulate->add_option("--strategy", strategy, "gameplan | economic | fifo | random | none");
  simulate->add_option("-n,--agents", sc.n_agents);
  simulate->add_option("--aggressive", fraction, "fraction of aggressive agents")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--aggressive-count", count, "at least this many aggressive agents");
  simulate->add_option("--max-speed", sc.max_speed, "m/s");
  simulate->add_option("--seed", sc.seed);
  simulate->add_option("--timeout", sc.timeout);
  simulate->add_option("--zeta-noise", sc.zeta_noise);
  simulate->add_option("--trace", trace, "write agent_id,t,x,y,speed,turn_index rows");
  simulate->add_option("--out,-o", sim_out, "per-run record (default stdout)");
  simulate->add_option("--format", sim_format, "csv | json");

  // sweep
  std::string config_path, sweep_out = "sweep.csv", format = "csv";
  std::optional<int> runs;
  std::optional<Seed> base_seed;
  std::optional<unsigned> threads;
  std::vector<std::string> strategies;
  bool require_order = false;
  auto* sweep = app.add_subcommand("sweep", "run the strategy x scenario grid");
  sweep->add_option("-c,--config", config_path, "INI file; flags override it");
  sweep->add_option("--runs", runs, "episodes per cell");
  sweep->add_option("--seed", base_seed, "base seed; episode seeds are base + run index");
  sweep->add_option("--threads", threads);
  sweep->add_option("--strategies", strategies)->delimiter(',');
  sweep->add_option("--format", format, "csv | json");
  sweep->add_option("-o,--output", sweep_out, "report path, '-' for stdout");
  sweep->add_flag("--require-order", require_order, "fail unless strategies are ordered in every cell");

  // verify
  std::size_t trials = 1000, max_n = 10, brute_n = 8, big_n = 100000;
  Seed verify_seed = 1;
  std::string suite = "all", verify_table;
  auto* verify = app.add_subcommand("verify", "property suites for the auction");
  verify->add_option("--suite", suite, "incentive | welfare | complexity | all");
  verify->add_option("--trials", trials, "random instances per suite");
  verify->add_option("--n", max_n, "largest agent count in incentive trials")->check(CLI::Range(2, 1000));
  verify->add_option("--max-brute-force-n", brute_n, "largest agent count in welfare trials")->check(CLI::Range(1, 10));
  verify->add_option("--complexity-n", big_n, "profiles in the timing run");
  verify->add_option("--seed", verify_seed);
  verify->add_option("--table", verify_table, "per-trial rows: suite,trial,n,passed,value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*profile) return run_profile(traj_in, prof_out, mu, win_start, win_end);
    if (*auc) return run_auction(prof_in, order_out, tau, auction_seed);

    if (*simulate) {
      sc.kind = sim::parse_scenario_kind(kind);
      sc.strategy = sim::parse_strategy(strategy);
      if (fraction || count) sc.aggressive = {fraction, count};
      std::unique_ptr<std::ofstream> trace_file;
      std::unique_ptr<sim::TraceWriter> writer;
      sim::StepObserver observer;
      if (!trace.empty()) {
        trace_file = std::make_unique<std::ofstream>(trace, std::ios::binary);
        if (!*trace_file) throw std::runtime_error("cannot write " + trace);
        writer = std::make_unique<sim::TraceWriter>(*trace_file);
        observer = [&](const sim::World& w) { (*writer)(w); };
      }
      const auto outcome = sim::run_scenario(sc, observer);
      Output out(sim_out);
      if (harness::parse_report_format(sim_format) == harness::ReportFormat::structured) {
        out.stream() << outcome_json(sc, outcome).dump(2) << '\n';
      } else {
        write_outcome_row(out.stream(), sc, outcome);
      }
      out.close();
      return 0;
    }

    if (*sweep) {
      harness::SweepSpec spec;
      if (!config_path.empty()) spec = harness::load_config_file(config_path);
      if (runs) spec.runs_per_cell = *runs;
      if (base_seed) spec.base_seed = *base_seed;
      if (threads) spec.threads = *threads;
      if (!strategies.empty()) {
        spec.strategies.clear();
        for (const auto& s : strategies) spec.strategies.push_back(sim::parse_strategy(s));
      }
      const auto table = harness::run_sweep(spec);
      Output out(sweep_out);
      harness::emit_report(table, harness::parse_report_format(format), out.stream());
      out.close();
      bool ok = true;
      for (const auto& row : table) {
        if (!row.error.empty()) {
          std::cerr << "cell aborted: " << sim::to_string(row.strategy) << " n=" << row.cell.n_agents
                    << ": " << row.error << '\n';
          ok = false;
        }
      }
      if (ok && spec.strategies.size() >= 2) {
        const auto report = harness::compare_strategies(table);
        std::cerr << "strictly ordered cells " << report.strict_cells << '/' << report.cells.size()
                  << ", violations " << report.violation_count << ", inconclusive "
                  << report.inconclusive_count << '\n';
        if (require_order && !report.passed()) ok = false;
      }
      return ok ? 0 : 1;
    }

    if (*verify) {
      std::vector<verify::SuiteResult> results;
      if (suite == "incentive" || suite == "all") results.push_back(verify::incentive_suite(trials, verify_seed, max_n));
      if (suite == "welfare" || suite == "all") results.push_back(verify::welfare_suite(trials, verify_seed, brute_n));
      if (suite == "complexity" || suite == "all") results.push_back(verify::complexity_suite(big_n, verify_seed));
      if (results.empty()) throw InvalidInput("unknown suite '" + suite + "'");
      if (!verify_table.empty()) {
        Output table(verify_table);
        verify::write_trials(table.stream(), results);
        table.close();
      }
      bool ok = true;
      for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " instances=" << r.instances
                  << " failures=" << r.failures << " seconds=" << fmt(r.seconds, "%.4f");
        if (!r.detail.empty()) std::cout << ' ' << r.detail;
        std::cout << '\n';
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
