#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "gameplan/harness.hpp"
#include "gameplan/verify.hpp"

using namespace gameplan;
using namespace gameplan::harness;

namespace {

MetricsRow row(Strategy s, int n, double rate, int runs = 500) {
  MetricsRow r;
  r.strategy = s;
  r.cell = {sim::ScenarioKind::intersection4way, 0.25, 1, n, 20.1};
  r.runs = runs;
  r.collision_rate = rate;
  r.collision_ci = ci_halfwidth(rate, runs);
  r.success_rate = 100 - rate;
  return r;
}

SweepSpec tiny() {
  SweepSpec s;
  s.fractions = {0.5};
  s.counts = {1};
  s.agent_counts = {4};
  s.speeds = {kMph45};
  s.runs_per_cell = 6;
  return s;
}

}  // namespace

TEST(Aggregate, EpisodeRatesAndInterval) {
  std::vector<sim::SimOutcome> eps(4);
  eps[0].collisions = 2;
  eps[1].deadlocks = 1;
  eps[2].collisions = 1;
  eps[2].deadlocks = 1;
  eps[3].total_ttg = 20.0;
  eps[0].total_ttg = NAN;
  const auto r = aggregate(Strategy::fifo, {}, eps);
  EXPECT_EQ(r.runs, 4);
  EXPECT_DOUBLE_EQ(r.collision_rate, 50.0);
  EXPECT_DOUBLE_EQ(r.deadlock_rate, 50.0);
  EXPECT_DOUBLE_EQ(r.success_rate, 25.0);
  EXPECT_DOUBLE_EQ(r.mean_ttg, 20.0);
  EXPECT_NEAR(r.collision_ci, 100 * 1.96 * 0.25, 1e-12);
  EXPECT_EQ(ci_halfwidth(0.0, 500), 0.0);
}

TEST(Compare, StrictViolationAndInconclusive) {
  Table t{row(Strategy::gameplan, 4, 0), row(Strategy::economic, 4, 3), row(Strategy::fifo, 4, 8),
          row(Strategy::random, 4, 15),
          row(Strategy::gameplan, 6, 0), row(Strategy::economic, 6, 30), row(Strategy::fifo, 6, 8),
          row(Strategy::random, 6, 9),
          row(Strategy::gameplan, 8, 0), row(Strategy::economic, 8, 5), row(Strategy::fifo, 8, 10),
          row(Strategy::random, 8, 9.5)};
  const auto rep = compare_strategies(t);
  ASSERT_EQ(rep.cells.size(), 3u);
  EXPECT_EQ(rep.strict_cells, 1u);
  EXPECT_EQ(rep.violation_count, 1u);
  EXPECT_EQ(rep.inconclusive_count, 1u);
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.cells[1].violations[0].safer, Strategy::economic);
  EXPECT_EQ(rep.cells[2].inconclusive[0].riskier, Strategy::random);
}

TEST(Compare, EqualRatesAreOrderedButNotStrict) {
  Table t{row(Strategy::fifo, 4, 5), row(Strategy::random, 4, 5)};
  const auto rep = compare_strategies(t);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(rep.strict_cells, 0u);
}

TEST(Compare, Errors) {
  EXPECT_THROW(compare_strategies({row(Strategy::fifo, 4, 5)}), InvalidInput);
  EXPECT_THROW(compare_strategies({row(Strategy::fifo, 4, 5), row(Strategy::random, 6, 5)}), InvalidInput);
  auto broken = row(Strategy::random, 4, 5);
  broken.error = "boom";
  EXPECT_THROW(compare_strategies({row(Strategy::fifo, 4, 5), broken}), InvalidInput);
}

TEST(Trend, AveragesAlongAnAxis) {
  Table t{row(Strategy::fifo, 4, 2), row(Strategy::fifo, 6, 4), row(Strategy::fifo, 8, 3), row(Strategy::random, 8, 99)};
  const auto s = trend(t, Strategy::fifo, Axis::n_agents);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1], (std::pair<double, double>{6.0, 4.0}));
  EXPECT_FALSE(non_decreasing(s));
  EXPECT_TRUE(non_decreasing({{1, 1}, {2, 1}, {3, 2}}));
}

TEST(Sweep, SeedsAreBasePlusRunIndex) {
  auto s = tiny();
  s.base_seed = 100;
  const auto c = s.config_for(s.cells()[0], Strategy::fifo, 7);
  EXPECT_EQ(c.seed, 107u);
  EXPECT_EQ(c.strategy, Strategy::fifo);
  EXPECT_EQ(c.n_agents, 4);
  EXPECT_EQ(s.cells().size(), 1u);
  EXPECT_EQ(SweepSpec{}.cells().size(), 64u);
}

TEST(Sweep, MatchesDirectEpisodes) {
  auto s = tiny();
  s.strategies = {Strategy::random};
  const auto t = run_sweep(s);
  ASSERT_EQ(t.size(), 1u);
  int collided = 0;
  for (int r = 0; r < s.runs_per_cell; ++r) collided += sim::run_scenario(s.config_for(t[0].cell, Strategy::random, r)).collisions > 0;
  EXPECT_DOUBLE_EQ(t[0].collision_rate, 100.0 * collided / s.runs_per_cell);
}

TEST(Sweep, ThreadsDoNotChangeResults) {
  auto s = tiny();
  s.agent_counts = {4, 6};
  std::ostringstream one, many;
  write_csv(run_sweep(s), one);
  s.threads = 3;
  write_csv(run_sweep(s), many);
  EXPECT_EQ(one.str(), many.str());
}

TEST(Sweep, BadCellIsReportedNotFatal) {
  auto s = tiny();
  s.strategies = {Strategy::gameplan};
  s.agent_counts = {4, 400};
  const auto t = run_sweep(s);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_TRUE(t[0].error.empty());
  EXPECT_FALSE(t[1].error.empty());
  s.runs_per_cell = 0;
  EXPECT_THROW(run_sweep(s), InvalidInput);
}

TEST(Report, CsvColumnsAndRounding) {
  auto r = row(Strategy::economic, 4, 2.4761);
  r.mean_ttg = NAN;
  std::ostringstream os;
  emit_report({r}, ReportFormat::delimited, os);
  std::istringstream in(os.str());
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header.rfind("scenario,strategy,aggressive_fraction", 0), 0u);
  EXPECT_EQ(line.rfind("intersection4way,economic,0.25,1,4,20.10,500,2.48,", 0), 0u);
  EXPECT_NE(line.find(",nan,"), std::string::npos);
  EXPECT_THROW(emit_report({}, ReportFormat::delimited, os), InvalidInput);
}

TEST(Report, JsonMirrorsCsv) {
  auto r = row(Strategy::fifo, 6, 7.1849);
  r.mean_ttg = 30.456;
  std::ostringstream os;
  emit_report({r}, ReportFormat::structured, os);
  const auto j = nlohmann::json::parse(os.str());
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["strategy"], "fifo");
  EXPECT_DOUBLE_EQ(j[0]["collision_rate"].get<double>(), 7.18);
  EXPECT_DOUBLE_EQ(j[0]["mean_ttg"].get<double>(), 30.46);
  EXPECT_EQ(parse_report_format("json"), ReportFormat::structured);
  EXPECT_THROW(parse_report_format("xml"), InvalidInput);
}

TEST(Config, FileSettingsApply) {
  std::istringstream in(R"(
# grid for a quick look
[sweep]
runs_per_cell = 20
base_seed = 9
[grid]
strategies = gameplan, fifo
fractions = 0.2, 0.5
agents = 4
[scenario]
timeout = 90
currency_per_zeta = 0.5
)");
  SweepSpec s;
  load_config(s, in);
  EXPECT_EQ(s.runs_per_cell, 20);
  EXPECT_EQ(s.base_seed, 9u);
  EXPECT_EQ(s.strategies, (std::vector<Strategy>{Strategy::gameplan, Strategy::fifo}));
  EXPECT_EQ(s.fractions, (std::vector<double>{0.2, 0.5}));
  EXPECT_EQ(s.agent_counts, (std::vector<int>{4}));
  EXPECT_EQ(s.base.timeout, 90.0);
  EXPECT_EQ(s.base.currency_per_zeta, 0.5);
}

TEST(Config, BadLinesNameTheLine) {
  auto fails = [](const std::string& text) {
    std::istringstream in(text);
    SweepSpec s;
    try {
      load_config(s, in);
    } catch (const InvalidInput& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(fails("[sweep]\nrunz = 3\n").find("line 2"), std::string::npos);
  EXPECT_NE(fails("[sweep\n").find("line 1"), std::string::npos);
  EXPECT_NE(fails("[grid]\nfractions = 0.2, x\n").find("line 2"), std::string::npos);
  EXPECT_NE(fails("just words\n").find("line 1"), std::string::npos);
  EXPECT_NE(fails("[sweep]\nruns_per_cell = 5.5\n").find("line 2"), std::string::npos);
}

TEST(OutputDir, EnvironmentWins) {
  ::setenv("GAMEPLAN_OUT_DIR", "/tmp/somewhere", 1);
  EXPECT_EQ(default_output_dir(), std::filesystem::path("/tmp/somewhere"));
  ::unsetenv("GAMEPLAN_OUT_DIR");
  EXPECT_EQ(default_output_dir(), std::filesystem::current_path());
}

TEST(Verify, SuitesPass) {
  EXPECT_TRUE(verify::incentive_suite(200, 1).passed);
  EXPECT_TRUE(verify::welfare_suite(100, 1).passed);
  const auto c = verify::complexity_suite(1000, 1, 1.0);
  EXPECT_TRUE(c.passed);
}
