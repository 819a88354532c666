#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "gameplan/behavior.hpp"
#include "gameplan/sim/observation.hpp"
#include "generators.hpp"

using namespace gameplan;
using namespace gameplan::behavior;

namespace {

TrajectorySample at(AgentId id, double t, double x, double y, double v) { return {id, t, {x, y}, v}; }

// Pairwise oracle: every pair within mu, by direct distance.
std::set<std::pair<AgentId, AgentId>> pairs_within(const std::vector<TrajectorySample>& s, double mu) {
  std::set<std::pair<AgentId, AgentId>> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (i != j && std::hypot(s[i].position.x - s[j].position.x, s[i].position.y - s[j].position.y) <= mu)
        out.insert({std::min(s[i].agent_id, s[j].agent_id), std::max(s[i].agent_id, s[j].agent_id)});
  return out;
}

// Recount from scratch: a neighbor counts once, at the first snapshot it is
// adjacent, if it is no faster than the agent at that snapshot.
std::vector<int> centrality_oracle(const std::vector<TrafficGraph>& graphs, AgentId agent) {
  std::vector<int> out;
  std::set<AgentId> met;
  int value = 0;
  for (const auto& g : graphs) {
    std::set<AgentId> fresh;
    const auto* self = g.vertex(agent);
    for (const auto& e : g.edges) {
      AgentId other = e.a == agent ? e.b : e.b == agent ? e.a : -1;
      if (other < 0 || met.count(other)) continue;
      fresh.insert(other);
      if (g.vertex(other)->speed <= self->speed) ++value;
    }
    met.insert(fresh.begin(), fresh.end());
    out.push_back(value);
  }
  return out;
}

}  // namespace

TEST(TrafficGraph, EdgesMatchPairwiseDistances) {
  testgen::Gen gen(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TrajectorySample> snap;
    const int n = gen.integer(1, 12);
    for (int i = 0; i < n; ++i) snap.push_back(at(i, 1.0, gen.real(0, 40), gen.real(0, 20), gen.real(0, 30)));
    const double mu = gen.real(1, 20);
    const auto g = build_traffic_graph(snap, mu);
    std::set<std::pair<AgentId, AgentId>> got;
    for (const auto& e : g.edges) {
      EXPECT_LT(e.a, e.b);
      EXPECT_LE(e.weight, mu);
      got.insert({e.a, e.b});
    }
    EXPECT_EQ(got, pairs_within(snap, mu));
    EXPECT_EQ(g.vertices.size(), snap.size());
  }
}

TEST(TrafficGraph, RadiusIsInclusive) {
  std::vector<TrajectorySample> snap{at(0, 0, 0, 0, 1), at(1, 0, 10, 0, 1), at(2, 0, 20.5, 0, 1)};
  const auto g = build_traffic_graph(snap, 10.0);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_FALSE(g.has_edge(1, 2));
  EXPECT_FALSE(g.has_edge(0, 2));
}

TEST(TrafficGraph, RejectsBadSnapshots) {
  EXPECT_THROW(build_traffic_graph(std::vector{at(0, 0, 0, 0, 1)}, 0.0), InvalidInput);
  EXPECT_THROW(build_traffic_graph(std::vector{at(0, 0, 0, 0, 1), at(0, 0, 1, 1, 1)}), InvalidInput);
  EXPECT_THROW(build_traffic_graph(std::vector{at(0, 0, 0, 0, 1), at(1, 1, 1, 1, 1)}), InvalidInput);
  EXPECT_THROW(build_traffic_graph(std::vector{at(0, 0, NAN, 0, 1)}), InvalidInput);
  EXPECT_THROW(build_traffic_graph(std::vector{at(0, 0, 0, 0, -1)}), InvalidInput);
  EXPECT_TRUE(build_traffic_graph(std::vector<TrajectorySample>{}).vertices.empty());
}

TEST(Centrality, HandWorkedSeries) {
  // Agent 0 at 20 m/s passes 1 (slower) then 2 (faster), then meets 1 again.
  std::vector<Trajectory> trajs{
      {0, {at(0, 0, 0, 0, 20), at(0, 1, 30, 0, 20), at(0, 2, 60, 0, 20), at(0, 3, 90, 0, 20)}},
      {1, {at(1, 0, 5, 0, 10), at(1, 1, 15, 0, 10), at(1, 2, 25, 0, 10), at(1, 3, 88, 0, 10)}},
      {2, {at(2, 0, 200, 0, 25), at(2, 1, 200, 0, 25), at(2, 2, 62, 0, 25), at(2, 3, 300, 0, 25)}},
  };
  const auto graphs = build_graph_sequence(trajs, 10.0, {0.0, 3.0});
  ASSERT_EQ(graphs.size(), 4u);
  const auto s = degree_centrality_with_memory(graphs, 0);
  EXPECT_EQ(s.values, (std::vector<int>{1, 1, 1, 1}));
  EXPECT_EQ(s.seen_neighbors, (std::set<AgentId>{1}));
  EXPECT_EQ(degree_centrality_with_memory(graphs, 2).values, (std::vector<int>{0, 0, 1, 1}));
}

TEST(Centrality, MatchesRecountOracle) {
  testgen::Gen gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto trajs = testgen::random_traffic(gen, gen.integer(2, 10), gen.integer(2, 30));
    const double end = trajs.front().samples.back().time;
    const auto graphs = build_graph_sequence(trajs, 10.0, {0.0, end});
    for (const auto& t : trajs) {
      const auto s = degree_centrality_with_memory(graphs, t.agent_id);
      EXPECT_EQ(s.values, centrality_oracle(graphs, t.agent_id));
      EXPECT_TRUE(std::is_sorted(s.values.begin(), s.values.end()));
      EXPECT_EQ(static_cast<int>(s.seen_neighbors.size()), s.values.back());
      EXPECT_EQ(s.seen_neighbors.count(t.agent_id), 0u);
    }
  }
}

TEST(Centrality, AbsentAgentIsAnError) {
  std::vector<Trajectory> trajs{{0, {at(0, 0, 0, 0, 1), at(0, 1, 1, 0, 1)}}};
  const auto graphs = build_graph_sequence(trajs, 10.0, {0.0, 1.0});
  EXPECT_THROW(degree_centrality_with_memory(graphs, 5), InvalidInput);
}

TEST(Profile, WindowMustBeCovered) {
  std::vector<Trajectory> trajs{{0, {at(0, 0, 0, 0, 1), at(0, 1, 1, 0, 1)}}};
  EXPECT_THROW(compute_behavior_profile(trajs, 0, 10.0, {0.0, 5.0}), InvalidInput);
  EXPECT_THROW(compute_behavior_profile(trajs, 0, 10.0, {1.0, 1.0}), InvalidInput);
  EXPECT_THROW(compute_behavior_profile(trajs, 3, 10.0, {0.0, 1.0}), InvalidInput);
  EXPECT_EQ(compute_behavior_profile(trajs, 0, 10.0, {0.0, 1.0}).zeta, 0.0);
}

TEST(Profile, NonMonotoneTimestampsRejected) {
  std::vector<Trajectory> trajs{{0, {at(0, 1, 0, 0, 1), at(0, 0, 1, 0, 1)}}};
  EXPECT_THROW(build_graph_sequence(trajs, 10.0, {0.0, 1.0}), InvalidInput);
}

TEST(Profile, CustomCentralityIsUsed) {
  std::vector<Trajectory> trajs{{0, {at(0, 0, 0, 0, 1), at(0, 1, 1, 0, 1)}}};
  auto constant = [](std::span<const TrafficGraph> g, AgentId id) {
    return CentralitySeries{id, std::vector<int>(g.size(), 42), {}};
  };
  EXPECT_EQ(compute_behavior_profile(trajs, 0, 10.0, {0.0, 1.0}, constant).zeta, 42.0);
}

TEST(Io, TrajectoryRoundTrip) {
  testgen::Gen gen(3);
  const auto trajs = testgen::random_traffic(gen, 4, 6);
  std::stringstream ss;
  write_trajectories(ss, trajs);
  const auto back = read_trajectories(ss);
  ASSERT_EQ(back.size(), trajs.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    ASSERT_EQ(back[i].samples.size(), trajs[i].samples.size());
    for (std::size_t k = 0; k < back[i].samples.size(); ++k) {
      EXPECT_EQ(back[i].samples[k].position, trajs[i].samples[k].position);
      EXPECT_EQ(back[i].samples[k].speed, trajs[i].samples[k].speed);
    }
  }
}

TEST(Io, MalformedRowsRejected) {
  std::stringstream bad("agent_id,time,x,y,speed\n0,0,1,2\n");
  EXPECT_THROW(read_trajectories(bad), InvalidInput);
  std::stringstream word("agent_id,time,x,y,speed\n0,zero,1,2,3\n");
  EXPECT_THROW(read_trajectories(word), InvalidInput);
  std::stringstream empty;
  EXPECT_THROW(read_trajectories(empty), InvalidInput);
  std::stringstream negative("agent_id,zeta\n0,-1\n");
  EXPECT_THROW(read_profiles(negative), InvalidInput);
}

TEST(Io, ProfileRoundTrip) {
  std::vector<BehaviorProfile> p{{3, 2.5, {0, 5}}, {1, 0.0, {0, 5}}};
  std::stringstream ss;
  write_profiles(ss, p);
  const auto back = read_profiles(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].agent_id, 3);
  EXPECT_EQ(back[0].zeta, 2.5);
  EXPECT_EQ(back[1].window.end, 5.0);
}

TEST(Observation, AggressiveScoresAboveConservative) {
  sim::ScenarioConfig cfg;
  double aggressive = 0, conservative = 0;
  for (Seed s = 0; s < 40; ++s) {
    const sim::BehaviorClass a[] = {sim::BehaviorClass::aggressive};
    const sim::BehaviorClass c[] = {sim::BehaviorClass::conservative};
    auto graphs_a = build_graph_sequence(sim::synthesize_observation(a, cfg, s), cfg.mu, {0, 5});
    auto graphs_c = build_graph_sequence(sim::synthesize_observation(c, cfg, s), cfg.mu, {0, 5});
    aggressive += degree_centrality_with_memory(graphs_a, 0).values.back();
    conservative += degree_centrality_with_memory(graphs_c, 0).values.back();
  }
  EXPECT_GT(aggressive, conservative);
}
