#pragma once

// Two-phase episode: observation window, then the planning phase simulated
// to completion or timeout.

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "gameplan/sim/dynamics.hpp"
#include "gameplan/sim/observation.hpp"
#include "gameplan/sim/scenario.hpp"

namespace gameplan::sim {

struct SimOutcome {
  Seed seed = 0;
  std::size_t collisions = 0;
  std::vector<CollisionEvent> collision_events;
  std::size_t deadlocks = 0;
  std::vector<DeadlockEvent> deadlock_events;
  bool timed_out = false;
  std::vector<std::optional<double>> time_to_goal;  // per agent, from the start of planning
  double total_ttg = NAN;                           // last finish; NaN unless every agent finished
  bool success = false;
  std::size_t defections = 0;
  std::size_t rounds = 0;
  std::size_t max_zone_occupancy = 0;
  double end_time = 0.0;
};

/// Called after every step with the world as it stands.
using StepObserver = std::function<void(const World&)>;

inline SimOutcome run_scenario(const ScenarioConfig& config, const StepObserver& observer = {}) {
  World world = spawn_scenario(config);
  observe_behavior(world);

  SimOutcome out;
  out.seed = config.seed;
  const double dt = config.timestep;
  const auto max_steps = static_cast<long>(std::ceil(config.timeout / dt - 1e-9));
  auto any_live = [&] {
    return std::any_of(world.agents.begin(), world.agents.end(), [](const AgentState& a) { return a.live(); });
  };
  if (observer) observer(world);
  for (long k = 0; k < max_steps && any_live(); ++k) {
    step(world, dt);
    out.max_zone_occupancy = std::max(out.max_zone_occupancy, world.zone_occupancy());
    for (const auto& e : detect_collision(world, config.collision_threshold)) {
      out.collision_events.push_back(e);
      world.agent(e.a).crashed = true;
      world.agent(e.b).crashed = true;
    }
    detect_deadlock(world, config.deadlock_speed, config.deadlock_hold);
    if (observer) observer(world);
  }

  out.end_time = world.time;
  out.timed_out = any_live();
  out.collisions = out.collision_events.size();
  out.deadlock_events = world.deadlock.events;
  out.deadlocks = out.deadlock_events.size();
  if (out.timed_out && out.deadlocks == 0 && out.collisions == 0) out.deadlocks = 1;
  out.rounds = world.round;

  bool all_finished = true;
  double last = 0.0;
  for (const auto& a : world.agents) {
    out.time_to_goal.push_back(a.finish_time);
    if (a.defector) ++out.defections;
    if (a.finish_time) {
      last = std::max(last, *a.finish_time);
    } else {
      all_finished = false;
    }
  }
  if (all_finished) out.total_ttg = last;
  out.success = out.collisions == 0 && out.deadlocks == 0 && all_finished;
  return out;
}

/// Writes `agent_id,t,x,y,speed,turn_index` rows for live agents. A turn
/// index of 0 means the agent holds no slot in the current round.
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& os) : os_(os) { os_ << "agent_id,t,x,y,speed,turn_index\n"; }

  void operator()(const World& world) const {
    char buf[160];
    for (const auto& a : world.agents) {
      if (!a.live()) continue;
      const Vec2 p = world.position(a);
      auto it = world.turn_index.find(a.id);
      const int turn = it == world.turn_index.end() ? 0 : it->second;
      std::snprintf(buf, sizeof buf, "%lld,%.1f,%.3f,%.3f,%.3f,%d\n", static_cast<long long>(a.id),
                    world.time, p.x, p.y, a.speed, turn);
      os_ << buf;
    }
  }

 private:
  std::ostream& os_;
};

/// Two agents reaching a merge at the same moment, main lane and ramp.
inline ScenarioConfig two_agent_merge(Strategy strategy, BehaviorClass main_lane = BehaviorClass::conservative,
                                      BehaviorClass ramp = BehaviorClass::conservative, Seed seed = 1) {
  ScenarioConfig c;
  c.kind = ScenarioKind::merge;
  c.n_agents = 2;
  c.aggressive = AggressiveSpec::from_count(0);
  c.strategy = strategy;
  c.seed = seed;
  c.max_speed = 13.4;  // 30 mph
  c.spawn_override = {{0, 40.0, 10.0, main_lane}, {1, 40.0, 10.0, ramp}};
  return c;
}

/// Four-way instance, half aggressive, in which the aggressive agent on
/// route 1 ranks second by money yet values the first turn above the bid it
/// displaces. The holder crosses on the perpendicular route 0. Budgets are
/// scaled to the observed zeta; returns nothing when that zeta is zero.
inline std::optional<ScenarioConfig> manipulation_instance(Strategy strategy, Seed seed) {
  ScenarioConfig c;
  c.n_agents = 4;
  c.aggressive = AggressiveSpec::from_fraction(0.5);
  c.strategy = strategy;
  c.seed = seed;
  Rng rng(mix_seed(seed, stream::economy));
  const double eta = uniform(rng, 6.0, 8.0);
  const double v = c.max_speed;
  c.spawn_override = {
      {0, 0.8 * v * eta, 0.8 * v, BehaviorClass::conservative, {}},
      {1, v * eta, v, BehaviorClass::aggressive, {}},
      {2, 0.6 * v * (eta + 6.0), 0.6 * v, BehaviorClass::conservative, {}},
      {3, v * (eta + 6.0), v, BehaviorClass::aggressive, {}},
  };
  World probe = spawn_scenario(c);
  observe_behavior(probe);
  const double valuation = c.currency_per_zeta * probe.agents[1].zeta;
  if (!(valuation > 0.0)) return std::nullopt;
  const double holder = valuation * uniform(rng, 0.5, 0.9);
  const double second = holder * uniform(rng, 0.5, 0.9);
  c.spawn_override[0].budget = holder;
  c.spawn_override[1].budget = second;
  c.spawn_override[2].budget = second * uniform(rng, 0.05, 0.4);
  c.spawn_override[3].budget = second * uniform(rng, 0.05, 0.4);
  return c;
}

}  // namespace gameplan::sim
