#pragma once

// Observation phase: each scenario agent drives through its own stretch of
// ambient traffic on a multi-lane road for the observation window, and its
// trajectory is profiled with degree centrality. Aggressive agents overspeed
// and weave between lanes; conservative ones keep their lane below the limit.

#include <span>
#include <vector>

#include "gameplan/behavior.hpp"
#include "gameplan/sim/scenario.hpp"

namespace gameplan::sim {

struct ObservationParams {
  int lanes = 4;
  double ambient_speed_lo = 0.55;  // fractions of the speed limit
  double ambient_speed_hi = 0.85;
  double conservative_speed_lo = 0.6;
  double conservative_speed_hi = 0.9;
  double aggressive_speed_lo = 1.1;
  double aggressive_speed_hi = 1.2;
  double weave_period = 1.5;  // seconds between lane changes of an aggressive agent
};

/// Synthesizes the observation-window trajectories of all vehicles. Scenario
/// agents keep their ids 0..n-1; ambient vehicles follow.
inline std::vector<behavior::Trajectory> synthesize_observation(
    std::span<const BehaviorClass> classes, const ScenarioConfig& config, Seed seed,
    const ObservationParams& params = {}) {
  Rng rng(seed);
  const int n = static_cast<int>(classes.size());
  const int total = std::max(n, config.observation_vehicles);  // ambient vehicles fill the rest
  const double road_length = config.density_area / (params.lanes * kLaneWidth);
  const int steps = static_cast<int>(std::lround(config.observation_window / config.timestep));

  std::vector<behavior::Trajectory> out(static_cast<std::size_t>(total));
  for (int v = 0; v < total; ++v) {
    const bool agent = v < n;
    const bool aggressive = agent && classes[static_cast<std::size_t>(v)] == BehaviorClass::aggressive;
    double lo = params.ambient_speed_lo, hi = params.ambient_speed_hi;
    if (agent) {
      lo = aggressive ? params.aggressive_speed_lo : params.conservative_speed_lo;
      hi = aggressive ? params.aggressive_speed_hi : params.conservative_speed_hi;
    }
    const double speed = uniform(rng, lo, hi) * config.max_speed;
    const double x0 = uniform(rng, 0.0, road_length);
    int lane = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(params.lanes)));
    int direction = uniform(rng, 0.0, 1.0) < 0.5 ? -1 : 1;
    const double phase = uniform(rng, 0.0, params.weave_period);

    auto& traj = out[static_cast<std::size_t>(v)];
    traj.agent_id = v;
    traj.samples.reserve(static_cast<std::size_t>(steps + 1));
    double next_change = phase;
    for (int k = 0; k <= steps; ++k) {
      const double t = k * config.timestep;
      if (aggressive && t >= next_change) {
        if (lane + direction < 0 || lane + direction >= params.lanes) direction = -direction;
        lane += direction;
        next_change += params.weave_period;
      }
      const Vec2 pos{x0 + speed * t, (lane + 0.5) * kLaneWidth};
      traj.samples.push_back({v, t, pos, speed});
    }
  }
  return out;
}

/// Runs the observation phase for `world` and stores zeta (and the submitted
/// behavior bid) on every agent. Agent i is vehicle 0 of scene i.
inline std::vector<std::vector<behavior::Trajectory>> observe_behavior(
    World& world, const ObservationParams& params = {}) {
  const auto& cfg = world.config;
  const Seed base = mix_seed(cfg.seed, stream::observation);
  Rng noise(mix_seed(cfg.seed, stream::noise));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<behavior::Trajectory>> scenes;
  for (auto& a : world.agents) {
    const BehaviorClass cls[] = {a.behavior_class};
    auto scene = synthesize_observation(cls, cfg, mix_seed(base, static_cast<Seed>(a.id)), params);
    const auto graphs = behavior::build_graph_sequence(scene, cfg.mu, {0.0, cfg.observation_window});
    a.zeta = static_cast<double>(behavior::degree_centrality_with_memory(graphs, 0).values.back());
    a.behavior_bid = a.zeta;
    if (cfg.zeta_noise > 0.0) a.behavior_bid = std::max(0.0, a.zeta + cfg.zeta_noise * gauss(noise));
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace gameplan::sim
