#pragma once

// One simulation step: turn allocation (or unsignaled negotiation), IDM car
// following snapped to the discrete action set, integration. Collision and
// deadlock detection are separate passes over the resulting world.

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "gameplan/auction.hpp"
#include "gameplan/sim/scenario.hpp"

namespace gameplan::sim {

inline constexpr std::array<double, 5> kAccelerationSet{-3.0, -1.5, 0.0, 1.0, 2.0};

struct IdmParams {
  double desired_speed = 20.0;
  double time_headway = 1.5;
  double max_accel = 2.0;
  double comfortable_decel = 3.0;
  double jam_distance = 2.0;
  double exponent = 4.0;
};

inline IdmParams idm_params_for(const AgentState& a, double max_speed) {
  IdmParams p;
  p.desired_speed = a.aggressive() ? (1.0 + kSpeedHeadroom) * max_speed : max_speed;
  p.time_headway = a.aggressive() ? 0.8 : 1.5;
  return p;
}

/// IDM acceleration. `gap` is bumper-to-obstacle distance; an infinite gap
/// gives the free-road term alone.
inline double idm_acceleration(double speed, double gap, double obstacle_speed, const IdmParams& p) {
  const double free = 1.0 - std::pow(speed / p.desired_speed, p.exponent);
  if (!std::isfinite(gap)) return p.max_accel * free;
  const double dv = speed - obstacle_speed;
  const double desired_gap =
      p.jam_distance +
      std::max(0.0, speed * p.time_headway +
                        speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel)));
  const double s = std::max(gap, 0.01);
  return p.max_accel * (free - (desired_gap / s) * (desired_gap / s));
}

inline double snap_to_action(double accel) {
  double best = kAccelerationSet.front();
  for (double a : kAccelerationSet) {
    if (std::abs(a - accel) < std::abs(best - accel)) best = a;
  }
  return best;
}

/// Caps a snapped action so the agent can always stop short of an obstacle
/// moving at `obstacle_speed`.
inline double braking_guard(double action, double speed, double gap, double obstacle_speed) {
  constexpr double kMargin = 0.3;
  if (speed <= obstacle_speed) return action;
  const double room = std::max(gap - kMargin, 0.01);
  const double required = (speed * speed - obstacle_speed * obstacle_speed) / (2.0 * room);
  if (required >= 2.5) return kAccelerationSet.front();
  if (required >= 1.3) return std::min(action, -1.5);
  if (required >= 0.9) return std::min(action, 0.0);
  return action;
}

struct Obstacle {
  double gap = std::numeric_limits<double>::infinity();
  double speed = 0.0;
};

/// Nearest vehicle ahead: same entry lane before the zone, or same exit lane
/// once the other vehicle has entered it.
inline Obstacle leading_vehicle(const World& world, const AgentState& self) {
  const Route& mine = world.route_of(self);
  Obstacle best;
  for (const auto& other : world.agents) {
    if (other.id == self.id || !other.live()) continue;
    const Route& theirs = world.route_of(other);
    double ahead = std::numeric_limits<double>::infinity();
    if (theirs.entry_lane == mine.entry_lane && !world.exited(other) &&
        other.arc_position > self.arc_position) {
      ahead = other.arc_position - self.arc_position;
    }
    if (theirs.exit_lane == mine.exit_lane && world.entered(other)) {
      const double d = (other.arc_position - theirs.zone_out) - (self.arc_position - mine.zone_out);
      if (d > 0.0) ahead = std::min(ahead, d);
    }
    const double gap = ahead - 2.0 * kVehicleRadius;
    if (ahead < std::numeric_limits<double>::infinity() && gap < best.gap) {
      best = {gap, other.speed};
    }
  }
  return best;
}

inline double time_to_cover(double distance, double speed, double accel) {
  if (distance <= 0.0) return 0.0;
  if (accel > 0.0) return (std::sqrt(speed * speed + 2.0 * accel * distance) - speed) / accel;
  return distance / std::max(speed, 0.1);
}

/// A defector does not yield to the holder of the slot it contests: it paces
/// itself to reach their common conflict point when the holder does. Empty
/// once the holder is gone or past that point, or the paths never meet.
inline std::optional<double> contest_acceleration(const World& world, const AgentState& a) {
  if (!a.defector || !a.rival) return std::nullopt;
  const auto& h = world.agent(*a.rival);
  if (!h.live()) return std::nullopt;
  const auto& cp = world.layout->conflict(a.route, h.route);
  if (!cp.exists) return std::nullopt;
  const double mine = cp.s_a - a.arc_position;
  const double theirs = cp.s_b - h.arc_position;
  if (mine <= 0.0 || theirs < 0.0) return std::nullopt;
  const double holder_accel = h.speed < world.config.max_speed ? kAccelerationSet.back() : 0.0;
  const double t = std::max(time_to_cover(theirs, h.speed, holder_accel), world.config.timestep);
  return snap_to_action(2.0 * (mine - a.speed * t) / (t * t));
}

inline double choose_acceleration(const World& world, const AgentState& a) {
  const auto p = idm_params_for(a, world.config.max_speed);
  std::vector<Obstacle> obstacles;
  if (auto lead = leading_vehicle(world, a); std::isfinite(lead.gap)) obstacles.push_back(lead);
  if (auto contest = contest_acceleration(world, a)) {
    double action = *contest;
    for (const auto& o : obstacles) action = braking_guard(action, a.speed, o.gap, o.speed);
    return action;
  }
  if (!a.permission && !world.entered(a)) obstacles.push_back({world.distance_to_zone(a), 0.0});

  double raw = idm_acceleration(a.speed, INFINITY, 0.0, p);
  for (const auto& o : obstacles) raw = std::min(raw, idm_acceleration(a.speed, o.gap, o.speed, p));
  double action = snap_to_action(raw);
  for (const auto& o : obstacles) action = braking_guard(action, a.speed, o.gap, o.speed);
  return action;
}

// ---------------------------------------------------------------------------
// Turn allocation

inline auction::TurnOrdering order_round(const World& world, std::span<const AgentId> active) {
  const Seed tie_seed = mix_seed(world.config.seed, stream::rounds + world.round);
  switch (world.config.strategy) {
    case Strategy::gameplan: {
      std::vector<auction::Valuation> bids;
      for (AgentId id : active) bids.push_back({id, world.agent(id).behavior_bid});
      return auction::gameplan_ordering(bids, tie_seed);
    }
    case Strategy::economic:
    case Strategy::fifo:
    case Strategy::random: {
      std::vector<auction::BaselineAgent> agents;
      for (AgentId id : active) {
        const auto& a = world.agent(id);
        agents.push_back({id, a.budget, a.monetary_bid, a.arrival_time});
      }
      const auto kind = world.config.strategy == Strategy::economic ? auction::BiddingStrategy::economic
                        : world.config.strategy == Strategy::fifo   ? auction::BiddingStrategy::fifo
                                                                    : auction::BiddingStrategy::random;
      return auction::baseline_ordering(kind, agents, tie_seed);
    }
    case Strategy::none:
      break;
  }
  throw InvalidInput("strategy 'none' allocates no turns");
}

/// Gain the second-slot agent expects from jumping into the first slot,
/// measured in the currency of the strategy's bids: its valuation minus the
/// bid it would have to displace.
inline double defection_gain(const World& world, AgentId second, AgentId first) {
  const auto& c = world.agent(second);
  const auto& f = world.agent(first);
  const double tau = world.config.tau();
  double valuation = c.zeta, displaced = f.zeta;
  switch (world.config.strategy) {
    case Strategy::gameplan: displaced = f.behavior_bid; break;
    case Strategy::economic:
      valuation = world.config.currency_per_zeta * c.zeta;
      displaced = f.monetary_bid;
      break;
    case Strategy::random: displaced = 0.0; break;  // a random slot carries no claim
    default: break;
  }
  return auction::economic_manipulation_gain(valuation, displaced, tau, 2.0 * tau);
}

inline void allocate_turns(World& world) {
  if (world.turn_holder) {
    const auto& h = world.agent(*world.turn_holder);
    if (!h.live() || world.exited(h)) world.turn_holder.reset();
  }
  if (world.turn_holder || !world.zone_empty()) return;

  std::vector<AgentId> active;
  for (AgentId id : world.lane_leaders()) {
    if (world.distance_to_zone(world.agent(id)) <= world.config.decision_radius) active.push_back(id);
  }
  if (active.empty()) return;

  const auto ordering = order_round(world, active);
  ++world.round;
  world.turn_index.clear();
  const auto& by_turn = ordering.agents_by_turn();
  for (std::size_t k = 0; k < by_turn.size(); ++k) world.turn_index[by_turn[k]] = static_cast<int>(k + 1);

  world.turn_holder = by_turn[0];
  world.agent(by_turn[0]).permission = true;
  // Aggressive agents behind the holder may jump the queue: the second slot
  // under a priced ordering, any slot under a random one.
  const std::size_t last = world.config.strategy == Strategy::random ? by_turn.size() : 2;
  for (std::size_t k = 1; k < std::min(last, by_turn.size()); ++k) {
    auto& c = world.agent(by_turn[k]);
    if (c.aggressive() && !c.permission && defection_gain(world, c.id, by_turn[0]) > 0.0) {
      c.permission = true;
      c.defector = true;
      c.rival = by_turn[0];
    }
  }
}

// ---------------------------------------------------------------------------
// Unsignaled negotiation (no ordering)

inline constexpr double kAggressiveGap = 0.8;     // seconds
inline constexpr double kConservativeClear = 3.0;  // seconds
inline constexpr double kDecisionHorizon = 4.0;    // seconds to the line
inline constexpr double kDecisionDistance = 30.0;  // meters to the line
inline constexpr double kLineDistance = 4.0;       // "at the line"

inline double eta(const World& world, const AgentState& a) {
  return std::max(world.distance_to_zone(a), 0.0) / std::max(a.speed, 0.1);
}

inline bool waiting_at_line(const World& world, const AgentState& a, double eps) {
  return a.live() && !world.entered(a) && world.distance_to_zone(a) < kLineDistance && a.speed < eps;
}

inline void negotiate_unsignaled(World& world) {
  const double eps = world.config.deadlock_speed;
  for (AgentId id : world.lane_leaders()) {
    auto& self = world.agent(id);
    if (self.permission) continue;
    const double my_eta = eta(world, self);
    if (self.aggressive()) {
      if (my_eta > kDecisionHorizon && world.distance_to_zone(self) > kDecisionDistance) continue;
    } else if (world.distance_to_zone(self) > kLineDistance || self.speed > 1.0) {
      continue;  // conservative drivers decide from the line
    }

    const double waited = self.waiting_since ? world.time - *self.waiting_since : 0.0;
    const bool impatient = waited >= self.patience;
    bool zone_busy = false, conflict = false;
    for (const auto& other : world.agents) {
      if (other.id == self.id || !other.live()) continue;
      if (world.in_zone(other)) zone_busy = true;
      if (world.entered(other)) continue;
      const bool committed = other.permission;
      const bool waiting = waiting_at_line(world, other, eps);
      const bool at_line = world.distance_to_zone(other) < kLineDistance;
      const double other_eta = eta(world, other);
      if (self.aggressive()) {
        if (committed || (!waiting && std::abs(other_eta - my_eta) <= kAggressiveGap)) conflict = true;
      } else {
        const bool approaching = !at_line && other.speed > eps && other_eta < kConservativeClear;
        if (committed || approaching || (at_line && !impatient)) conflict = true;
      }
    }
    bool go = !zone_busy && !conflict;
    if (self.aggressive() && impatient && !zone_busy) go = true;
    if (go) self.permission = true;
  }
}

// ---------------------------------------------------------------------------
// Step

inline void step(World& world, double dt) {
  if (std::abs(dt - world.config.timestep) > 1e-12) {
    throw InvalidInput("step size must equal the configured timestep");
  }
  if (world.config.strategy == Strategy::none) {
    negotiate_unsignaled(world);
  } else {
    allocate_turns(world);
  }

  std::vector<double> accel(world.agents.size(), 0.0);
  for (const auto& a : world.agents) {
    if (a.live()) accel[static_cast<std::size_t>(a.id)] = choose_acceleration(world, a);
  }

  const double cap = (1.0 + kSpeedHeadroom) * world.config.max_speed;
  world.time += dt;
  for (auto& a : world.agents) {
    if (!a.live()) continue;
    a.acceleration = accel[static_cast<std::size_t>(a.id)];
    const double v0 = a.speed;
    double v1 = v0 + a.acceleration * dt;
    double travelled = 0.5 * (v0 + v1) * dt;
    if (v1 < 0.0) {
      travelled = a.acceleration < 0.0 ? v0 * v0 / (-2.0 * a.acceleration) : 0.0;
      v1 = 0.0;
    }
    a.speed = std::min(v1, cap);
    a.arc_position += travelled;
    if (a.arc_position >= world.route_of(a).path.length()) {
      a.finished = true;
      a.finish_time = world.time;
    }
    if (waiting_at_line(world, a, world.config.deadlock_speed) && !a.permission) {
      if (!a.waiting_since) a.waiting_since = world.time;
    } else {
      a.waiting_since.reset();
    }
  }
}

// ---------------------------------------------------------------------------
// Detection

/// Pairs of live vehicle discs closer than `threshold` (center distance).
/// Each pair is reported once per contact episode.
inline std::vector<CollisionEvent> detect_collision(World& world, double threshold) {
  std::vector<CollisionEvent> events;
  std::set<std::pair<AgentId, AgentId>> now;
  std::vector<Vec2> pos(world.agents.size());
  for (const auto& a : world.agents) {
    if (a.live()) pos[static_cast<std::size_t>(a.id)] = world.position(a);
  }
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    if (!world.agents[i].live()) continue;
    for (std::size_t j = i + 1; j < world.agents.size(); ++j) {
      if (!world.agents[j].live()) continue;
      const double d = distance(pos[i], pos[j]);
      if (d < threshold) {
        const std::pair<AgentId, AgentId> key{world.agents[i].id, world.agents[j].id};
        now.insert(key);
        if (!world.contacts.contains(key)) events.push_back({world.time, key.first, key.second, d});
      }
    }
  }
  world.contacts = std::move(now);
  return events;
}

/// True iff at least two lane leaders have been below `eps_speed` for `hold`
/// seconds while the conflict zone was neither occupied nor claimed by an
/// agent cleared to enter it. Records one event per stall.
inline bool detect_deadlock(World& world, double eps_speed, double hold) {
  auto& m = world.deadlock;
  const double now = world.time;

  bool claimed = false;
  for (const auto& a : world.agents) {
    if (a.live() && a.permission && !world.exited(a)) claimed = true;
  }
  if (world.zone_empty() && !claimed) {
    if (!m.clear_since) m.clear_since = now;
  } else {
    m.clear_since.reset();
  }

  std::map<AgentId, double> still;
  for (AgentId id : world.lane_leaders()) {
    const auto& a = world.agent(id);
    if (a.speed < eps_speed) {
      auto it = m.stopped_since.find(id);
      still[id] = it == m.stopped_since.end() ? now : it->second;
    }
  }
  m.stopped_since = std::move(still);

  if (m.latched) {
    for (AgentId id : m.stalled) {
      if (!m.stopped_since.contains(id) && !m.events.back().resolved) m.events.back().resolved = now;
    }
  }

  constexpr double kSlack = 1e-9;
  std::set<AgentId> stalled;
  for (const auto& [id, since] : m.stopped_since) {
    if (now - since >= hold - kSlack) stalled.insert(id);
  }
  const bool deadlocked =
      stalled.size() >= 2 && m.clear_since && now - *m.clear_since >= hold - kSlack;
  if (deadlocked && !m.latched) {
    m.latched = true;
    m.stalled = stalled;
    m.events.push_back({now - hold, now, std::nullopt});
  } else if (!deadlocked && m.latched) {
    m.latched = false;
  }
  return deadlocked;
}

}  // namespace gameplan::sim
