#pragma once

// Scenario configuration, road layouts, agent state and seeded spawning.

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gameplan/common.hpp"
#include "gameplan/sim/geometry.hpp"

namespace gameplan::sim {

enum class ScenarioKind { intersection4way, roundabout, merge };
enum class Strategy { gameplan, economic, fifo, random, none };
enum class BehaviorClass { conservative, aggressive };

inline constexpr double kLaneWidth = 3.5;
inline constexpr double kVehicleRadius = 1.0;
inline constexpr double kApproachLength = 1000.0;
inline constexpr double kExitLength = 40.0;
inline constexpr double kSpeedHeadroom = 0.2;  // aggressive desired speed is 1.2x the limit

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::intersection4way: return "intersection4way";
    case ScenarioKind::roundabout: return "roundabout";
    case ScenarioKind::merge: return "merge";
  }
  return "?";
}

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::gameplan: return "gameplan";
    case Strategy::economic: return "economic";
    case Strategy::fifo: return "fifo";
    case Strategy::random: return "random";
    case Strategy::none: return "none";
  }
  return "?";
}

inline ScenarioKind parse_scenario_kind(const std::string& text) {
  if (text == "intersection4way" || text == "intersection") return ScenarioKind::intersection4way;
  if (text == "roundabout") return ScenarioKind::roundabout;
  if (text == "merge" || text == "merging") return ScenarioKind::merge;
  throw InvalidInput("unknown scenario '" + text + "'");
}

inline Strategy parse_strategy(const std::string& text) {
  if (text == "gameplan" || text == "behavior") return Strategy::gameplan;
  if (text == "economic") return Strategy::economic;
  if (text == "fifo") return Strategy::fifo;
  if (text == "random") return Strategy::random;
  if (text == "none") return Strategy::none;
  throw InvalidInput("unknown strategy '" + text + "'");
}

/// "% Aggressive" as a fraction of the agents, an explicit count, or both
/// (the larger resulting count wins).
struct AggressiveSpec {
  std::optional<double> fraction;
  std::optional<int> count;

  static AggressiveSpec from_fraction(double f) { return {f, std::nullopt}; }
  static AggressiveSpec from_count(int c) { return {std::nullopt, c}; }

  int resolve(int n_agents) const {
    int k = 0;
    if (fraction) {
      if (!(*fraction >= 0.0 && *fraction <= 1.0)) {
        throw InvalidInput("aggressive fraction must lie in [0, 1]");
      }
      k = static_cast<int>(std::lround(*fraction * n_agents));
    }
    if (count) {
      if (*count < 0) throw InvalidInput("aggressive count must be non-negative");
      k = std::max(k, *count);
    }
    if (k > n_agents) throw InvalidInput("more aggressive agents than agents");
    return k;
  }
};

/// Explicit placement, bypassing seeded spawning.
struct AgentSpawn {
  int route = 0;
  double distance_to_zone = 100.0;  // meters before the zone boundary
  double speed = 10.0;
  BehaviorClass behavior = BehaviorClass::conservative;
  std::optional<double> budget;  // seeded when unset
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::intersection4way;
  int lanes_per_approach = 1;
  int n_agents = 4;
  AggressiveSpec aggressive = AggressiveSpec::from_fraction(0.25);
  double max_speed = 20.1;  // m/s
  double density_area = 4800.0;
  int observation_vehicles = 20;
  Seed seed = 0;
  double timestep = 0.1;
  Strategy strategy = Strategy::gameplan;

  double mu = 10.0;
  double observation_window = 5.0;
  double timeout = 120.0;
  double collision_threshold = 2.0;
  double deadlock_speed = 0.1;
  double deadlock_hold = 5.0;
  double zeta_noise = 0.0;  // std-dev of the observation noise on behavior bids
  std::optional<double> crossing_time;
  double decision_radius = 1e9;  // lane leaders closer than this join the auction
  double currency_per_zeta = 0.75;  // how an economic bidder prices its own urgency
  std::vector<AgentSpawn> spawn_override;

  double tau() const {
    if (crossing_time) return *crossing_time;
    switch (kind) {
      case ScenarioKind::intersection4way: return 3.0;
      case ScenarioKind::roundabout: return 4.0;
      case ScenarioKind::merge: return 2.5;
    }
    return 3.0;
  }

  void validate() const {
    if (n_agents < 1) throw InvalidInput("n_agents must be at least 1");
    if (lanes_per_approach < 1) throw InvalidInput("lanes_per_approach must be at least 1");
    if (!(timestep > 0.0)) throw InvalidInput("timestep must be positive");
    if (!(max_speed > 0.0)) throw InvalidInput("max_speed must be positive");
    if (!(density_area > 0.0)) throw InvalidInput("density_area must be positive");
    if (!(mu > 0.0)) throw InvalidInput("mu must be positive");
    if (!(observation_window > 0.0)) throw InvalidInput("observation window must be positive");
    if (!(timeout > 0.0)) throw InvalidInput("timeout must be positive");
    if (!(collision_threshold > 0.0)) throw InvalidInput("collision threshold must be positive");
    if (!(deadlock_speed > 0.0) || !(deadlock_hold > 0.0)) {
      throw InvalidInput("deadlock thresholds must be positive");
    }
    if (!(zeta_noise >= 0.0)) throw InvalidInput("zeta noise must be non-negative");
    if (!(currency_per_zeta >= 0.0)) throw InvalidInput("currency per zeta must be non-negative");
    aggressive.resolve(n_agents);
    if (!spawn_override.empty() && static_cast<int>(spawn_override.size()) != n_agents) {
      throw InvalidInput("explicit spawns must cover every agent");
    }
  }
};

// ---------------------------------------------------------------------------
// Layouts

/// Where two routes first come within two vehicle radii of each other.
struct ConflictPoint {
  bool exists = false;
  double s_a = 0.0;  // arc position on the first route
  double s_b = 0.0;  // arc position on the second route
};

struct Layout {
  ScenarioKind kind = ScenarioKind::intersection4way;
  Polygon zone;
  std::vector<Route> routes;
  int entry_lanes = 0;
  std::vector<std::vector<int>> routes_by_entry;  // entry lane -> route indices
  std::vector<std::vector<ConflictPoint>> conflicts;  // [route a][route b]

  const ConflictPoint& conflict(int a, int b) const {
    return conflicts[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
};

namespace detail {

inline Layout build_intersection(int lanes) {
  Layout layout;
  layout.kind = ScenarioKind::intersection4way;
  const double half = lanes * kLaneWidth;
  layout.zone = Polygon::square(half);
  layout.entry_lanes = 4 * lanes;
  layout.routes_by_entry.resize(static_cast<std::size_t>(layout.entry_lanes));
  for (int d = 0; d < 4; ++d) {
    const Vec2 heading = unit(d * std::numbers::pi / 2.0);
    const Vec2 right{heading.y, -heading.x};
    for (int l = 0; l < lanes; ++l) {
      const Vec2 offset = ((l + 0.5) * kLaneWidth) * right;
      Route r;
      r.entry_lane = d * lanes + l;
      r.exit_lane = 100 + d * lanes + l;
      r.path = Polyline({offset + (-(half + kApproachLength)) * heading,
                         offset + (half + kExitLength) * heading});
      locate_zone(r, layout.zone, kVehicleRadius);
      layout.routes_by_entry[static_cast<std::size_t>(r.entry_lane)].push_back(
          static_cast<int>(layout.routes.size()));
      layout.routes.push_back(std::move(r));
    }
  }
  return layout;
}

// Single circulating lane, counter-clockwise, four entries; each entry can
// leave at any of the other three exits.
inline Layout build_roundabout() {
  constexpr double kRing = 12.0;
  constexpr double kZone = 15.0;
  constexpr double kSkew = 10.0 * std::numbers::pi / 180.0;
  Layout layout;
  layout.kind = ScenarioKind::roundabout;
  layout.zone = Polygon::regular({0.0, 0.0}, kZone, 48);
  layout.entry_lanes = 4;
  layout.routes_by_entry.resize(4);
  for (int d = 0; d < 4; ++d) {
    const double entry = d * std::numbers::pi / 2.0 - kSkew;
    for (int q = 1; q <= 3; ++q) {
      const double exit = (d + q) * std::numbers::pi / 2.0 + kSkew;
      std::vector<Vec2> pts{(kZone + kApproachLength) * unit(entry), kRing * unit(entry)};
      const int steps = 6 * q;
      for (int k = 1; k < steps; ++k) {
        pts.push_back(kRing * unit(entry + (exit - entry) * k / steps));
      }
      pts.push_back(kRing * unit(exit));
      pts.push_back((kZone + kExitLength) * unit(exit));
      Route r;
      r.entry_lane = d;
      r.exit_lane = 100 + (d + q) % 4;
      r.path = Polyline(std::move(pts));
      locate_zone(r, layout.zone, kVehicleRadius);
      layout.routes_by_entry[static_cast<std::size_t>(d)].push_back(
          static_cast<int>(layout.routes.size()));
      layout.routes.push_back(std::move(r));
    }
  }
  return layout;
}

// Main lane along +x and an on-ramp joining at 30 degrees; both continue on
// the main lane after the merge point.
inline Layout build_merge() {
  constexpr double kZone = 8.0;
  const double ramp = 30.0 * std::numbers::pi / 180.0;
  Layout layout;
  layout.kind = ScenarioKind::merge;
  layout.zone = Polygon::regular({0.0, 0.0}, kZone, 32);
  layout.entry_lanes = 2;
  layout.routes_by_entry.resize(2);
  const Vec2 end{kZone + kExitLength, 0.0};
  const std::vector<Vec2> starts{{-(kZone + kApproachLength), 0.0},
                                 (-(kZone + kApproachLength)) * unit(ramp)};
  for (int e = 0; e < 2; ++e) {
    Route r;
    r.entry_lane = e;
    r.exit_lane = 100;
    r.path = Polyline({starts[static_cast<std::size_t>(e)], {0.0, 0.0}, end});
    locate_zone(r, layout.zone, kVehicleRadius);
    layout.routes_by_entry[static_cast<std::size_t>(e)].push_back(e);
    layout.routes.push_back(std::move(r));
  }
  return layout;
}

// Where two paths cross, or the first point of a shared stretch. Routes from
// the same entry lane are not in conflict: they queue.
inline void locate_conflicts(Layout& layout) {
  constexpr double kStep = 0.25, kPad = 3.0, kOnPath = 0.3;
  const auto n = layout.routes.size();
  layout.conflicts.assign(n, std::vector<ConflictPoint>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Route& a = layout.routes[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Route& b = layout.routes[j];
      if (a.entry_lane == b.entry_lane) continue;
      ConflictPoint best;
      double best_d = INFINITY;
      for (double sa = a.zone_in - kPad; sa <= a.zone_out + kPad; sa += kStep) {
        const Vec2 pa = a.path.point_at(sa);
        for (double sb = b.zone_in - kPad; sb <= b.zone_out + kPad; sb += kStep) {
          const double d = distance(pa, b.path.point_at(sb));
          const bool shared = d < kOnPath && best_d < kOnPath;
          if (shared ? sa + sb < best.s_a + best.s_b : d < best_d) {
            best = {true, sa, sb};
            best_d = d;
          }
        }
      }
      best.exists = best_d < 2.0 * kVehicleRadius;
      layout.conflicts[i][j] = best;
      layout.conflicts[j][i] = {best.exists, best.s_b, best.s_a};
    }
  }
}

}  // namespace detail

/// Layouts are immutable and shared between worlds of the same shape.
inline std::shared_ptr<const Layout> layout_for(ScenarioKind kind, int lanes_per_approach) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const Layout>> cache;
  const int lanes = kind == ScenarioKind::intersection4way ? lanes_per_approach : 1;
  const std::pair<int, int> key{static_cast<int>(kind), lanes};
  std::lock_guard lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  Layout built;
  switch (kind) {
    case ScenarioKind::intersection4way: built = detail::build_intersection(lanes); break;
    case ScenarioKind::roundabout: built = detail::build_roundabout(); break;
    case ScenarioKind::merge: built = detail::build_merge(); break;
  }
  detail::locate_conflicts(built);
  auto layout = std::make_shared<const Layout>(std::move(built));
  cache.emplace(key, layout);
  return layout;
}

// ---------------------------------------------------------------------------
// Agents and world

struct AgentState {
  AgentId id = 0;
  int route = 0;
  double arc_position = 0.0;
  double speed = 0.0;
  double acceleration = 0.0;
  BehaviorClass behavior_class = BehaviorClass::conservative;

  double budget = 0.0;         // currency units
  double monetary_bid = 0.0;   // economic bid
  double arrival_time = 0.0;   // arrival at the zone boundary projected at spawn, seconds
  double zeta = 0.0;           // observed behavior profile
  double behavior_bid = 0.0;   // zeta as submitted (noise applied)
  double patience = 8.0;       // seconds waited at the line before forcing a move

  bool permission = false;  // may enter the conflict zone
  bool defector = false;    // entered on a slot it was not allocated
  std::optional<AgentId> rival;  // holder of the slot a defector contests
  bool finished = false;
  bool crashed = false;
  std::optional<double> finish_time;
  std::optional<double> waiting_since;

  bool aggressive() const { return behavior_class == BehaviorClass::aggressive; }
  bool live() const { return !finished && !crashed; }
};

struct CollisionEvent {
  double time = 0.0;
  AgentId a = 0;
  AgentId b = 0;
  double distance = 0.0;
};

struct DeadlockEvent {
  double stall_start = 0.0;  // when the qualifying standstill began
  double detected = 0.0;
  std::optional<double> resolved;  // first time one of the stalled agents moved again
};

/// Tracks continuous standstill of lane leaders and zone vacancy.
struct DeadlockMonitor {
  std::map<AgentId, double> stopped_since;
  std::optional<double> clear_since;
  bool latched = false;
  std::set<AgentId> stalled;  // agents behind the latched event
  std::vector<DeadlockEvent> events;
};

struct World {
  ScenarioConfig config;
  std::shared_ptr<const Layout> layout;
  std::vector<AgentState> agents;
  double time = 0.0;
  std::size_t round = 0;
  std::optional<AgentId> turn_holder;
  std::map<AgentId, int> turn_index;  // slot in the latest auction round
  std::set<std::pair<AgentId, AgentId>> contacts;
  DeadlockMonitor deadlock;

  const Route& route_of(const AgentState& a) const {
    return layout->routes[static_cast<std::size_t>(a.route)];
  }
  Vec2 position(const AgentState& a) const { return route_of(a).path.point_at(a.arc_position); }
  bool entered(const AgentState& a) const { return a.arc_position > route_of(a).zone_in; }
  bool exited(const AgentState& a) const { return a.arc_position >= route_of(a).zone_out; }
  bool in_zone(const AgentState& a) const { return a.live() && entered(a) && !exited(a); }
  double distance_to_zone(const AgentState& a) const {
    return route_of(a).zone_in - a.arc_position;
  }

  AgentState& agent(AgentId id) { return agents.at(static_cast<std::size_t>(id)); }
  const AgentState& agent(AgentId id) const { return agents.at(static_cast<std::size_t>(id)); }

  bool zone_empty() const {
    return std::none_of(agents.begin(), agents.end(), [&](const AgentState& a) { return in_zone(a); });
  }

  std::size_t zone_occupancy() const {
    return static_cast<std::size_t>(
        std::count_if(agents.begin(), agents.end(), [&](const AgentState& a) { return in_zone(a); }));
  }

  /// Front-most live agent of each entry lane that has not entered the zone.
  std::vector<AgentId> lane_leaders() const {
    std::map<int, AgentId> best;
    for (const auto& a : agents) {
      if (!a.live() || entered(a)) continue;
      const int lane = route_of(a).entry_lane;
      auto it = best.find(lane);
      if (it == best.end() || agent(it->second).arc_position < a.arc_position) best[lane] = a.id;
    }
    std::vector<AgentId> out;
    for (const auto& [lane, id] : best) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }
};

// ---------------------------------------------------------------------------
// Spawning

inline constexpr double kLeaderMinEta = 6.0;  // seconds to the zone at spawn
inline constexpr double kLeaderMaxEta = 10.0;
inline constexpr double kFollowerMinSpacing = 25.0;
inline constexpr double kFollowerMaxSpacing = 45.0;
inline constexpr double kSpawnBraking = 2.0;  // closing speed is shed at this rate

namespace stream {
inline constexpr Seed classes = 1, placement = 2, economy = 3, observation = 4, noise = 5,
                      patience = 6, rounds = 1000;
}

/// Places agents on approach lanes with seeded spacing and speeds; assigns
/// behavior classes. Behavior profiles are filled in by the observation phase.
inline World spawn_scenario(const ScenarioConfig& config) {
  config.validate();
  World world;
  world.config = config;
  world.layout = layout_for(config.kind, config.lanes_per_approach);
  const Layout& layout = *world.layout;
  const auto n = static_cast<std::size_t>(config.n_agents);

  // Behavior classes: a seeded subset of resolve() agents is aggressive.
  std::vector<BehaviorClass> classes(n, BehaviorClass::conservative);
  if (config.spawn_override.empty()) {
    Rng rng(mix_seed(config.seed, stream::classes));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    const int k = config.aggressive.resolve(config.n_agents);
    for (int i = 0; i < k; ++i) classes[idx[static_cast<std::size_t>(i)]] = BehaviorClass::aggressive;
  } else {
    for (std::size_t i = 0; i < n; ++i) classes[i] = config.spawn_override[i].behavior;
  }

  Rng place(mix_seed(config.seed, stream::placement));
  Rng economy(mix_seed(config.seed, stream::economy));
  Rng patience(mix_seed(config.seed, stream::patience));
  world.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = world.agents[i];
    a.id = static_cast<AgentId>(i);
    a.behavior_class = classes[i];
    a.budget = uniform(economy, 1.0, 10.0);
    a.monetary_bid = a.budget;
    a.patience = (a.aggressive() ? 1.0 : 7.0) + uniform(patience, 0.0, 2.0);
  }

  if (!config.spawn_override.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& sp = config.spawn_override[i];
      if (sp.route < 0 || sp.route >= static_cast<int>(layout.routes.size())) {
        throw InvalidInput("explicit spawn names an unknown route");
      }
      auto& a = world.agents[i];
      a.route = sp.route;
      const auto& r = layout.routes[static_cast<std::size_t>(sp.route)];
      if (sp.distance_to_zone > r.zone_in || sp.distance_to_zone < 0.0) {
        throw InvalidInput("explicit spawn lies outside the approach");
      }
      a.arc_position = r.zone_in - sp.distance_to_zone;
      a.speed = std::clamp(sp.speed, 0.0, config.max_speed);
      a.arrival_time = sp.distance_to_zone / std::max(a.speed, 0.1);
      if (sp.budget) {
        if (!(*sp.budget >= 0.0)) throw InvalidInput("explicit budget must be non-negative");
        a.budget = a.monetary_bid = *sp.budget;
      }
    }
    return world;
  }

  // Round-robin over a seeded lane order.
  std::vector<int> lanes(static_cast<std::size_t>(layout.entry_lanes));
  std::iota(lanes.begin(), lanes.end(), 0);
  for (std::size_t i = lanes.size(); i > 1; --i) std::swap(lanes[i - 1], lanes[uniform_index(place, i)]);
  std::map<int, std::vector<std::size_t>> per_lane;
  for (std::size_t i = 0; i < n; ++i) per_lane[lanes[i % lanes.size()]].push_back(i);

  for (auto& [lane, members] : per_lane) {
    double distance = 0.0, ahead_speed = 0.0;
    for (std::size_t rank = 0; rank < members.size(); ++rank) {
      auto& a = world.agents[members[rank]];
      const auto& options = layout.routes_by_entry[static_cast<std::size_t>(lane)];
      a.route = options[uniform_index(place, options.size())];
      const auto& r = layout.routes[static_cast<std::size_t>(a.route)];
      a.speed = a.aggressive() ? config.max_speed : uniform(place, 0.5, 0.9) * config.max_speed;
      if (rank == 0) {
        distance = a.speed * uniform(place, kLeaderMinEta, kLeaderMaxEta);
      } else {
        const double closing = std::max(0.0, a.speed * a.speed - ahead_speed * ahead_speed);
        distance += uniform(place, kFollowerMinSpacing, kFollowerMaxSpacing) + closing / (2.0 * kSpawnBraking);
      }
      if (distance > r.zone_in) {
        throw InvalidInput("lane " + std::to_string(lane) + " cannot hold " +
                           std::to_string(members.size()) + " agents");
      }
      ahead_speed = a.speed;
      a.arc_position = r.zone_in - distance;
      a.arrival_time = distance / a.speed;
    }
  }
  return world;
}

}  // namespace gameplan::sim
