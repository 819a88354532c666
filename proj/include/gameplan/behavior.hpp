#pragma once

// Behavior profiling: proximity traffic graphs over trajectory snapshots and
// degree centrality with temporal memory. The final centrality value over an
// observation window is the agent's aggressiveness score (zeta).

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gameplan/common.hpp"

namespace gameplan::behavior {

inline constexpr double kDefaultRadius = 10.0;        // mu, meters
inline constexpr double kDefaultWindowSeconds = 5.0;  // observation period

struct TrajectorySample {
  AgentId agent_id = 0;
  double time = 0.0;
  Vec2 position;
  double speed = 0.0;
};

struct Trajectory {
  AgentId agent_id = 0;
  std::vector<TrajectorySample> samples;
};

struct GraphVertex {
  AgentId agent_id = 0;
  Vec2 position;
  double speed = 0.0;
};

struct GraphEdge {
  AgentId a = 0;  // a < b
  AgentId b = 0;
  double weight = 0.0;
};

struct TrafficGraph {
  double timestamp = 0.0;
  double radius = kDefaultRadius;
  std::vector<GraphVertex> vertices;
  std::vector<GraphEdge> edges;

  const GraphVertex* vertex(AgentId id) const {
    auto it = std::find_if(vertices.begin(), vertices.end(),
                           [id](const GraphVertex& v) { return v.agent_id == id; });
    return it == vertices.end() ? nullptr : &*it;
  }

  bool has_edge(AgentId i, AgentId j) const {
    const AgentId a = std::min(i, j), b = std::max(i, j);
    return std::any_of(edges.begin(), edges.end(),
                       [&](const GraphEdge& e) { return e.a == a && e.b == b; });
  }

  std::vector<AgentId> neighbors(AgentId id) const {
    std::vector<AgentId> out;
    for (const auto& e : edges) {
      if (e.a == id) out.push_back(e.b);
      if (e.b == id) out.push_back(e.a);
    }
    return out;
  }
};

struct CentralitySeries {
  AgentId agent_id = 0;
  std::vector<int> values;
  std::set<AgentId> seen_neighbors;
};

struct ObservationWindow {
  double start = 0.0;
  double end = kDefaultWindowSeconds;
  double length() const { return end - start; }
};

struct BehaviorProfile {
  AgentId agent_id = 0;
  double zeta = 0.0;
  ObservationWindow window;
};

inline void validate(const TrajectorySample& s) {
  if (!s.position.finite() || !std::isfinite(s.time) || !std::isfinite(s.speed)) {
    throw InvalidInput("trajectory sample for agent " + std::to_string(s.agent_id) +
                       " has a non-finite field");
  }
  if (s.time < 0.0) throw InvalidInput("negative sample time");
  if (s.speed < 0.0) throw InvalidInput("negative sample speed");
}

inline void validate(const Trajectory& traj) {
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    validate(s);
    if (s.agent_id != traj.agent_id) {
      throw InvalidInput("trajectory of agent " + std::to_string(traj.agent_id) +
                         " contains a sample of agent " + std::to_string(s.agent_id));
    }
    if (k > 0 && !(s.time > traj.samples[k - 1].time)) {
      throw InvalidInput("trajectory timestamps must be strictly increasing");
    }
  }
}

/// Builds the proximity graph of one snapshot. Edges join every pair of
/// agents whose Euclidean distance is at most `mu`; the weight is that distance.
inline TrafficGraph build_traffic_graph(std::span<const TrajectorySample> samples_at_t,
                                        double mu = kDefaultRadius) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("radius mu must be positive");
  TrafficGraph g;
  g.radius = mu;
  if (samples_at_t.empty()) return g;
  g.timestamp = samples_at_t.front().time;

  std::set<AgentId> ids;
  for (const auto& s : samples_at_t) {
    validate(s);
    if (s.time != g.timestamp) throw InvalidInput("snapshot samples must share one timestamp");
    if (!ids.insert(s.agent_id).second) {
      throw InvalidInput("duplicate agent id " + std::to_string(s.agent_id) + " in snapshot");
    }
    g.vertices.push_back({s.agent_id, s.position, s.speed});
  }
  std::sort(g.vertices.begin(), g.vertices.end(),
            [](const GraphVertex& l, const GraphVertex& r) { return l.agent_id < r.agent_id; });

  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    for (std::size_t j = i + 1; j < g.vertices.size(); ++j) {
      const double d = distance(g.vertices[i].position, g.vertices[j].position);
      if (d <= mu) g.edges.push_back({g.vertices[i].agent_id, g.vertices[j].agent_id, d});
    }
  }
  return g;
}

/// Degree centrality with temporal memory. At each snapshot the value grows by
/// the number of neighbors that are no faster than the agent and were never
/// adjacent to it in any earlier snapshot. Snapshots missing the agent carry
/// the previous value forward.
inline CentralitySeries degree_centrality_with_memory(std::span<const TrafficGraph> graphs,
                                                      AgentId agent) {
  CentralitySeries series;
  series.agent_id = agent;
  series.values.reserve(graphs.size());

  std::set<AgentId> ever_adjacent;
  bool present_anywhere = false;
  int value = 0;
  for (const auto& g : graphs) {
    const GraphVertex* self = g.vertex(agent);
    std::vector<AgentId> adjacent;
    if (self != nullptr) {
      present_anywhere = true;
      adjacent = g.neighbors(agent);
      for (AgentId j : adjacent) {
        if (ever_adjacent.contains(j) || series.seen_neighbors.contains(j)) continue;
        const GraphVertex* other = g.vertex(j);
        if (other->speed <= self->speed) {
          series.seen_neighbors.insert(j);
          ++value;
        }
      }
    }
    series.values.push_back(value);
    // Memory is updated after the snapshot so simultaneous neighbors all count.
    ever_adjacent.insert(adjacent.begin(), adjacent.end());
  }
  if (!present_anywhere) {
    throw InvalidInput("agent " + std::to_string(agent) + " absent from every snapshot");
  }
  return series;
}

/// Extension point for alternative centrality measures.
using CentralityFunction =
    std::function<CentralitySeries(std::span<const TrafficGraph>, AgentId)>;

/// Groups samples from all trajectories into time-ordered snapshots inside
/// `window` and builds one graph per snapshot.
inline std::vector<TrafficGraph> build_graph_sequence(std::span<const Trajectory> trajectories,
                                                      double mu, ObservationWindow window) {
  constexpr double kTimeTolerance = 1e-9;
  if (!(window.length() > 0.0)) throw InvalidInput("observation window must have positive length");

  double first = INFINITY, last = -INFINITY;
  std::vector<TrajectorySample> pool;
  for (const auto& traj : trajectories) {
    validate(traj);
    for (const auto& s : traj.samples) {
      first = std::min(first, s.time);
      last = std::max(last, s.time);
      if (s.time >= window.start - kTimeTolerance && s.time <= window.end + kTimeTolerance) {
        pool.push_back(s);
      }
    }
  }
  if (pool.empty() || window.start < first - kTimeTolerance || window.end > last + kTimeTolerance) {
    throw InvalidInput("observation window is not covered by the trajectory data");
  }
  std::stable_sort(pool.begin(), pool.end(), [](const auto& l, const auto& r) {
    return l.time < r.time;
  });

  std::vector<TrafficGraph> graphs;
  std::size_t begin = 0;
  while (begin < pool.size()) {
    std::size_t end = begin + 1;
    while (end < pool.size() && pool[end].time - pool[begin].time <= kTimeTolerance) ++end;
    std::vector<TrajectorySample> snapshot(pool.begin() + static_cast<std::ptrdiff_t>(begin),
                                           pool.begin() + static_cast<std::ptrdiff_t>(end));
    for (auto& s : snapshot) s.time = pool[begin].time;
    graphs.push_back(build_traffic_graph(snapshot, mu));
    begin = end;
  }
  return graphs;
}

/// zeta = centrality value at the end of the observation window.
inline BehaviorProfile compute_behavior_profile(
    std::span<const Trajectory> trajectories, AgentId agent, double mu = kDefaultRadius,
    ObservationWindow window = {},
    const CentralityFunction& centrality = degree_centrality_with_memory) {
  const bool known = std::any_of(trajectories.begin(), trajectories.end(),
                                 [agent](const Trajectory& t) { return t.agent_id == agent; });
  if (!known) throw InvalidInput("unknown agent id " + std::to_string(agent));
  const auto graphs = build_graph_sequence(trajectories, mu, window);
  const auto series = centrality(graphs, agent);
  return {agent, static_cast<double>(series.values.back()), window};
}

/// Profiles every agent present in `trajectories`, sorted by agent id.
inline std::vector<BehaviorProfile> compute_all_profiles(
    std::span<const Trajectory> trajectories, double mu = kDefaultRadius,
    ObservationWindow window = {},
    const CentralityFunction& centrality = degree_centrality_with_memory) {
  const auto graphs = build_graph_sequence(trajectories, mu, window);
  std::set<AgentId> ids;
  for (const auto& t : trajectories) ids.insert(t.agent_id);
  std::vector<BehaviorProfile> out;
  for (AgentId id : ids) {
    const auto series = centrality(graphs, id);
    out.push_back({id, static_cast<double>(series.values.back()), window});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delimited text formats.
//   trajectories: agent_id,time,x,y,speed   (header line required)
//   profiles:     agent_id,zeta,window_start,window_end

namespace detail {
inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_number(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (text.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("line " + std::to_string(line_no) + ": not a number: '" + text + "'");
  }
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}
}  // namespace detail

inline std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("trajectory file is empty");
  std::map<AgentId, Trajectory> by_agent;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    const auto cells = detail::split_row(line);
    if (cells.size() != 5) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected 5 fields");
    }
    TrajectorySample s;
    s.agent_id = static_cast<AgentId>(detail::parse_number(cells[0], line_no));
    s.time = detail::parse_number(cells[1], line_no);
    s.position = {detail::parse_number(cells[2], line_no), detail::parse_number(cells[3], line_no)};
    s.speed = detail::parse_number(cells[4], line_no);
    validate(s);
    auto& traj = by_agent[s.agent_id];
    traj.agent_id = s.agent_id;
    traj.samples.push_back(s);
  }
  std::vector<Trajectory> out;
  for (auto& [id, traj] : by_agent) {
    std::stable_sort(traj.samples.begin(), traj.samples.end(),
                     [](const auto& l, const auto& r) { return l.time < r.time; });
    validate(traj);
    out.push_back(std::move(traj));
  }
  return out;
}

inline void write_trajectories(std::ostream& out, std::span<const Trajectory> trajectories) {
  out << "agent_id,time,x,y,speed\n";
  out.precision(17);
  for (const auto& t : trajectories) {
    for (const auto& s : t.samples) {
      out << s.agent_id << ',' << s.time << ',' << s.position.x << ',' << s.position.y << ','
          << s.speed << '\n';
    }
  }
}

inline void write_profiles(std::ostream& out, std::span<const BehaviorProfile> profiles) {
  out << "agent_id,zeta,window_start,window_end\n";
  out.precision(17);
  for (const auto& p : profiles) {
    out << p.agent_id << ',' << p.zeta << ',' << p.window.start << ',' << p.window.end << '\n';
  }
}

inline std::vector<BehaviorProfile> read_profiles(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("profile file is empty");
  std::vector<BehaviorProfile> out;
  std::set<AgentId> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    const auto cells = detail::split_row(line);
    if (cells.size() != 4 && cells.size() != 2) {
      throw InvalidInput("line " + std::to_string(line_no) + ": expected 4 fields");
    }
    BehaviorProfile p;
    p.agent_id = static_cast<AgentId>(detail::parse_number(cells[0], line_no));
    p.zeta = detail::parse_number(cells[1], line_no);
    if (cells.size() == 4) {
      p.window = {detail::parse_number(cells[2], line_no), detail::parse_number(cells[3], line_no)};
    }
    if (!(p.zeta >= 0.0)) throw InvalidInput("line " + std::to_string(line_no) + ": zeta < 0");
    if (!ids.insert(p.agent_id).second) {
      throw InvalidInput("duplicate agent id " + std::to_string(p.agent_id));
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace gameplan::behavior
