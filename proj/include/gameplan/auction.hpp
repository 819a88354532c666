#pragma once

// Sponsored-search-auction mechanics for turn-based orderings: time rewards,
// utilities and payments, the behavior-based allocation, baseline bidding
// strategies, and executable checks for truthfulness and welfare optimality.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gameplan/common.hpp"

namespace gameplan::auction {

enum class BiddingStrategy { behavior, economic, fifo, random };

struct Bid {
  AgentId agent_id = 0;
  double bid = 0.0;
};

struct BidVector {
  std::vector<Bid> entries;
  BiddingStrategy strategy_tag = BiddingStrategy::behavior;
};

struct Valuation {
  AgentId agent_id = 0;
  double value = 0.0;
};

using ValuationVector = std::vector<Valuation>;

/// sigma: agents listed by turn, so agents_by_turn[0] moves on turn 1.
class TurnOrdering {
 public:
  TurnOrdering() = default;
  explicit TurnOrdering(std::vector<AgentId> agents_by_turn) : by_turn_(std::move(agents_by_turn)) {
    std::vector<AgentId> sorted = by_turn_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidInput("turn ordering repeats an agent");
    }
  }

  std::size_t size() const { return by_turn_.size(); }
  const std::vector<AgentId>& agents_by_turn() const { return by_turn_; }
  AgentId agent_at(std::size_t turn) const { return by_turn_.at(turn - 1); }

  /// 1-based turn of `agent`; throws if the agent is not part of the ordering.
  std::size_t turn_of(AgentId agent) const {
    auto it = std::find(by_turn_.begin(), by_turn_.end(), agent);
    if (it == by_turn_.end()) throw InvalidInput("agent " + std::to_string(agent) + " not ordered");
    return static_cast<std::size_t>(it - by_turn_.begin()) + 1;
  }

  /// True when the ordering is a bijection from `agents` onto [1, n].
  bool is_permutation_of(std::span<const AgentId> agents) const {
    if (agents.size() != by_turn_.size()) return false;
    std::vector<AgentId> a(agents.begin(), agents.end()), b = by_turn_;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b && std::adjacent_find(a.begin(), a.end()) == a.end();
  }

  friend bool operator==(const TurnOrdering&, const TurnOrdering&) = default;

 private:
  std::vector<AgentId> by_turn_;
};

struct TurnSchedule {
  TurnOrdering ordering;
  std::vector<double> turn_times;  // t_1 < t_2 < ... < t_n, seconds
  std::vector<double> rewards;     // alpha_k = 1 / t_k
};

struct UtilityAndPayment {
  double utility = 0.0;
  double payment = 0.0;
};

struct AuctionOutcome {
  TurnSchedule schedule;
  std::vector<double> bids_by_turn;
  std::vector<double> utilities_by_turn;
  std::vector<double> payments_by_turn;
  double welfare = 0.0;
};

// ---------------------------------------------------------------------------
// Time rewards and schedules

inline std::vector<double> time_rewards(std::span<const double> turn_times) {
  std::vector<double> rewards;
  rewards.reserve(turn_times.size());
  for (std::size_t k = 0; k < turn_times.size(); ++k) {
    const double t = turn_times[k];
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidInput("turn times must be positive");
    if (k > 0 && !(t > turn_times[k - 1])) {
      throw InvalidInput("turn times must be strictly increasing");
    }
    rewards.push_back(1.0 / t);
  }
  return rewards;
}

/// t_k = k * tau.
inline std::vector<double> uniform_turn_times(std::size_t n, double tau) {
  if (!(tau > 0.0)) throw InvalidInput("crossing time tau must be positive");
  std::vector<double> times(n);
  for (std::size_t k = 0; k < n; ++k) times[k] = static_cast<double>(k + 1) * tau;
  return times;
}

inline TurnSchedule make_schedule(TurnOrdering ordering, std::vector<double> turn_times) {
  if (ordering.size() != turn_times.size()) {
    throw InvalidInput("ordering and turn times differ in length");
  }
  TurnSchedule s;
  s.rewards = time_rewards(turn_times);
  s.ordering = std::move(ordering);
  s.turn_times = std::move(turn_times);
  return s;
}

// ---------------------------------------------------------------------------
// Utility and payment

inline bool is_descending(std::span<const double> values) {
  return std::is_sorted(values.begin(), values.end(), std::greater<>());
}

/// Utility and payment of the bidder in 1-based slot `k`:
///   payment = sum_{j=k..K} b_{j+1} (alpha_j - alpha_{j+1}),  b_{K+1} = alpha_{K+1} = 0
///   utility = valuation * alpha_k - payment
inline UtilityAndPayment utility(std::size_t k, std::span<const double> sorted_bids,
                                 double valuation, std::span<const double> rewards) {
  const std::size_t slots = rewards.size();
  if (sorted_bids.size() != slots) throw InvalidInput("one bid per slot required");
  if (k < 1 || k > slots) throw InvalidInput("slot index out of range");
  if (!is_descending(sorted_bids)) throw InvalidInput("bids must be sorted descending");

  auto bid_at = [&](std::size_t slot) { return slot <= slots ? sorted_bids[slot - 1] : 0.0; };
  auto reward_at = [&](std::size_t slot) { return slot <= slots ? rewards[slot - 1] : 0.0; };

  double payment = 0.0;
  for (std::size_t j = k; j <= slots; ++j) {
    payment += bid_at(j + 1) * (reward_at(j) - reward_at(j + 1));
  }
  return {valuation * reward_at(k) - payment, payment};
}

inline UtilityAndPayment utility(std::size_t k, std::span<const double> sorted_bids,
                                 double valuation, const TurnSchedule& schedule) {
  return utility(k, sorted_bids, valuation, schedule.rewards);
}

/// Utility of the truthful bidder in slot `from` if it alone changes its bid
/// so that it lands in slot `to`; every other bidder keeps its truthful bid.
inline double deviation_utility(std::size_t from, std::size_t to,
                                std::span<const double> zeta_by_turn,
                                std::span<const double> rewards) {
  const std::size_t n = zeta_by_turn.size();
  if (from < 1 || from > n || to < 1 || to > n) throw InvalidInput("slot index out of range");
  if (!is_descending(zeta_by_turn)) throw InvalidInput("truthful profile must be descending");
  std::vector<double> others;
  others.reserve(n);
  for (std::size_t s = 1; s <= n; ++s) {
    if (s != from) others.push_back(zeta_by_turn[s - 1]);
  }
  // The deviating bid only has to fall between its new neighbours; its exact
  // value never enters the deviator's own payment.
  const double deviant_bid = zeta_by_turn[to - 1];
  std::vector<double> bids = others;
  bids.insert(bids.begin() + static_cast<std::ptrdiff_t>(to - 1), deviant_bid);
  return utility(to, bids, zeta_by_turn[from - 1], rewards).utility;
}

/// Change in utility (deviated minus truthful) when the slot-k agent
/// overbids into slot k-1.
inline double overbid_delta(std::size_t k, std::span<const double> zeta_by_turn,
                            std::span<const double> rewards) {
  if (k < 2) throw InvalidInput("overbidding needs a higher slot (k >= 2)");
  const double truthful = utility(k, zeta_by_turn, zeta_by_turn[k - 1], rewards).utility;
  return deviation_utility(k, k - 1, zeta_by_turn, rewards) - truthful;
}

inline double overbid_delta(std::size_t k, std::span<const double> zeta_by_turn,
                            const TurnSchedule& schedule) {
  return overbid_delta(k, zeta_by_turn, schedule.rewards);
}

/// Loss in utility (truthful minus deviated) when the slot-k agent
/// underbids into slot k+1.
inline double underbid_delta(std::size_t k, std::span<const double> zeta_by_turn,
                             std::span<const double> rewards) {
  if (k >= zeta_by_turn.size()) throw InvalidInput("underbidding needs a lower slot (k < K)");
  const double truthful = utility(k, zeta_by_turn, zeta_by_turn[k - 1], rewards).utility;
  return truthful - deviation_utility(k, k + 1, zeta_by_turn, rewards);
}

inline double underbid_delta(std::size_t k, std::span<const double> zeta_by_turn,
                             const TurnSchedule& schedule) {
  return underbid_delta(k, zeta_by_turn, schedule.rewards);
}

/// Gain of an agent whose valuation exceeds its bid when it jumps from the
/// slot finishing at t_cur to the one finishing at t_prev.
inline double economic_manipulation_gain(double valuation, double original_bid, double t_prev,
                                         double t_cur) {
  if (!(t_prev > 0.0) || !(t_cur > 0.0)) throw InvalidInput("turn times must be positive");
  if (!(t_prev < t_cur)) throw InvalidInput("the earlier slot must finish first");
  return (valuation - original_bid) * (1.0 / t_prev - 1.0 / t_cur);
}

// ---------------------------------------------------------------------------
// Allocation

namespace detail {

inline void check_distinct_ids(std::span<const AgentId> ids) {
  std::vector<AgentId> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidInput("agent ids must be distinct");
  }
}

struct Keyed {
  double key;
  std::uint64_t tie;
  AgentId id;
};

// Sorts by key (descending when `descending`), exact ties broken by a seeded
// random key. Optionally counts comparator calls.
inline TurnOrdering order_by_key(std::vector<Keyed> items, bool descending, Seed tie_seed,
                                 std::size_t* comparisons) {
  Rng rng(tie_seed);
  for (auto& item : items) item.tie = rng();
  std::size_t count = 0;
  std::sort(items.begin(), items.end(), [&](const Keyed& l, const Keyed& r) {
    ++count;
    if (l.key != r.key) return descending ? l.key > r.key : l.key < r.key;
    if (l.tie != r.tie) return l.tie < r.tie;
    return l.id < r.id;
  });
  if (comparisons != nullptr) *comparisons = count;
  std::vector<AgentId> by_turn;
  by_turn.reserve(items.size());
  for (const auto& item : items) by_turn.push_back(item.id);
  return TurnOrdering(std::move(by_turn));
}

}  // namespace detail

/// Behavior-based allocation: the largest zeta moves first. Exact ties are
/// broken uniformly at random from `tie_seed`. Runs in O(n log n).
inline TurnOrdering gameplan_ordering(std::span<const Valuation> profiles, Seed tie_seed,
                                      std::size_t* comparisons = nullptr) {
  if (profiles.empty()) throw InvalidInput("no agents to order");
  std::vector<detail::Keyed> items;
  std::vector<AgentId> ids;
  items.reserve(profiles.size());
  ids.reserve(profiles.size());
  for (const auto& p : profiles) {
    if (!(p.value >= 0.0) || !std::isfinite(p.value)) {
      throw InvalidInput("behavior profile of agent " + std::to_string(p.agent_id) +
                         " must be a finite non-negative number");
    }
    items.push_back({p.value, 0, p.agent_id});
    ids.push_back(p.agent_id);
  }
  detail::check_distinct_ids(ids);
  return detail::order_by_key(std::move(items), /*descending=*/true, tie_seed, comparisons);
}

struct BaselineAgent {
  AgentId agent_id = 0;
  std::optional<double> budget;        // economic
  std::optional<double> monetary_bid;  // economic; defaults to the full budget
  std::optional<double> arrival_time;  // fifo, seconds
};

inline TurnOrdering baseline_ordering(BiddingStrategy strategy,
                                      std::span<const BaselineAgent> agents, Seed seed) {
  if (agents.empty()) throw InvalidInput("no agents to order");
  std::vector<AgentId> ids;
  for (const auto& a : agents) ids.push_back(a.agent_id);
  detail::check_distinct_ids(ids);

  std::vector<detail::Keyed> items;
  switch (strategy) {
    case BiddingStrategy::economic:
      for (const auto& a : agents) {
        if (!a.budget && !a.monetary_bid) {
          throw InvalidInput("economic ordering needs a budget for agent " +
                             std::to_string(a.agent_id));
        }
        const double bid = a.monetary_bid.value_or(*a.budget);
        if (a.budget && bid > *a.budget + 1e-12) throw InvalidInput("bid exceeds budget");
        if (!(bid >= 0.0)) throw InvalidInput("bids must be non-negative");
        items.push_back({bid, 0, a.agent_id});
      }
      return detail::order_by_key(std::move(items), /*descending=*/true, seed, nullptr);
    case BiddingStrategy::fifo:
      for (const auto& a : agents) {
        if (!a.arrival_time) {
          throw InvalidInput("fifo ordering needs an arrival time for agent " +
                             std::to_string(a.agent_id));
        }
        items.push_back({*a.arrival_time, 0, a.agent_id});
      }
      return detail::order_by_key(std::move(items), /*descending=*/false, seed, nullptr);
    case BiddingStrategy::random: {
      Rng rng(seed);
      for (std::size_t i = ids.size(); i > 1; --i) {
        std::swap(ids[i - 1], ids[uniform_index(rng, i)]);
      }
      return TurnOrdering(std::move(ids));
    }
    case BiddingStrategy::behavior:
      break;
  }
  throw InvalidInput("behavior bids are ordered by gameplan_ordering");
}

// ---------------------------------------------------------------------------
// Welfare

inline double valuation_of(std::span<const Valuation> valuations, AgentId id) {
  for (const auto& v : valuations) {
    if (v.agent_id == id) return v.value;
  }
  throw InvalidInput("no valuation for agent " + std::to_string(id));
}

/// sum_i v_i * alpha_{sigma_i}
inline double social_welfare(const TurnOrdering& ordering, std::span<const Valuation> valuations,
                             std::span<const double> rewards) {
  if (ordering.size() != valuations.size() || ordering.size() != rewards.size()) {
    throw InvalidInput("ordering, valuations and rewards differ in length");
  }
  double welfare = 0.0;
  for (std::size_t k = 0; k < ordering.size(); ++k) {
    welfare += valuation_of(valuations, ordering.agents_by_turn()[k]) * rewards[k];
  }
  return welfare;
}

struct OrderingWithWelfare {
  TurnOrdering ordering;
  double welfare = 0.0;
};

inline constexpr std::size_t kBruteForceLimit = 10;

/// Exhaustive search over all n! orderings (n <= 10).
inline OrderingWithWelfare brute_force_optimal_ordering(std::span<const Valuation> valuations,
                                                        std::span<const double> rewards) {
  const std::size_t n = valuations.size();
  if (n == 0) throw InvalidInput("no agents to order");
  if (n > kBruteForceLimit) throw InvalidInput("brute force refused for n > 10");
  if (rewards.size() != n) throw InvalidInput("one reward per agent required");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_welfare = -INFINITY;
  do {
    double w = 0.0;
    for (std::size_t k = 0; k < n; ++k) w += valuations[perm[k]].value * rewards[k];
    if (w > best_welfare) {
      best_welfare = w;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<AgentId> by_turn;
  for (std::size_t idx : best) by_turn.push_back(valuations[idx].agent_id);
  return {TurnOrdering(std::move(by_turn)), best_welfare};
}

// ---------------------------------------------------------------------------
// Full auction and truthfulness check

/// Runs the behavior-based auction with truthful bids b = v = zeta and
/// t_k = k * tau.
inline AuctionOutcome run_gameplan_auction(std::span<const Valuation> profiles, double tau,
                                           Seed tie_seed) {
  AuctionOutcome out;
  auto ordering = gameplan_ordering(profiles, tie_seed);
  out.schedule = make_schedule(ordering, uniform_turn_times(profiles.size(), tau));
  for (AgentId id : out.schedule.ordering.agents_by_turn()) {
    out.bids_by_turn.push_back(valuation_of(profiles, id));
  }
  for (std::size_t k = 1; k <= profiles.size(); ++k) {
    const auto up = utility(k, out.bids_by_turn, out.bids_by_turn[k - 1], out.schedule.rewards);
    out.utilities_by_turn.push_back(up.utility);
    out.payments_by_turn.push_back(up.payment);
  }
  out.welfare = social_welfare(out.schedule.ordering, profiles, out.schedule.rewards);
  return out;
}

struct Deviation {
  std::size_t from = 0;  // 1-based truthful slot
  std::size_t to = 0;    // slot reached by deviating
  double delta = 0.0;    // deviated utility minus truthful utility
};

struct IncentiveReport {
  bool passed = true;
  std::size_t deviations_checked = 0;
  std::vector<Deviation> failures;
  double worst_delta = -INFINITY;  // largest (least negative) deviation gain seen
};

/// Checks that no unilateral deviation from truthful bidding pays off: the
/// adjacent overbid/underbid deltas and every multi-slot move. Tied
/// valuations only require a non-positive gain; distinct ones a gain below
/// -`margin`.
inline IncentiveReport verify_incentive_compatibility(std::span<const double> zeta_by_turn,
                                                      const TurnSchedule& schedule,
                                                      double margin = 1e-12) {
  IncentiveReport report;
  const std::size_t n = zeta_by_turn.size();
  if (n != schedule.rewards.size() || !is_descending(zeta_by_turn)) {
    report.passed = false;
    report.failures.push_back({0, 0, NAN});
    return report;
  }
  auto record = [&](std::size_t from, std::size_t to, double delta) {
    ++report.deviations_checked;
    report.worst_delta = std::max(report.worst_delta, delta);
    const double lo = std::min(from, to), hi = std::max(from, to);
    const bool tied = zeta_by_turn[static_cast<std::size_t>(lo) - 1] ==
                      zeta_by_turn[static_cast<std::size_t>(hi) - 1];
    const bool ok = tied ? delta <= margin : delta < -margin;
    if (!ok) {
      report.passed = false;
      report.failures.push_back({from, to, delta});
    }
  };
  for (std::size_t k = 1; k <= n; ++k) {
    if (k >= 2) record(k, k - 1, overbid_delta(k, zeta_by_turn, schedule));
    if (k + 1 <= n) record(k, k + 1, -underbid_delta(k, zeta_by_turn, schedule));
  }
  for (std::size_t k = 1; k <= n; ++k) {
    const double truthful = utility(k, zeta_by_turn, zeta_by_turn[k - 1], schedule).utility;
    for (std::size_t m = 1; m <= n; ++m) {
      if (m + 1 == k || m == k || m == k + 1) continue;
      record(k, m, deviation_utility(k, m, zeta_by_turn, schedule.rewards) - truthful);
    }
  }
  return report;
}

}  // namespace gameplan::auction
