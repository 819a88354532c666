#pragma once

// Randomized checks of the auction's guarantees: truthfulness, welfare
// optimality and sort-bound running time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gameplan/auction.hpp"

namespace gameplan::verify {

struct TrialRecord {
  std::size_t trial = 0;
  std::size_t n = 0;
  bool passed = true;
  double value = 0.0;  // worst deviation gain, or welfare gap to the optimum
};

struct SuiteResult {
  std::string name;
  std::vector<TrialRecord> trials;
  bool passed = true;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double seconds = 0.0;
  std::string detail;
};

namespace detail {

inline double elapsed(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

/// n strictly descending values in (0, 1].
inline std::vector<double> descending_profile(Rng& rng, std::size_t n) {
  for (;;) {
    std::vector<double> z(n);
    for (auto& v : z) v = 1.0 - uniform(rng, 0.0, 1.0);
    std::sort(z.begin(), z.end(), std::greater<>());
    if (std::adjacent_find(z.begin(), z.end()) == z.end()) return z;
  }
}

}  // namespace detail

/// Every unilateral deviation from truthful bidding loses utility.
inline SuiteResult incentive_suite(std::size_t instances, Seed seed, std::size_t max_n = 10,
                                   double margin = 1e-12) {
  if (max_n < 2) throw InvalidInput("incentive trials need at least two agents");
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r{"incentive"};
  Rng rng(mix_seed(seed, 11));
  double worst = -INFINITY;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = 2 + uniform_index(rng, max_n - 1);
    const double tau = uniform(rng, 0.5, 5.0);
    const auto zeta = detail::descending_profile(rng, n);
    std::vector<AgentId> ids(n);
    for (std::size_t k = 0; k < n; ++k) ids[k] = static_cast<AgentId>(k);
    const auto schedule = auction::make_schedule(auction::TurnOrdering(ids), auction::uniform_turn_times(n, tau));
    const auto report = auction::verify_incentive_compatibility(zeta, schedule, margin);
    worst = std::max(worst, report.worst_delta);
    ++r.instances;
    if (!report.passed) ++r.failures;
    r.trials.push_back({i, n, report.passed, report.worst_delta});
  }
  r.passed = r.failures == 0;
  r.seconds = detail::elapsed(start);
  r.detail = "worst deviation gain " + std::to_string(worst);
  return r;
}

/// The sorted ordering reaches the exhaustive optimum; ties are drawn on
/// purpose in a share of the instances.
inline SuiteResult welfare_suite(std::size_t instances, Seed seed, std::size_t max_n = 8,
                                 double tolerance = 1e-12) {
  if (max_n < 1 || max_n > auction::kBruteForceLimit) throw InvalidInput("brute-force size must lie in [1, 10]");
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r{"welfare"};
  Rng rng(mix_seed(seed, 12));
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = 1 + uniform_index(rng, max_n);
    const bool ties = uniform(rng, 0.0, 1.0) < 0.3;
    std::vector<auction::Valuation> vals(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double v = ties ? static_cast<double>(uniform_index(rng, 3)) : uniform(rng, 0.0, 5.0);
      vals[k] = {static_cast<AgentId>(k), v};
    }
    const auto rewards = auction::time_rewards(auction::uniform_turn_times(n, uniform(rng, 0.5, 5.0)));
    const auto fast = auction::gameplan_ordering(vals, mix_seed(seed, i));
    const double w = auction::social_welfare(fast, vals, rewards);
    const double best = auction::brute_force_optimal_ordering(vals, rewards).welfare;
    ++r.instances;
    const bool ok = std::abs(w - best) <= tolerance;
    if (!ok) ++r.failures;
    r.trials.push_back({i, n, ok, best - w});
  }
  r.passed = r.failures == 0;
  r.seconds = detail::elapsed(start);
  return r;
}

/// Orders `n` random profiles and reports the wall time and the comparison
/// count relative to n log2 n.
inline SuiteResult complexity_suite(std::size_t n, Seed seed, double budget_seconds = 0.1) {
  SuiteResult r{"complexity"};
  Rng rng(mix_seed(seed, 13));
  std::vector<auction::Valuation> vals(n);
  for (std::size_t k = 0; k < n; ++k) vals[k] = {static_cast<AgentId>(k), uniform(rng, 0.0, 1.0)};
  std::size_t comparisons = 0;
  const auto start = std::chrono::steady_clock::now();
  const auto ordering = auction::gameplan_ordering(vals, seed, &comparisons);
  r.seconds = detail::elapsed(start);
  r.instances = 1;
  const double nlogn = n > 1 ? static_cast<double>(n) * std::log2(static_cast<double>(n)) : 1.0;
  r.passed = ordering.size() == n && r.seconds < budget_seconds;
  r.failures = r.passed ? 0 : 1;
  r.trials.push_back({0, n, r.passed, r.seconds});
  r.detail = "n=" + std::to_string(n) + " comparisons/(n log2 n)=" + std::to_string(comparisons / nlogn);
  return r;
}

/// `suite,trial,n,passed,value` rows.
inline void write_trials(std::ostream& os, std::span<const SuiteResult> results) {
  os << "suite,trial,n,passed,value\n";
  char buf[64];
  for (const auto& r : results) {
    for (const auto& t : r.trials) {
      std::snprintf(buf, sizeof buf, "%.6e", t.value);
      os << r.name << ',' << t.trial << ',' << t.n << ',' << (t.passed ? 1 : 0) << ',' << buf << '\n';
    }
  }
}

}  // namespace gameplan::verify
