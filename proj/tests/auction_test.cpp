#include <gtest/gtest.h>

#include <numeric>

#include "gameplan/auction.hpp"
#include "generators.hpp"

using namespace gameplan;
using namespace gameplan::auction;

namespace {

std::vector<Valuation> valuations(const std::vector<double>& z) {
  std::vector<Valuation> v;
  for (std::size_t i = 0; i < z.size(); ++i) v.push_back({static_cast<AgentId>(i), z[i]});
  return v;
}

// Payment written out longhand: the bidder in slot k pays, for every slot
// j >= k, the next bid times the reward it gives up between j and j+1.
double payment_oracle(std::size_t k, const std::vector<double>& bids, const std::vector<double>& alpha) {
  const std::size_t n = bids.size();
  double p = 0.0;
  for (std::size_t j = k; j <= n; ++j) {
    const double next_bid = j < n ? bids[j] : 0.0;
    const double a_j = alpha[j - 1];
    const double a_next = j < n ? alpha[j] : 0.0;
    p += next_bid * (a_j - a_next);
  }
  return p;
}

// Welfare maximum over every permutation, by index.
double best_welfare_oracle(const std::vector<double>& z, const std::vector<double>& alpha) {
  std::vector<std::size_t> perm(z.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1e300;
  do {
    double w = 0.0;
    for (std::size_t k = 0; k < perm.size(); ++k) w += z[perm[k]] * alpha[k];
    best = std::max(best, w);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST(Rewards, ReciprocalOfTurnTimes) {
  const auto r = time_rewards(uniform_turn_times(3, 2.0));
  EXPECT_DOUBLE_EQ(r[0], 0.5);
  EXPECT_DOUBLE_EQ(r[1], 0.25);
  EXPECT_DOUBLE_EQ(r[2], 1.0 / 6.0);
  EXPECT_THROW(time_rewards(std::vector<double>{1.0, 1.0}), InvalidInput);
  EXPECT_THROW(time_rewards(std::vector<double>{0.0, 1.0}), InvalidInput);
  EXPECT_THROW(uniform_turn_times(3, 0.0), InvalidInput);
  EXPECT_THROW(make_schedule(TurnOrdering({0, 1}), {1.0}), InvalidInput);
}

TEST(Utility, ThreeBidderExample) {
  const std::vector<double> bids{0.9, 0.5, 0.2};
  const std::vector<double> alpha{1.0, 0.5, 1.0 / 3.0};
  // slot 1: 0.5*(1-0.5) + 0.2*(0.5-1/3) = 0.25 + 0.0333..
  const auto u1 = utility(1, bids, 0.9, alpha);
  EXPECT_NEAR(u1.payment, 0.25 + 0.2 / 6.0, 1e-15);
  EXPECT_NEAR(u1.utility, 0.9 - u1.payment, 1e-15);
  EXPECT_NEAR(utility(3, bids, 0.2, alpha).payment, 0.0, 0.0);
  EXPECT_NEAR(utility(2, bids, 0.5, alpha).utility, 0.25 - 0.2 / 6.0, 1e-15);
}

TEST(Utility, MatchesPaymentOracle) {
  testgen::Gen g(21);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = g.integer(1, 10);
    const auto z = testgen::descending_zeta(g, n);
    const auto alpha = time_rewards(uniform_turn_times(static_cast<std::size_t>(n), g.real(0.5, 4)));
    for (int k = 1; k <= n; ++k) {
      const auto up = utility(static_cast<std::size_t>(k), z, z[static_cast<std::size_t>(k - 1)], alpha);
      const double p = payment_oracle(static_cast<std::size_t>(k), z, alpha);
      EXPECT_NEAR(up.payment, p, 1e-14);
      EXPECT_NEAR(up.utility, z[static_cast<std::size_t>(k - 1)] * alpha[static_cast<std::size_t>(k - 1)] - p, 1e-14);
    }
  }
}

TEST(Utility, RejectsBadInput) {
  const std::vector<double> alpha{1.0, 0.5};
  EXPECT_THROW(utility(1, std::vector<double>{0.1, 0.5}, 0.1, alpha), InvalidInput);
  EXPECT_THROW(utility(0, std::vector<double>{0.5, 0.1}, 0.1, alpha), InvalidInput);
  EXPECT_THROW(utility(3, std::vector<double>{0.5, 0.1}, 0.1, alpha), InvalidInput);
  EXPECT_THROW(utility(1, std::vector<double>{0.5}, 0.1, alpha), InvalidInput);
  EXPECT_THROW(overbid_delta(1, std::vector<double>{0.5, 0.1}, alpha), InvalidInput);
  EXPECT_THROW(underbid_delta(2, std::vector<double>{0.5, 0.1}, alpha), InvalidInput);
}

TEST(Incentive, AdjacentDeviationsLose) {
  testgen::Gen g(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = g.integer(2, 10);
    const auto z = testgen::descending_zeta(g, n);
    const auto alpha = time_rewards(uniform_turn_times(static_cast<std::size_t>(n), g.real(0.5, 5)));
    for (int k = 1; k <= n; ++k) {
      const auto sk = static_cast<std::size_t>(k);
      if (k >= 2) EXPECT_LT(overbid_delta(sk, z, alpha), -1e-12);
      if (k < n) EXPECT_GT(underbid_delta(sk, z, alpha), 1e-12);
    }
  }
}

TEST(Incentive, ReportCoversEveryMove) {
  testgen::Gen g(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(g.integer(2, 8));
    const auto z = testgen::descending_zeta(g, static_cast<int>(n));
    std::vector<AgentId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    const auto schedule = make_schedule(TurnOrdering(ids), uniform_turn_times(n, 3.0));
    const auto r = verify_incentive_compatibility(z, schedule);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.deviations_checked, n * (n - 1));
    EXPECT_LT(r.worst_delta, 0.0);
  }
}

TEST(Incentive, DetectsABrokenPayment) {
  // With non-decreasing rewards the late slot is worth more and truthfulness fails.
  const std::vector<double> z{0.9, 0.1};
  TurnSchedule s{TurnOrdering({0, 1}), {2.0, 1.0}, {0.5, 1.0}};
  EXPECT_FALSE(verify_incentive_compatibility(z, s).passed);
  const std::vector<double> unsorted{0.1, 0.9};
  EXPECT_FALSE(verify_incentive_compatibility(unsorted, make_schedule(TurnOrdering({0, 1}), {1, 2})).passed);
}

TEST(Welfare, SortedOrderingIsOptimal) {
  testgen::Gen g(8);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = g.integer(1, 7);
    std::vector<double> z(static_cast<std::size_t>(n));
    const bool ties = g.coin(0.4);
    for (auto& v : z) v = ties ? g.integer(0, 2) : g.real(0, 5);
    const auto vals = valuations(z);
    const auto alpha = time_rewards(uniform_turn_times(z.size(), g.real(0.5, 4)));
    const auto ordering = gameplan_ordering(vals, static_cast<Seed>(trial));
    const double w = social_welfare(ordering, vals, alpha);
    EXPECT_NEAR(w, best_welfare_oracle(z, alpha), 1e-12);
    EXPECT_NEAR(brute_force_optimal_ordering(vals, alpha).welfare, w, 1e-12);
  }
}

TEST(Ordering, DescendingWithSeededTies) {
  const auto vals = valuations({0.2, 0.9, 0.5, 0.9});
  const auto a = gameplan_ordering(vals, 1);
  EXPECT_EQ(a.agent_at(3), 2);
  EXPECT_EQ(a.agent_at(4), 0);
  EXPECT_EQ(a, gameplan_ordering(vals, 1));
  std::set<AgentId> first;
  for (Seed s = 0; s < 64; ++s) first.insert(gameplan_ordering(vals, s).agent_at(1));
  EXPECT_EQ(first, (std::set<AgentId>{1, 3}));
}

TEST(Ordering, IsABijection) {
  testgen::Gen g(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = g.integer(1, 40);
    std::vector<Valuation> vals;
    std::vector<AgentId> ids;
    for (int i = 0; i < n; ++i) {
      vals.push_back({i * 3 + 7, static_cast<double>(g.integer(0, 4))});
      ids.push_back(i * 3 + 7);
    }
    const auto o = gameplan_ordering(vals, static_cast<Seed>(trial));
    EXPECT_TRUE(o.is_permutation_of(ids));
    for (std::size_t k = 1; k < o.size(); ++k)
      EXPECT_GE(valuation_of(vals, o.agent_at(k)), valuation_of(vals, o.agent_at(k + 1)));
  }
}

TEST(Ordering, RejectsBadProfiles) {
  EXPECT_THROW(gameplan_ordering(std::vector<Valuation>{}, 0), InvalidInput);
  EXPECT_THROW(gameplan_ordering(valuations({-0.1}), 0), InvalidInput);
  EXPECT_THROW(gameplan_ordering(valuations({NAN}), 0), InvalidInput);
  EXPECT_THROW(gameplan_ordering(std::vector<Valuation>{{1, 0.1}, {1, 0.2}}, 0), InvalidInput);
  EXPECT_THROW(TurnOrdering({1, 1}), InvalidInput);
  EXPECT_THROW(brute_force_optimal_ordering(valuations(std::vector<double>(11, 0.1)),
                                            std::vector<double>(11, 0.1)),
               InvalidInput);
}

TEST(Ordering, ComparisonCountStaysNearNLogN) {
  testgen::Gen g(10);
  std::vector<Valuation> vals;
  for (int i = 0; i < 4096; ++i) vals.push_back({i, g.unit()});
  std::size_t comparisons = 0;
  gameplan_ordering(vals, 0, &comparisons);
  EXPECT_LT(static_cast<double>(comparisons), 3.0 * 4096 * 12);
}

TEST(Baselines, EconomicFifoRandom) {
  std::vector<BaselineAgent> agents{{0, 5.0, 2.0, 3.0}, {1, 9.0, std::nullopt, 1.0}, {2, 1.0, 1.0, 2.0}};
  const auto econ = baseline_ordering(BiddingStrategy::economic, agents, 0);
  EXPECT_EQ(econ.agents_by_turn(), (std::vector<AgentId>{1, 0, 2}));
  const auto fifo = baseline_ordering(BiddingStrategy::fifo, agents, 0);
  EXPECT_EQ(fifo.agents_by_turn(), (std::vector<AgentId>{1, 2, 0}));
  const auto r1 = baseline_ordering(BiddingStrategy::random, agents, 4);
  EXPECT_EQ(r1, baseline_ordering(BiddingStrategy::random, agents, 4));
  EXPECT_TRUE(r1.is_permutation_of(std::vector<AgentId>{0, 1, 2}));
  std::set<std::vector<AgentId>> seen;
  for (Seed s = 0; s < 100; ++s) seen.insert(baseline_ordering(BiddingStrategy::random, agents, s).agents_by_turn());
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Baselines, MissingFieldsRejected) {
  std::vector<BaselineAgent> agents{{0, std::nullopt, std::nullopt, std::nullopt}};
  EXPECT_THROW(baseline_ordering(BiddingStrategy::economic, agents, 0), InvalidInput);
  EXPECT_THROW(baseline_ordering(BiddingStrategy::fifo, agents, 0), InvalidInput);
  EXPECT_THROW(baseline_ordering(BiddingStrategy::behavior, agents, 0), InvalidInput);
  std::vector<BaselineAgent> over{{0, 1.0, 2.0, 0.0}};
  EXPECT_THROW(baseline_ordering(BiddingStrategy::economic, over, 0), InvalidInput);
}

TEST(Manipulation, GainSign) {
  testgen::Gen g(12);
  for (int trial = 0; trial < 500; ++trial) {
    const double t1 = g.real(0.5, 5), t2 = t1 + g.real(0.1, 5);
    const double bid = g.real(0, 10), v = bid + g.real(1e-6, 10);
    const double gain = economic_manipulation_gain(v, bid, t1, t2);
    EXPECT_GT(gain, 0.0);
    EXPECT_NEAR(gain, (v - bid) * (1 / t1 - 1 / t2), 1e-12);
    EXPECT_LT(economic_manipulation_gain(bid, v, t1, t2), 0.0);
  }
  EXPECT_THROW(economic_manipulation_gain(1, 0, 2, 1), InvalidInput);
  EXPECT_THROW(economic_manipulation_gain(1, 0, 0, 1), InvalidInput);
}

TEST(Auction, EndToEnd) {
  const auto out = run_gameplan_auction(valuations({0.3, 0.8, 0.5}), 2.0, 0);
  EXPECT_EQ(out.schedule.ordering.agents_by_turn(), (std::vector<AgentId>{1, 2, 0}));
  EXPECT_EQ(out.bids_by_turn, (std::vector<double>{0.8, 0.5, 0.3}));
  EXPECT_NEAR(out.welfare, 0.8 / 2 + 0.5 / 4 + 0.3 / 6, 1e-15);
  EXPECT_EQ(out.payments_by_turn.back(), 0.0);
  for (double u : out.utilities_by_turn) EXPECT_GE(u, 0.0);
}
