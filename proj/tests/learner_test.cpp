/*
 * Copyright 2026 The cautious-rl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <array>

#include "cautious_rl/grid_world.hpp"
#include "cautious_rl/learner.hpp"
#include "cautious_rl/oracle.hpp"
#include "test_support.hpp"

namespace crl {
namespace {

using testing::asset;

struct Line {
  GridWorld g = load_grid(asset("line3.map"), 0.0);
  Ldba a = load_ldba(asset("reach.ldba"));
  Product p{g, a};
};

TEST(QUpdate, StepTowardTarget) {
  Line l;
  QTable qt;
  const ProductState ps{0, l.a.initial()}, next{1, l.a.initial()};
  const auto right = ProductAction::env(kRight);
  EXPECT_DOUBLE_EQ(q_update(qt, l.p, ps, right, 10.0, next, 0.85, 0.9), 8.5);
  EXPECT_DOUBLE_EQ(qt.get(ps, right), 8.5);
}

TEST(QUpdate, FullStepIsBellmanBackup) {
  Line l;
  QTable qt;
  const ProductState ps{0, l.a.initial()}, next{1, l.a.initial()};
  qt.set(next, ProductAction::env(kRight), 5.0);
  qt.set(next, ProductAction::env(kLeft), 2.0);
  q_update(qt, l.p, ps, ProductAction::env(kRight), 1.0, next, 1.0, 0.9);
  EXPECT_DOUBLE_EQ(qt.get(ps, ProductAction::env(kRight)), 1.0 + 0.9 * 5.0);
}

TEST(QUpdate, ZeroDiscountKeepsImmediateReward) {
  Line l;
  QTable qt;
  const ProductState ps{1, l.a.initial()}, next{2, *l.a.find_state("q1")};
  qt.set(next, ProductAction::env(kStay), 100.0);
  q_update(qt, l.p, ps, ProductAction::env(kRight), 10.0, next, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(qt.get(ps, ProductAction::env(kRight)), 10.0);
}

TEST(QUpdate, SinkBootstrapsZero) {
  GridWorld g = load_grid(asset("bridge5.map"), 0.0);
  Ldba a = load_ldba(asset("grid_task.ldba"));
  Product p(g, a);
  QTable qt(3.0);
  const ProductState ps{g.at(1, 3), a.initial()}, dead{g.at(0, 3), *a.find_state("q2")};
  ASSERT_TRUE(p.in_sink(dead));
  q_update(qt, p, ps, ProductAction::env(kLeft), 0.0, dead, 1.0, 0.9);
  EXPECT_DOUBLE_EQ(qt.get(ps, ProductAction::env(kLeft)), 0.0);
}

std::vector<ProductAction> moves() {
  return {ProductAction::env(kLeft), ProductAction::env(kRight), ProductAction::env(kUp)};
}

TEST(SelectAction, GreedyOnPenalisedValue) {
  QTable qt;
  Rng rng(1);
  const ProductState ps{0, 0};
  auto c = moves();
  qt.set(ps, c[0], 5.0);
  qt.set(ps, c[1], 4.0);
  std::vector<double> none{0.0, 0.0, 0.0}, risky{0.5, 0.0, 0.0};
  EXPECT_EQ(select_action(qt, ps, c, none, 10.0, 0.0, rng), c[0]);
  EXPECT_EQ(select_action(qt, ps, c, risky, 10.0, 0.0, rng), c[1]);
  EXPECT_EQ(select_action(qt, ps, c, risky, 0.0, 0.0, rng), c[0]);
}

TEST(SelectAction, TiesGoToActionOrder) {
  QTable qt;
  Rng rng(1);
  auto c = moves();
  std::reverse(c.begin(), c.end());
  std::vector<double> none{0.0, 0.0, 0.0};
  EXPECT_EQ(select_action(qt, {0, 0}, c, none, 0.0, 0.0, rng), ProductAction::env(kLeft));
}

TEST(SelectAction, FullExplorationIsUniform) {
  QTable qt;
  qt.set({0, 0}, ProductAction::env(kLeft), 100.0);
  Rng rng(7);
  auto c = moves();
  std::vector<double> none{0.0, 0.0, 0.0};
  std::array<int, 3> hits{};
  const int n = 30000;
  for (int i = 0; i < n; ++i) ++hits[select_action(qt, {0, 0}, c, none, 0.0, 1.0, rng).id];
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / n, 1.0 / 3.0, 0.02);
}

TEST(SelectAction, EmptyCandidatesThrow) {
  QTable qt;
  Rng rng(1);
  EXPECT_THROW(select_action(qt, {0, 0}, {}, {}, 0.0, 0.0, rng), std::invalid_argument);
}

TEST(Episode, ShortLineReachesTarget) {
  Line l;
  TrainConfig cfg;
  cfg.epsilon = 0.0;
  cfg.it_threshold = 2;
  cfg.padding.enabled = false;
  QTable qt;
  qt.set({0, l.a.initial()}, ProductAction::env(kRight), 1.0);
  qt.set({1, l.a.initial()}, ProductAction::env(kRight), 1.0);
  BeliefKernel b;
  Rng rng(3);
  auto st = run_episode(l.p, qt, b, cfg, rng);
  EXPECT_EQ(st.steps, 2u);
  EXPECT_DOUBLE_EQ(st.reward, cfg.r_p);
  EXPECT_TRUE(st.success);
  EXPECT_EQ(st.cause, Termination::Threshold);
  EXPECT_EQ(st.unsafe_entries, 0u);
  EXPECT_EQ(b.visits(0), 2u);
  EXPECT_EQ(b.count(0, kRight, 1), 2u);
}

TEST(Episode, StepsNeverExceedThreshold) {
  GridWorld g = load_grid(asset("bridge5.map"), 0.15);
  Ldba a = load_ldba(asset("grid_task.ldba"));
  Product p(g, a);
  TrainConfig cfg;
  cfg.epsilon = 1.0;
  cfg.it_threshold = 37;
  QTable qt;
  BeliefKernel b;
  Rng rng(5);
  for (std::size_t e = 0; e < 200; ++e) {
    auto st = run_episode(p, qt, b, cfg, rng, e);
    EXPECT_LE(st.steps, cfg.it_threshold);
    EXPECT_EQ(st.cause == Termination::Sink, st.unsafe_entries == 1);
    if (st.cause == Termination::Threshold) {
      EXPECT_EQ(st.steps, cfg.it_threshold);
    }
  }
}

TEST(Episode, AcceptingLoopPaysEveryVisit) {
  Line l;
  TrainConfig cfg;
  cfg.epsilon = 0.0;
  cfg.it_threshold = 5;
  cfg.padding.enabled = false;
  QTable qt;
  qt.set({0, l.a.initial()}, ProductAction::env(kRight), 1.0);
  qt.set({1, l.a.initial()}, ProductAction::env(kRight), 1.0);
  BeliefKernel b;
  Rng rng(3);
  auto st = run_episode(l.p, qt, b, cfg, rng);
  EXPECT_DOUBLE_EQ(st.reward, 4.0 * cfg.r_p);
  EXPECT_EQ(st.frontier_resets, 4u);
}

TEST(Train, SameSeedSameRun) {
  GridWorld g = load_grid(asset("bridge5.map"), 0.15, true);
  Ldba a = load_ldba(asset("grid_task.ldba"));
  Product p(g, a);
  TrainConfig cfg;
  cfg.episodes = 60;
  cfg.epsilon = 0.5;
  cfg.seed = 99;
  auto r1 = train(p, cfg), r2 = train(p, cfg);
  ASSERT_EQ(r1.episodes.size(), r2.episodes.size());
  for (std::size_t i = 0; i < r1.episodes.size(); ++i) {
    EXPECT_EQ(r1.episodes[i].steps, r2.episodes[i].steps);
    EXPECT_EQ(r1.episodes[i].reward, r2.episodes[i].reward);
  }
  auto e1 = r1.q.entries(), e2 = r2.q.entries();
  ASSERT_EQ(e1.size(), e2.size());
  for (std::size_t i = 0; i < e1.size(); ++i) EXPECT_EQ(e1[i].value, e2[i].value);
  cfg.seed = 100;
  auto r3 = train(p, cfg);
  bool differs = r3.episodes.size() != r1.episodes.size();
  for (std::size_t i = 0; !differs && i < r1.episodes.size(); ++i)
    differs = r1.episodes[i].steps != r3.episodes[i].steps;
  EXPECT_TRUE(differs);
}

TEST(Train, ZeroEpisodes) {
  Line l;
  TrainConfig cfg;
  cfg.episodes = 0;
  auto r = train(l.p, cfg);
  EXPECT_TRUE(r.episodes.empty());
  EXPECT_FALSE(r.converged());
  EXPECT_EQ(r.q.size(), 0u);
}

TEST(Train, ConvergesOnDeterministicLine) {
  Line l;
  TrainConfig cfg;
  cfg.episodes = 2000;
  cfg.it_threshold = 4;
  cfg.mu = 1.0;
  cfg.epsilon = 1.0;
  cfg.epsilon_decay = 0.9;
  cfg.padding.enabled = false;
  auto r = train(l.p, cfg);
  ASSERT_TRUE(r.converged());
  EXPECT_LT(*r.converged_at, cfg.episodes);
  EXPECT_EQ(r.episodes.size(), *r.converged_at);
  GreedyPolicy greedy(r.q, l.p);
  EXPECT_EQ(greedy({0, l.a.initial()}), ProductAction::env(kRight));
  EXPECT_EQ(greedy({1, l.a.initial()}), ProductAction::env(kRight));
}

TEST(Train, PaddingReducesUnsafeEntries) {
  GridWorld g = load_grid(asset("bridge20.map"), 0.15, true);
  Ldba a = load_ldba(asset("grid_task.ldba"));
  Product p(g, a);
  TrainConfig cfg;
  cfg.episodes = 60;
  cfg.epsilon = 1.0;
  cfg.stop_on_convergence = false;
  auto unsafe = [&](bool pad) {
    std::size_t total = 0;
    for (std::uint64_t seed = 1; seed <= 2; ++seed) {
      cfg.seed = seed;
      cfg.padding.enabled = pad;
      for (const auto& st : train(p, cfg).episodes) total += st.unsafe_entries;
    }
    return total;
  };
  const std::size_t on = unsafe(true), off = unsafe(false);
  EXPECT_LT(on, off);
  EXPECT_GT(off, 0u);
}

TEST(Evaluate, DeterministicPolicies) {
  Line l;
  Rng rng(4);
  auto right = [](const ProductState&) { return ProductAction::env(kRight); };
  EXPECT_DOUBLE_EQ(evaluate_policy(l.p, right, 200, 10, rng).probability, 1.0);
  auto left = [](const ProductState&) { return ProductAction::env(kLeft); };
  EXPECT_DOUBLE_EQ(evaluate_policy(l.p, left, 200, 10, rng).probability, 0.0);

  GridWorld g = load_grid(asset("bridge5.map"), 0.0, true);
  Ldba a = load_ldba(asset("grid_task.ldba"));
  Product p(g, a);
  auto est = evaluate_policy(p, left, 200, 10, rng);
  EXPECT_DOUBLE_EQ(est.probability, 0.0);
  EXPECT_EQ(est.rollouts, 200u);
}

TEST(Evaluate, MatchesExactPolicyValue) {
  GridWorld g = load_grid(asset("bridge5.map"), 0.15, true);
  Ldba a = load_ldba(asset("grid_task.ldba"));
  Product p(g, a);
  auto ep = materialize_product(p, g);
  auto q = exact_q(ep, 10.0, 0.99);
  auto best = [&](const ProductState& ps) {
    const std::size_t i = *ep.find(ps);
    std::size_t c = 0;
    for (std::size_t k = 1; k < q.q[i].size(); ++k)
      if (q.q[i][k] > q.q[i][c]) c = k;
    return ep.choices[i][c].action;
  };
  auto table = tabulate_policy(ep, best);
  const double exact = policy_sat_probability(ep, table).value[0];
  EXPECT_NEAR(exact, max_sat_probability(ep).value[0], 1e-6);
  Rng rng(8);
  auto est = evaluate_policy(p, best, 10000, 1000, rng);
  const double sigma = std::sqrt(exact * (1.0 - exact) / 10000.0);
  EXPECT_NEAR(est.probability, exact, 2.0 * sigma);
}

}  // namespace
}  // namespace crl
