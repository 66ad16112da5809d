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

#include "cautious_rl/grid_world.hpp"
#include "cautious_rl/product.hpp"
#include "test_support.hpp"

namespace crl {
namespace {

using testing::asset;

struct PersistenceTask {
  TabularMdp mdp = testing::two_state_mdp();
  Ldba ldba = load_ldba(asset("persist_one_set.ldba"));
  Product prod{mdp, ldba};
  StateId q(const char* name) const { return *ldba.find_state(name); }
};

TEST(ProductInitial, ReadsFirstLabel) {
  PersistenceTask f;
  EXPECT_EQ(f.prod.initial(), (ProductState{0, f.q("q1")}));
}

TEST(ProductActions, EpsilonMovesFromQ1) {
  PersistenceTask f;
  auto acts = f.prod.available_actions({1, f.q("q1")});
  std::vector<ProductAction> expected{ProductAction::env(0), ProductAction::env(1), ProductAction::eps(f.q("q2")),
                                      ProductAction::eps(f.q("q3"))};
  EXPECT_EQ(acts, expected);
}

TEST(ProductActions, NoEpsilonOutsideQ1) {
  PersistenceTask f;
  auto acts = f.prod.available_actions({0, f.q("q0")});
  EXPECT_EQ(acts, (std::vector<ProductAction>{ProductAction::env(0), ProductAction::env(1)}));
  acts = f.prod.available_actions({1, f.q("q3")});
  EXPECT_EQ(acts.size(), 2u);
}

TEST(ProductActions, AutomatonWithoutEpsilon) {
  GridWorld g = load_grid("s.t\n", 0.0);
  Ldba a = load_ldba(asset("reach.ldba"));
  Product p(g, a);
  EXPECT_EQ(p.available_actions(p.initial()).size(), g.actions(0).size());
}

TEST(ProductStep, EpsilonKeepsEnvState) {
  PersistenceTask f;
  Rng rng(1);
  EXPECT_EQ(f.prod.step({1, f.q("q1")}, ProductAction::eps(f.q("q3")), rng), (ProductState{1, f.q("q3")}));
}

TEST(ProductStep, EnvMoveFrequency) {
  PersistenceTask f;
  Rng rng(2);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i)
    hits += f.prod.step({0, f.q("q1")}, ProductAction::env(0), rng) == ProductState{1, f.q("q1")};
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.9, 0.01);
}

TEST(ProductStep, TrivialAutomatonMirrorsEnvironment) {
  GridWorld g = load_grid(asset("bridge5.map"), 0.0);
  Ldba a = testing::trivial_ldba({"safe", "unsafe", "target"});
  Product p(g, a);
  Rng rng(4), env_rng(4);
  ProductState ps = p.initial();
  StateId s = g.initial_state();
  for (int t = 0; t < 100; ++t) {
    ActionId act = static_cast<ActionId>(t % kNumMoves);
    ps = p.step(ps, ProductAction::env(act), rng);
    s = g.sample(s, act, env_rng);
    EXPECT_EQ(ps.s, s);
    EXPECT_EQ(ps.q, 0u);
  }
}

TEST(ProductProperty, ProjectionAndDeterminism) {
  GridWorld g = load_grid(asset("bridge20.map"), 0.15);
  Ldba a = load_ldba(asset("grid_task.ldba"));
  Product p(g, a);
  Rng pick(8);
  for (int run = 0; run < 20; ++run) {
    Rng rng(run), env_rng(run);
    ProductState ps = p.initial();
    StateId s = g.initial_state();
    StateId q = a.step(a.initial(), p.automaton_label(s));
    for (int t = 0; t < 200; ++t) {
      ActionId act = static_cast<ActionId>(uniform_index(pick, kNumMoves));
      ps = p.step(ps, ProductAction::env(act), rng);
      s = g.sample(s, act, env_rng);
      q = a.step(q, p.automaton_label(s));
      ASSERT_EQ(ps.s, s);
      ASSERT_EQ(ps.q, q);
    }
  }
}

TEST(Reward, PaysOnOwedAcceptingState) {
  Ldba a = load_ldba(asset("persist_two_sets.ldba"));
  const StateId q2 = *a.find_state("q2"), q3 = *a.find_state("q3"), q1 = *a.find_state("q1");
  auto out = reward_and_update({0, q2}, initial_frontier(a), 10.0, a);
  EXPECT_DOUBLE_EQ(out.reward, 10.0);
  EXPECT_EQ(out.update.frontier.states, (std::vector<StateId>{q3}));
  out = reward_and_update({0, q1}, Frontier{{q3}}, 10.0, a);
  EXPECT_DOUBLE_EQ(out.reward, 0.0);
  EXPECT_EQ(out.update.frontier.states, (std::vector<StateId>{q3}));
  // A set already paid for does not pay again.
  out = reward_and_update({0, q2}, Frontier{{q3}}, 10.0, a);
  EXPECT_DOUBLE_EQ(out.reward, 0.0);
}

TEST(Reward, OneSweepPaysOncePerSet) {
  for (const char* file : {"persist_two_sets.ldba", "persist_one_set.ldba"}) {
    Ldba a = load_ldba(asset(file));
    const StateId q2 = *a.find_state("q2"), q3 = *a.find_state("q3");
    Frontier fr = initial_frontier(a);
    double total = 0.0;
    std::size_t resets = 0;
    // Ten alternating sweeps over both accepting states.
    for (int sweep = 0; sweep < 10; ++sweep)
      for (StateId q : {q2, q3}) {
        auto out = reward_and_update({0, q}, fr, 10.0, a);
        total += out.reward;
        resets += out.update.reset;
        fr = out.update.frontier;
      }
    const double sets = static_cast<double>(a.num_accepting_sets());
    if (a.num_accepting_sets() == 2) {
      EXPECT_DOUBLE_EQ(total, 10 * sets * 10.0) << file;
      // After the first sweep the reset leaves only the other set owed, so
      // every later visit closes a sweep.
      EXPECT_EQ(resets, 19u) << file;
    } else {
      // A single set {q2, q3} is a sweep on every visit.
      EXPECT_DOUBLE_EQ(total, 20 * 10.0) << file;
      EXPECT_EQ(resets, 20u) << file;
    }
    EXPECT_LE(total, 10.0 * 20);
  }
}

}  // namespace
}  // namespace crl
