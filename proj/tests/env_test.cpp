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

#include <cmath>
#include <map>
#include <set>

#include "cautious_rl/grid_world.hpp"
#include "cautious_rl/pacman.hpp"
#include "test_support.hpp"

namespace crl {
namespace {

GridWorld open_grid(std::size_t w, std::size_t h, double p_slip) {
  std::string text;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) text += (x == 0 && y == 0) ? 's' : '.';
    text += '\n';
  }
  return load_grid(text, p_slip);
}

std::set<StateId> observed(const Environment& env, StateId s, unsigned r) {
  std::set<StateId> out;
  for (const auto& o : env.observe(s, r)) out.insert(o.state);
  return out;
}

TEST(GridStep, DeterministicMove) {
  GridWorld g = open_grid(5, 5, 0.0);
  Rng rng(1);
  EXPECT_EQ(g.sample(g.at(2, 2), kRight, rng), g.at(3, 2));
  EXPECT_EQ(g.sample(g.at(2, 2), kUp, rng), g.at(2, 1));
  EXPECT_EQ(g.sample(g.at(2, 2), kStay, rng), g.at(2, 2));
}

TEST(GridStep, CornerClampsToStay) {
  GridWorld g = open_grid(5, 5, 0.0);
  Rng rng(1);
  EXPECT_EQ(g.sample(g.at(0, 0), kLeft, rng), g.at(0, 0));
  EXPECT_EQ(g.sample(g.at(0, 0), kUp, rng), g.at(0, 0));
  EXPECT_EQ(g.sample(g.at(4, 4), kDown, rng), g.at(4, 4));
}

TEST(GridStep, SlipFrequencyMatchesMixture) {
  GridWorld g = open_grid(5, 5, 0.15);
  Rng rng(3);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += g.sample(g.at(2, 2), kRight, rng) == g.at(3, 2);
  EXPECT_NEAR(static_cast<double>(hits) / n, 0.85 + 0.15 / 5, 0.01);
}

TEST(GridKernel, RowsSumToOneEverywhere) {
  GridWorld g = load_grid(testing::asset("bridge20.map"), 0.15);
  for (StateId s = 0; s < g.num_states(); ++s)
    for (ActionId a : g.actions(s)) {
      double total = 0.0;
      for (const auto& t : g.kernel(s, a)) total += t.probability;
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  // Closed-form interior row: intended 0.85 + 0.03, each other neighbour 0.03.
  auto row = g.kernel(g.at(5, 5), kRight);
  std::map<StateId, double> p;
  for (const auto& t : row) p[t.next] = t.probability;
  EXPECT_NEAR(p[g.at(6, 5)], 0.88, 1e-12);
  EXPECT_NEAR(p[g.at(5, 5)], 0.03, 1e-12);
  EXPECT_NEAR(p[g.at(4, 5)], 0.03, 1e-12);
}

TEST(GridKernel, AbsorbingTargets) {
  GridWorld g = load_grid("s.t\n", 0.15, true);
  auto row = g.kernel(2, kLeft);
  ASSERT_EQ(row.size(), 1u);
  EXPECT_EQ(row[0].next, 2u);
  EXPECT_DOUBLE_EQ(row[0].probability, 1.0);
}

TEST(Observe, GridBalls) {
  GridWorld g = open_grid(7, 7, 0.15);
  EXPECT_EQ(g.observe(g.at(3, 3), 1).size(), 5u);
  EXPECT_EQ(g.observe(g.at(3, 3), 2).size(), 13u);
  EXPECT_EQ(g.observe(g.at(0, 0), 1).size(), 3u);
  // The radius-2 ball is exactly the Manhattan ball.
  std::set<StateId> ball;
  for (std::size_t x = 0; x < 7; ++x)
    for (std::size_t y = 0; y < 7; ++y)
      if (std::abs(static_cast<int>(x) - 3) + std::abs(static_cast<int>(y) - 3) <= 2) ball.insert(g.at(x, y));
  EXPECT_EQ(observed(g, g.at(3, 3), 2), ball);
}

TEST(Observe, LabelsDistancesAndMonotonicity) {
  GridWorld g = load_grid(testing::asset("bridge20.map"), 0.15);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    StateId s = static_cast<StateId>(uniform_index(rng, g.num_states()));
    for (unsigned r = 1; r <= 3; ++r) {
      auto obs = g.observe(s, r);
      EXPECT_EQ(obs.front().state, s);
      EXPECT_EQ(obs.front().distance, 0u);
      for (const auto& o : obs) {
        EXPECT_EQ(o.label, g.label(o.state));
        const int d = std::abs(static_cast<int>(g.x_of(o.state)) - static_cast<int>(g.x_of(s))) +
                      std::abs(static_cast<int>(g.y_of(o.state)) - static_cast<int>(g.y_of(s)));
        EXPECT_EQ(static_cast<int>(o.distance), d);
      }
      auto small = observed(g, s, r), big = observed(g, s, r + 1);
      EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    }
  }
}

TEST(LoadGrid, LineMap) {
  GridWorld g = load_grid("s.t\n", 0.0);
  EXPECT_EQ(g.width(), 3u);
  EXPECT_EQ(g.height(), 1u);
  EXPECT_EQ(g.initial_state(), g.at(0, 0));
  EXPECT_EQ(g.cell(g.at(2, 0)), Cell::Target);
}

TEST(LoadGrid, CanonicalBridge) {
  GridWorld g = load_grid(testing::asset("bridge20.map"), 0.15);
  ASSERT_EQ(g.width(), 20u);
  ASSERT_EQ(g.height(), 20u);
  EXPECT_EQ(g.initial_state(), g.at(0, 19));
  // Every target lies above an unsafe band that spans the board except for
  // the bridge columns, and the bridge is flanked by unsafe cells.
  std::size_t lowest_target = 0;
  for (StateId s = 0; s < g.num_states(); ++s)
    if (g.cell(s) == Cell::Target) lowest_target = std::max(lowest_target, g.y_of(s));
  bool found_band = false;
  for (std::size_t y = lowest_target + 1; y < 19 && !found_band; ++y) {
    std::size_t unsafe = 0, first_safe = 20, last_safe = 0;
    for (std::size_t x = 0; x < 20; ++x) {
      if (g.cell(g.at(x, y)) == Cell::Unsafe) {
        ++unsafe;
      } else {
        first_safe = std::min(first_safe, x);
        last_safe = x;
      }
    }
    if (unsafe >= 10 && first_safe > 0 && last_safe < 19) {
      found_band = true;
      EXPECT_EQ(unsafe + (last_safe - first_safe + 1), 20u) << "bridge cells must be contiguous";
      EXPECT_EQ(g.cell(g.at(first_safe - 1, y)), Cell::Unsafe);
      EXPECT_EQ(g.cell(g.at(last_safe + 1, y)), Cell::Unsafe);
    }
  }
  EXPECT_TRUE(found_band);
}

TEST(LoadGrid, Errors) {
  EXPECT_THROW(load_grid("s.s\n", 0.0), FormatError);
  EXPECT_THROW(load_grid("..t\n", 0.0), FormatError);
  EXPECT_THROW(load_grid("s.t\n..\n", 0.0), FormatError);
  EXPECT_THROW(load_grid("s.x\n", 0.0), FormatError);
  EXPECT_THROW(load_grid("", 0.0), FormatError);
}

PacmanWorld corridor(double p_g) { return load_maze("#######\n#P.G12#\n#######\n", p_g); }

TEST(Pacman, ChasingGhostClosesIn) {
  PacmanWorld w = corridor(1.0);
  Rng rng(1);
  const StateId s0 = w.initial_state();
  auto l0 = w.decode(s0);
  auto l1 = w.decode(w.sample(s0, kStay, rng));
  EXPECT_EQ(w.board_position(l1.pacman), w.board_position(l0.pacman));
  EXPECT_EQ(w.board_position(l1.ghosts[0]) + 1, w.board_position(l0.ghosts[0]));
}

TEST(Pacman, ScatterIsUniform) {
  PacmanWorld w = load_maze(testing::asset("pacman7.maze"), 0.0);
  Rng rng(9);
  const StateId s0 = w.initial_state();
  const auto ghost = w.decode(s0).ghosts[1];
  const auto& moves = w.ghost_moves(ghost);
  std::map<std::size_t, int> freq;
  const int n = 100000;
  // Pacman moves up, away from both ghosts, so no catch cuts sampling short.
  for (int i = 0; i < n; ++i) ++freq[w.decode(w.sample(s0, kUp, rng)).ghosts[1]];
  ASSERT_EQ(freq.size(), moves.size());
  for (std::size_t m : moves) EXPECT_NEAR(static_cast<double>(freq[m]) / n, 1.0 / moves.size(), 0.01);
}

TEST(Pacman, CollisionRaisesGhostLabel) {
  PacmanWorld w = load_maze("#######\n#PG.12#\n#######\n", 0.9);
  Rng rng(1);
  StateId next = w.sample(w.initial_state(), kRight, rng);
  EXPECT_TRUE(w.label(next) & PacmanWorld::kGhost);
}

TEST(Pacman, LabelsAndIllegalMoves) {
  PacmanWorld w = load_maze(testing::asset("pacman7.maze"), 0.9);
  EXPECT_EQ(w.label(w.initial_state()), PacmanWorld::kNeutral);
  EXPECT_THROW(w.kernel(w.initial_state(), kDown), std::invalid_argument);
  Rng rng(1);
  EXPECT_THROW(w.sample(w.initial_state(), kDown, rng), std::invalid_argument);
  EXPECT_LE(w.num_states(), 7u * 7u * 49u * 49u);
  EXPECT_EQ(w.num_ghosts(), 2u);
}

TEST(Pacman, KernelMatchesSampling) {
  PacmanWorld w = load_maze(testing::asset("pacman7.maze"), 0.9);
  const StateId s0 = w.initial_state();
  for (ActionId a : w.actions(s0)) {
    auto row = w.kernel(s0, a);
    double total = 0.0;
    std::map<StateId, double> p;
    for (const auto& t : row) {
      total += t.probability;
      p[t.next] = t.probability;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    Rng rng(a + 1);
    std::map<StateId, int> freq;
    const int n = 50000;
    for (int i = 0; i < n; ++i) ++freq[w.sample(s0, a, rng)];
    for (const auto& [t, c] : freq) {
      ASSERT_TRUE(p.count(t)) << "sampled a state outside the kernel support";
      EXPECT_NEAR(static_cast<double>(c) / n, p[t], 0.01);
    }
  }
}

}  // namespace
}  // namespace crl
