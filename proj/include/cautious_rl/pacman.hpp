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

// Pacman on a small maze.  A state is the tuple (pacman, ghost_1..ghost_k)
// of free-cell indices.  Pacman moves deterministically; each ghost then
// independently chases (probability p_g: the legal move minimising maze
// distance to pacman, ties broken up, down, left, right) or picks a uniform
// legal move.  A ghost that swaps cells with pacman catches it.
//
// Maze format: '#' wall, '.' free, 'P' pacman, 'G' ghost, '1' / '2' food.

#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cautious_rl/common.hpp"
#include "cautious_rl/env.hpp"
#include "cautious_rl/grid_world.hpp"

namespace crl {

class PacmanWorld : public Environment, public KernelModel {
 public:
  static constexpr Label kF1 = 1u, kF2 = 2u, kGhost = 4u, kNeutral = 8u;

  PacmanWorld(std::size_t width, std::size_t height, std::vector<char> walls, std::size_t pacman,
              std::vector<std::size_t> ghosts, std::size_t food1, std::size_t food2, double p_g)
      : width_(width), height_(height), wall_(std::move(walls)), p_g_(p_g) {
    cell_of_.clear();
    index_of_.assign(wall_.size(), kNoCell);
    for (std::size_t i = 0; i < wall_.size(); ++i)
      if (!wall_[i]) {
        index_of_[i] = cell_of_.size();
        cell_of_.push_back(i);
      }
    const std::size_t n = cell_of_.size();
    neighbour_.assign(n, {kNoCell, kNoCell, kNoCell, kNoCell, kNoCell});
    for (std::size_t c = 0; c < n; ++c)
      for (ActionId m = 0; m < kNumMoves; ++m) neighbour_[c][m] = step_cell(c, m);

    pac_actions_.resize(n);
    ghost_moves_.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
      for (ActionId m = 0; m < kNumMoves; ++m)
        if (neighbour_[c][m] != kNoCell) pac_actions_[c].push_back(m);
      for (ActionId m : {kUp, kDown, kLeft, kRight})
        if (neighbour_[c][m] != kNoCell) ghost_moves_[c].push_back(neighbour_[c][m]);
    }

    dist_.assign(n * n, kUnreachable);
    for (std::size_t src = 0; src < n; ++src) {
      std::deque<std::size_t> queue{src};
      dist_[src * n + src] = 0;
      while (!queue.empty()) {
        std::size_t c = queue.front();
        queue.pop_front();
        for (std::size_t t : ghost_moves_[c])
          if (dist_[src * n + t] == kUnreachable) {
            dist_[src * n + t] = dist_[src * n + c] + 1;
            queue.push_back(t);
          }
      }
    }

    pacman0_ = index_of_.at(pacman);
    for (std::size_t g : ghosts) ghosts0_.push_back(index_of_.at(g));
    food1_ = index_of_.at(food1);
    food2_ = index_of_.at(food2);
    num_states_ = 1;
    for (std::size_t i = 0; i <= ghosts0_.size(); ++i) num_states_ *= n;
  }

  std::size_t num_cells() const { return cell_of_.size(); }
  std::size_t num_ghosts() const { return ghosts0_.size(); }
  double p_g() const { return p_g_; }
  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  // Board position (row-major over the maze text) of a free-cell index.
  std::size_t board_position(std::size_t cell) const { return cell_of_[cell]; }
  std::size_t maze_distance(std::size_t a, std::size_t b) const { return dist_[a * num_cells() + b]; }

  struct Layout {
    std::size_t pacman;
    std::vector<std::size_t> ghosts;
  };

  Layout decode(StateId s) const {
    const std::size_t n = num_cells();
    Layout l{s % n, {}};
    std::size_t rest = s / n;
    for (std::size_t i = 0; i < num_ghosts(); ++i) {
      l.ghosts.push_back(rest % n);
      rest /= n;
    }
    return l;
  }

  StateId encode(const Layout& l) const {
    const std::size_t n = num_cells();
    std::size_t id = 0;
    for (std::size_t i = l.ghosts.size(); i-- > 0;) id = id * n + l.ghosts[i];
    return static_cast<StateId>(id * n + l.pacman);
  }

  // Move a ghost at `ghost` would take in chase mode.
  std::size_t chase_move(std::size_t ghost, std::size_t pacman) const {
    const auto& moves = ghost_moves_[ghost];
    if (moves.empty()) return ghost;
    std::size_t best = moves.front();
    for (std::size_t t : moves)
      if (maze_distance(t, pacman) < maze_distance(best, pacman)) best = t;
    return best;
  }

  const std::vector<std::size_t>& ghost_moves(std::size_t cell) const { return ghost_moves_[cell]; }

  std::size_t num_states() const override { return num_states_; }
  std::size_t num_actions() const override { return kNumMoves; }
  std::string action_name(ActionId a) const override { return move_name(a); }
  std::string state_name(StateId s) const override {
    Layout l = decode(s);
    std::string out = "P" + std::to_string(l.pacman);
    for (std::size_t g : l.ghosts) out += ":G" + std::to_string(g);
    return out;
  }
  StateId initial_state() const override { return encode({pacman0_, ghosts0_}); }
  std::span<const ActionId> actions(StateId s) const override { return pac_actions_[s % num_cells()]; }
  const std::vector<std::string>& propositions() const override { return props_; }

  Label label(StateId s) const override {
    Layout l = decode(s);
    Label out = 0;
    if (std::find(l.ghosts.begin(), l.ghosts.end(), l.pacman) != l.ghosts.end()) out |= kGhost;
    if (l.pacman == food1_) out |= kF1;
    if (l.pacman == food2_) out |= kF2;
    return out ? out : kNeutral;
  }

  // Pacman's move; illegal (walled) actions are rejected.
  std::size_t pacman_target(std::size_t pacman, ActionId a) const {
    if (a >= kNumMoves || neighbour_[pacman][a] == kNoCell)
      throw std::invalid_argument("illegal pacman action '" + std::string(move_name(a)) + "'");
    return neighbour_[pacman][a];
  }

  StateId sample(StateId s, ActionId a, Rng& rng) const override {
    Layout l = decode(s);
    const std::size_t from = l.pacman;
    l.pacman = pacman_target(from, a);
    if (caught(l)) return encode(l);
    for (auto& g : l.ghosts) {
      std::size_t next;
      if (uniform01(rng) < p_g_) {
        next = chase_move(g, l.pacman);
      } else {
        const auto& moves = ghost_moves_[g];
        next = moves.empty() ? g : moves[uniform_index(rng, moves.size())];
      }
      g = resolve_swap(g, next, from, l.pacman);
    }
    return encode(l);
  }

  std::vector<Transition> kernel(StateId s, ActionId a) const override {
    Layout l = decode(s);
    const std::size_t from = l.pacman;
    l.pacman = pacman_target(from, a);
    if (caught(l)) return {{encode(l), 1.0}};

    std::vector<std::vector<std::pair<std::size_t, double>>> per_ghost;
    for (std::size_t g : l.ghosts) {
      std::map<std::size_t, double> out;
      out[resolve_swap(g, chase_move(g, l.pacman), from, l.pacman)] += p_g_;
      const auto& moves = ghost_moves_[g];
      if (moves.empty()) {
        out[g] += 1.0 - p_g_;
      } else {
        for (std::size_t t : moves)
          out[resolve_swap(g, t, from, l.pacman)] += (1.0 - p_g_) / static_cast<double>(moves.size());
      }
      std::vector<std::pair<std::size_t, double>> v;
      for (const auto& [c, p] : out)
        if (p > 0.0) v.emplace_back(c, p);
      per_ghost.push_back(std::move(v));
    }

    std::map<StateId, double> joint;
    Layout cur = l;
    enumerate(per_ghost, 0, 1.0, cur, joint);
    std::vector<Transition> row;
    for (const auto& [t, p] : joint) row.push_back({t, p});
    return row;
  }

  // Agent self-model used as the initial belief: pacman moves as intended and
  // every ghost chases.
  std::vector<Transition> chase_prior(StateId s, ActionId a) const {
    Layout l = decode(s);
    const std::size_t from = l.pacman;
    l.pacman = pacman_target(from, a);
    if (!caught(l))
      for (auto& g : l.ghosts) g = resolve_swap(g, chase_move(g, l.pacman), from, l.pacman);
    return {{encode(l), 1.0}};
  }

 protected:
  void successors(StateId s, std::vector<StateId>& out) const override {
    for (ActionId a : actions(s))
      for (const auto& t : kernel(s, a))
        if (std::find(out.begin(), out.end(), t.next) == out.end()) out.push_back(t.next);
  }

 private:
  static constexpr std::size_t kNoCell = static_cast<std::size_t>(-1);
  static constexpr std::size_t kUnreachable = static_cast<std::size_t>(-1) / 2;
  inline static const std::vector<std::string> props_{"f1", "f2", "g", "n"};

  std::size_t step_cell(std::size_t cell, ActionId m) const {
    std::size_t pos = cell_of_[cell];
    long x = static_cast<long>(pos % width_) + kMoveDx[m];
    long y = static_cast<long>(pos / width_) + kMoveDy[m];
    if (x < 0 || y < 0 || x >= static_cast<long>(width_) || y >= static_cast<long>(height_)) return kNoCell;
    std::size_t t = static_cast<std::size_t>(y) * width_ + static_cast<std::size_t>(x);
    return wall_[t] ? kNoCell : index_of_[t];
  }

  static bool caught(const Layout& l) {
    return std::find(l.ghosts.begin(), l.ghosts.end(), l.pacman) != l.ghosts.end();
  }

  static std::size_t resolve_swap(std::size_t ghost, std::size_t next, std::size_t pac_from,
                                  std::size_t pac_to) {
    return (next == pac_from && ghost == pac_to) ? pac_to : next;
  }

  void enumerate(const std::vector<std::vector<std::pair<std::size_t, double>>>& per_ghost, std::size_t i,
                 double p, Layout& cur, std::map<StateId, double>& out) const {
    if (i == per_ghost.size()) {
      out[encode(cur)] += p;
      return;
    }
    for (const auto& [c, q] : per_ghost[i]) {
      cur.ghosts[i] = c;
      enumerate(per_ghost, i + 1, p * q, cur, out);
    }
  }

  std::size_t width_, height_;
  std::vector<char> wall_;
  double p_g_;
  std::vector<std::size_t> cell_of_, index_of_;
  std::vector<std::array<std::size_t, kNumMoves>> neighbour_;
  std::vector<std::vector<ActionId>> pac_actions_;
  std::vector<std::vector<std::size_t>> ghost_moves_;
  std::vector<std::size_t> dist_;
  std::size_t pacman0_ = 0, food1_ = 0, food2_ = 0;
  std::vector<std::size_t> ghosts0_;
  std::size_t num_states_ = 0;
};

inline PacmanWorld load_maze(std::string_view text, double p_g) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(line);
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw FormatError("empty maze", 1);
  const std::size_t width = rows.front().size();
  std::vector<char> walls;
  std::vector<std::size_t> pac, ghosts, f1, f2;
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != width) throw FormatError("ragged maze row " + std::to_string(y), y + 1);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t pos = y * width + x;
      char c = rows[y][x];
      switch (c) {
        case '#': walls.push_back(1); continue;
        case '.': break;
        case 'P': pac.push_back(pos); break;
        case 'G': ghosts.push_back(pos); break;
        case '1': f1.push_back(pos); break;
        case '2': f2.push_back(pos); break;
        default:
          throw FormatError("unknown maze cell '" + std::string(1, c) + "' at row " + std::to_string(y) +
                                ", column " + std::to_string(x),
                            y + 1);
      }
      walls.push_back(0);
    }
  }
  if (pac.size() != 1) throw FormatError("maze needs exactly one 'P'", 1);
  if (f1.size() != 1 || f2.size() != 1) throw FormatError("maze needs exactly one '1' and one '2'", 1);
  return PacmanWorld(width, rows.size(), std::move(walls), pac[0], std::move(ghosts), f1[0], f2[0], p_g);
}

}  // namespace crl
