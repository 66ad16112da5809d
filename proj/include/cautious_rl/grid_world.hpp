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

// Slippery grid world.  With probability 1 - p_slip the robot moves where
// it intended; otherwise it lands on a uniformly chosen member of its
// neighbourhood (the four adjacent cells and itself).  Moves off the board
// resolve to staying put.
//
// Map format: one row per line, '.' safe, 'u' unsafe, 't' target,
// 's' start (exactly one).  Row 0 is the first line.

#pragma once

#include <algorithm>
#include <array>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cautious_rl/common.hpp"
#include "cautious_rl/env.hpp"

namespace crl {

enum Move : ActionId { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kStay = 4 };
inline constexpr std::size_t kNumMoves = 5;

inline const char* move_name(ActionId a) {
  static constexpr std::array<const char*, kNumMoves> names{"left", "right", "up", "down", "stay"};
  return a < kNumMoves ? names[a] : "?";
}

inline constexpr std::array<int, kNumMoves> kMoveDx{-1, 1, 0, 0, 0};
inline constexpr std::array<int, kNumMoves> kMoveDy{0, 0, -1, 1, 0};

enum class Cell : char { Safe = '.', Unsafe = 'u', Target = 't', Start = 's' };

class GridWorld : public Environment, public KernelModel {
 public:
  // Proposition bits.
  static constexpr Label kSafe = 1u, kUnsafe = 2u, kTarget = 4u;

  GridWorld(std::size_t width, std::size_t height, std::vector<Cell> cells, double p_slip)
      : width_(width), height_(height), cells_(std::move(cells)), p_slip_(p_slip) {
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (cells_[i] == Cell::Start) start_ = static_cast<StateId>(i);
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  double p_slip() const { return p_slip_; }
  void set_p_slip(double p) { p_slip_ = p; }
  // Absorbing targets keep the agent in place once a target is reached.
  bool absorbing_targets() const { return absorbing_; }
  void set_absorbing_targets(bool on) { absorbing_ = on; }
  Cell cell(StateId s) const { return cells_[s]; }
  StateId at(std::size_t x, std::size_t y) const { return static_cast<StateId>(y * width_ + x); }
  std::size_t x_of(StateId s) const { return s % width_; }
  std::size_t y_of(StateId s) const { return s / width_; }

  // Cell reached by moving a from s; off-board moves stay.
  StateId intended(StateId s, ActionId a) const {
    if (absorbing_ && cells_[s] == Cell::Target) return s;
    long x = static_cast<long>(x_of(s)) + kMoveDx[a];
    long y = static_cast<long>(y_of(s)) + kMoveDy[a];
    if (x < 0 || y < 0 || x >= static_cast<long>(width_) || y >= static_cast<long>(height_)) return s;
    return at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
  }

  std::size_t num_states() const override { return cells_.size(); }
  std::size_t num_actions() const override { return kNumMoves; }
  std::string action_name(ActionId a) const override { return move_name(a); }
  std::string state_name(StateId s) const override {
    return "(" + std::to_string(x_of(s)) + "," + std::to_string(y_of(s)) + ")";
  }
  StateId initial_state() const override { return start_; }
  std::span<const ActionId> actions(StateId) const override { return kAllMoves; }
  const std::vector<std::string>& propositions() const override { return props_; }

  Label label(StateId s) const override {
    switch (cells_[s]) {
      case Cell::Unsafe: return kUnsafe;
      case Cell::Target: return kTarget;
      default: return kSafe;
    }
  }

  StateId sample(StateId s, ActionId a, Rng& rng) const override {
    if (uniform01(rng) >= p_slip_) return intended(s, a);
    return intended(s, static_cast<ActionId>(uniform_index(rng, kNumMoves)));
  }

  std::vector<Transition> kernel(StateId s, ActionId a) const override {
    std::vector<Transition> row;
    auto add = [&](StateId t, double p) {
      if (p <= 0.0) return;
      for (auto& r : row)
        if (r.next == t) {
          r.probability += p;
          return;
        }
      row.push_back({t, p});
    };
    add(intended(s, a), 1.0 - p_slip_);
    for (ActionId m = 0; m < kNumMoves; ++m) add(intended(s, m), p_slip_ / kNumMoves);
    std::sort(row.begin(), row.end(), [](const Transition& l, const Transition& r) { return l.next < r.next; });
    return row;
  }

 protected:
  void successors(StateId s, std::vector<StateId>& out) const override {
    for (ActionId m = 0; m < kNumMoves; ++m) {
      StateId t = intended(s, m);
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
  }

 private:
  static constexpr std::array<ActionId, kNumMoves> kAllMoves{kLeft, kRight, kUp, kDown, kStay};
  inline static const std::vector<std::string> props_{"safe", "unsafe", "target"};

  std::size_t width_, height_;
  std::vector<Cell> cells_;
  double p_slip_;
  bool absorbing_ = false;
  StateId start_ = 0;
};

inline GridWorld load_grid(std::string_view text, double p_slip, bool absorbing_targets = false) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(line);
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw FormatError("empty map", 1);

  const std::size_t width = rows.front().size();
  std::vector<Cell> cells;
  std::size_t starts = 0;
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (rows[y].size() != width)
      throw FormatError("ragged row " + std::to_string(y) + " (expected " + std::to_string(width) +
                            " columns)",
                        y + 1);
    for (std::size_t x = 0; x < width; ++x) {
      char c = rows[y][x];
      if (c != '.' && c != 'u' && c != 't' && c != 's')
        throw FormatError("unknown cell '" + std::string(1, c) + "' at row " + std::to_string(y) +
                              ", column " + std::to_string(x),
                          y + 1);
      if (c == 's') ++starts;
      cells.push_back(static_cast<Cell>(c));
    }
  }
  if (starts != 1) throw FormatError("map needs exactly one start cell, found " + std::to_string(starts), 1);
  GridWorld g(width, rows.size(), std::move(cells), p_slip);
  g.set_absorbing_targets(absorbing_targets);
  return g;
}

}  // namespace crl
