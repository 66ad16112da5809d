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

// The pessimistic learner: a count-based belief over the agent's own
// dynamics, a finite-horizon minimum-staying-probability recursion over the
// observed neighbourhood, the resulting violation bound per action, and the
// permissive action set with its visit-driven schedules.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "cautious_rl/automata.hpp"
#include "cautious_rl/common.hpp"
#include "cautious_rl/env.hpp"
#include "cautious_rl/product.hpp"

namespace crl {

struct BeliefEntry {
  StateId s;
  ActionId a;
  StateId next;
  std::uint64_t count;  // psi(s, a, next)
  std::uint64_t total;  // Psi(s, a)
};

// Visit counters over MDP states and actions (not product states).  Psi reads
// 1 and psi reads 0 for pairs never executed; the first execution sets
// Psi = 2 and psi = 2 for the observed successor, so the estimate becomes a
// point mass.  Until a pair is executed its row comes from the optional
// prior self-model.
class BeliefKernel {
 public:
  using Prior = std::function<std::vector<Transition>(StateId, ActionId)>;

  BeliefKernel() = default;
  explicit BeliefKernel(Prior prior) : prior_(std::move(prior)) {}

  std::uint64_t total(StateId s, ActionId a) const {
    auto it = rows_.find(key(s, a));
    return it == rows_.end() ? 1 : it->second.total;
  }

  std::uint64_t count(StateId s, ActionId a, StateId next) const {
    auto it = rows_.find(key(s, a));
    if (it == rows_.end()) return 0;
    for (const auto& [t, c] : it->second.counts)
      if (t == next) return c;
    return 0;
  }

  void record(StateId s, ActionId a, StateId next) {
    Row& row = rows_.try_emplace(key(s, a)).first->second;
    row.total += 1;
    auto it = std::lower_bound(row.counts.begin(), row.counts.end(), next,
                               [](const auto& e, StateId t) { return e.first < t; });
    if (row.total == 2) {
      row.counts.insert(it, {next, 2});
    } else if (it != row.counts.end() && it->first == next) {
      it->second += 1;
    } else {
      row.counts.insert(it, {next, 1});
    }
    ++executed_[s];
  }

  bool visited(StateId s, ActionId a) const { return rows_.count(key(s, a)) != 0; }

  // Calls f(next, probability) for every successor with positive estimate.
  template <class F>
  void for_each(StateId s, ActionId a, F&& f) const {
    auto it = rows_.find(key(s, a));
    if (it != rows_.end()) {
      const double total = static_cast<double>(it->second.total);
      for (const auto& [t, c] : it->second.counts) f(t, static_cast<double>(c) / total);
      return;
    }
    if (!prior_) return;
    auto cached = prior_cache_.find(key(s, a));
    if (cached == prior_cache_.end()) cached = prior_cache_.emplace(key(s, a), prior_(s, a)).first;
    for (const auto& t : cached->second)
      if (t.probability > 0.0) f(t.next, t.probability);
  }

  std::vector<Transition> row(StateId s, ActionId a) const {
    std::vector<Transition> out;
    for_each(s, a, [&](StateId t, double p) { out.push_back({t, p}); });
    return out;
  }

  // v(s): 1 on first encounter, plus one per executed action at s.
  std::uint64_t visits(StateId s) const {
    auto it = executed_.find(s);
    return 1 + (it == executed_.end() ? 0 : it->second);
  }

  // Every observed triple, sorted by (s, a, next).
  std::vector<BeliefEntry> entries() const {
    std::vector<BeliefEntry> out;
    for (const auto& [k, row] : rows_)
      for (const auto& [t, c] : row.counts)
        out.push_back({static_cast<StateId>(k >> 32), static_cast<ActionId>(k & 0xffffffffu), t, c, row.total});
    std::sort(out.begin(), out.end(), [](const BeliefEntry& l, const BeliefEntry& r) {
      return std::tie(l.s, l.a, l.next) < std::tie(r.s, r.a, r.next);
    });
    return out;
  }

  // (state, number of executed actions) for every state acted in, sorted.
  std::vector<std::pair<StateId, std::uint64_t>> executions() const {
    std::vector<std::pair<StateId, std::uint64_t>> out(executed_.begin(), executed_.end());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Row {
    std::uint64_t total = 1;
    std::vector<std::pair<StateId, std::uint64_t>> counts;  // sorted by successor
  };
  static std::uint64_t key(StateId s, ActionId a) { return (std::uint64_t{s} << 32) | a; }

  Prior prior_;
  std::unordered_map<std::uint64_t, Row> rows_;
  std::unordered_map<StateId, std::uint64_t> executed_;
  mutable std::unordered_map<std::uint64_t, std::vector<Transition>> prior_cache_;
};

// u over the observation window; states outside the window read 0.
struct SafetyValues {
  std::unordered_map<StateId, double> u;
  double at(StateId s) const {
    auto it = u.find(s);
    return it == u.end() ? 0.0 : it->second;
  }
};

// Minimum probability of staying inside the safe part of a window for
// `horizon` steps: u_H = indicator(safe), u_k(x) = safe(x) * min_a
// sum_x' P(x, a, x') u_{k+1}(x'), with successors outside the window scored 0.
// `actions(x)` yields the actions at x and `row(x, a, f)` calls f(x', p).
template <class ActionsFn, class RowFn>
std::vector<double> min_staying_probability(std::span<const StateId> window, std::span<const char> safe,
                                            ActionsFn&& actions, RowFn&& row, unsigned horizon) {
  const std::size_t n = window.size();
  std::unordered_map<StateId, std::size_t> index;
  index.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) index.emplace(window[i], i);

  std::vector<double> next(n), cur(n);
  for (std::size_t i = 0; i < n; ++i) next[i] = safe[i] ? 1.0 : 0.0;
  for (unsigned k = 0; k < horizon; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!safe[i]) {
        cur[i] = 0.0;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      for (ActionId a : actions(window[i])) {
        double acc = 0.0;
        row(window[i], a, [&](StateId t, double p) {
          auto it = index.find(t);
          if (it != index.end()) acc += p * next[it->second];
        });
        best = std::min(best, acc);
      }
      cur[i] = std::isinf(best) ? next[i] : best;
    }
    std::swap(cur, next);
  }
  return next;
}

// Window states whose label keeps the current automaton state out of the
// sinks, i.e. q --L(x)--> q' is not a sink transition.
inline std::vector<char> safe_in_window(const Product& prod, StateId q, std::span<const Observation> window) {
  std::vector<char> safe(window.size());
  for (std::size_t i = 0; i < window.size(); ++i)
    safe[i] = !prod.ldba().in_sink(prod.ldba().step(q, prod.automaton_label(window[i].state)));
  return safe;
}

// u_0 over O(s) after `horizon` backups under the belief kernel.
inline SafetyValues local_safety_values(const Product& prod, const ProductState& ps, const BeliefKernel& belief,
                                        unsigned radius, unsigned horizon) {
  auto window = prod.env().observe(ps.s, radius);
  std::vector<StateId> states(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) states[i] = window[i].state;
  auto safe = safe_in_window(prod, ps.q, window);
  auto u = min_staying_probability(
      states, safe, [&](StateId x) { return prod.env().actions(x); },
      [&](StateId x, ActionId a, auto&& f) { belief.for_each(x, a, f); }, horizon);
  SafetyValues out;
  out.u.reserve(states.size() * 2);
  for (std::size_t i = 0; i < states.size(); ++i) out.u.emplace(states[i], u[i]);
  return out;
}

// U_H(s, a) = 1 - sum_s' P(s, a, s') u_0(s').  Epsilon moves do not move s:
// they score 1 when their target is a sink state and 0 otherwise.
inline double violation_bound(const Product& prod, const ProductState& ps, const ProductAction& pa,
                              const BeliefKernel& belief, const SafetyValues& values) {
  if (pa.epsilon) return prod.ldba().in_sink(pa.id) ? 1.0 : 0.0;
  double stay = 0.0;
  belief.for_each(ps.s, pa.id, [&](StateId t, double p) { stay += p * values.at(t); });
  return std::clamp(1.0 - stay, 0.0, 1.0);
}

// Indices of actions with bound < p_critical, ordered by bound then action
// order, truncated to the first kappa.  Empty when every action is critical.
inline std::vector<std::size_t> permissive_actions(std::span<const ProductAction> actions,
                                                   std::span<const double> bounds, double p_critical,
                                                   std::size_t kappa = std::numeric_limits<std::size_t>::max()) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < actions.size(); ++i)
    if (bounds[i] < p_critical) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](std::size_t l, std::size_t r) {
    if (bounds[l] != bounds[r]) return bounds[l] < bounds[r];
    return actions[l] < actions[r];
  });
  if (idx.size() > kappa) idx.resize(kappa);
  return idx;
}

// Fallback when every action is critical: the least violating one.
inline std::size_t least_violating(std::span<const ProductAction> actions, std::span<const double> bounds) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < actions.size(); ++i)
    if (bounds[i] < bounds[best] || (bounds[i] == bounds[best] && actions[i] < actions[best])) best = i;
  return best;
}

// kappa(v) = min(n, 1 + floor(log2 v)).
inline std::size_t schedule_kappa(std::uint64_t visits, std::size_t set_size) {
  std::size_t k = 1;
  for (std::uint64_t v = visits; v > 1; v >>= 1) ++k;
  return std::min(set_size, k);
}

// H(v) = max(1, r_o - floor(v / N_h)).
inline unsigned schedule_horizon(std::uint64_t visits, unsigned radius, std::uint64_t step = 20) {
  std::uint64_t drop = visits / step;
  return drop + 1 >= radius ? 1u : static_cast<unsigned>(radius - drop);
}

}  // namespace crl
