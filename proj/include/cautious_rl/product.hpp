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

// On-the-fly product of an environment with an LDBA.  The automaton
// coordinate is advanced by reading labels; no product graph is built.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cautious_rl/automata.hpp"
#include "cautious_rl/common.hpp"
#include "cautious_rl/env.hpp"

namespace crl {

struct ProductState {
  StateId s = 0;
  StateId q = 0;
  friend bool operator==(const ProductState&, const ProductState&) = default;
};

// Either an environment action or an epsilon move to automaton state `id`.
struct ProductAction {
  bool epsilon = false;
  std::uint32_t id = 0;

  static ProductAction env(ActionId a) { return {false, a}; }
  static ProductAction eps(StateId q) { return {true, q}; }

  // Total order used for every tie-break: environment actions by id, then
  // epsilon moves by target.
  std::uint32_t code() const { return epsilon ? (0x8000u | id) : id; }
  friend bool operator==(const ProductAction&, const ProductAction&) = default;
  friend bool operator<(const ProductAction& a, const ProductAction& b) { return a.code() < b.code(); }
};

class Product {
 public:
  Product(const Environment& env, const Ldba& ldba)
      : env_(env), ldba_(ldba), labels_(env.propositions(), ldba.propositions()) {}

  const Environment& env() const { return env_; }
  const Ldba& ldba() const { return ldba_; }

  Label automaton_label(StateId s) const { return labels_(env_.label(s)); }

  // (s0, q) with q = delta(q0, L(s0)): the automaton has read the first label.
  ProductState initial() const {
    StateId s0 = env_.initial_state();
    return {s0, ldba_.step(ldba_.initial(), automaton_label(s0))};
  }

  std::vector<ProductAction> available_actions(const ProductState& ps) const {
    std::vector<ProductAction> out;
    for (ActionId a : env_.actions(ps.s)) out.push_back(ProductAction::env(a));
    for (StateId t : ldba_.epsilon_successors(ps.q)) out.push_back(ProductAction::eps(t));
    return out;
  }

  ProductState step(const ProductState& ps, const ProductAction& pa, Rng& rng) const {
    if (pa.epsilon) return {ps.s, pa.id};
    StateId next = env_.sample(ps.s, pa.id, rng);
    return {next, ldba_.step(ps.q, automaton_label(next))};
  }

  bool in_sink(const ProductState& ps) const { return ldba_.in_sink(ps.q); }

  std::string action_name(const ProductAction& pa) const {
    return pa.epsilon ? "eps_" + ldba_.state_name(pa.id) : env_.action_name(pa.id);
  }

 private:
  const Environment& env_;
  const Ldba& ldba_;
  LabelMap labels_;
};

struct RewardOutcome {
  double reward = 0.0;
  FrontierUpdate update;
};

// r_p when the new automaton state is in the current frontier, else 0; the
// frontier is advanced afterwards.
inline RewardOutcome reward_and_update(const ProductState& next, const Frontier& fr, double r_p,
                                       const Ldba& ldba) {
  RewardOutcome out;
  out.reward = fr.contains(next.q) ? r_p : 0.0;
  out.update = accepting_frontier(next.q, fr, ldba);
  return out;
}

}  // namespace crl
