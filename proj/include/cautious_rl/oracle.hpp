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

// Ground truth on small enumerable instances: the materialized product, its
// maximal end components, maximal satisfaction probability, exact Q by value
// iteration and a path-tree violation bound.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cautious_rl/automata.hpp"
#include "cautious_rl/common.hpp"
#include "cautious_rl/env.hpp"
#include "cautious_rl/graph.hpp"
#include "cautious_rl/product.hpp"

namespace crl {

class CapExceeded : public std::runtime_error {
 public:
  explicit CapExceeded(std::size_t cap)
      : std::runtime_error("product exceeds the materialization cap of " + std::to_string(cap) + " states") {}
};

struct Successor {
  std::uint32_t target;  // index into ExplicitProduct::states
  double probability;
};

struct Choice {
  ProductAction action;
  std::vector<Successor> row;
};

struct ExplicitProduct {
  std::vector<ProductState> states;         // states[0] is the initial state
  std::vector<std::vector<Choice>> choices;  // per state, in available-action order
  std::vector<char> sink;
  std::vector<std::uint32_t> accepting_mask;  // bit j: q in F_j
  std::size_t num_accepting_sets = 0;

  std::size_t size() const { return states.size(); }

  std::optional<std::size_t> find(const ProductState& ps) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == ps) return i;
    return std::nullopt;
  }

  std::size_t choice_index(std::size_t i, const ProductAction& pa) const {
    const auto& cs = choices[i];
    for (std::size_t c = 0; c < cs.size(); ++c)
      if (cs[c].action == pa) return c;
    throw std::invalid_argument("action not available at product state");
  }
};

// Reachable product by breadth-first search from the initial state, using the
// environment's true kernel.  Epsilon moves become deterministic rows.
inline ExplicitProduct materialize_product(const Product& prod, const KernelModel& model,
                                           std::size_t cap = 200000) {
  const Ldba& ldba = prod.ldba();
  ExplicitProduct ep;
  ep.num_accepting_sets = ldba.num_accepting_sets();
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  auto key = [](const ProductState& ps) { return (std::uint64_t{ps.s} << 32) | ps.q; };
  auto intern = [&](const ProductState& ps) {
    auto [it, fresh] = index.try_emplace(key(ps), static_cast<std::uint32_t>(ep.states.size()));
    if (fresh) {
      if (ep.states.size() >= cap) throw CapExceeded(cap);
      ep.states.push_back(ps);
    }
    return it->second;
  };

  intern(prod.initial());
  for (std::size_t i = 0; i < ep.states.size(); ++i) {
    const ProductState ps = ep.states[i];
    std::vector<Choice> cs;
    for (const auto& pa : prod.available_actions(ps)) {
      Choice c{pa, {}};
      if (pa.epsilon) {
        c.row.push_back({intern({ps.s, pa.id}), 1.0});
      } else {
        for (const auto& t : model.kernel(ps.s, pa.id)) {
          if (t.probability <= 0.0) continue;
          ProductState next{t.next, ldba.step(ps.q, prod.automaton_label(t.next))};
          c.row.push_back({intern(next), t.probability});
        }
      }
      cs.push_back(std::move(c));
    }
    ep.choices.push_back(std::move(cs));
  }
  ep.sink.resize(ep.states.size());
  ep.accepting_mask.resize(ep.states.size());
  for (std::size_t i = 0; i < ep.states.size(); ++i) {
    const StateId q = ep.states[i].q;
    ep.sink[i] = ldba.in_sink(q);
    for (std::size_t j = 0; j < ldba.num_accepting_sets(); ++j) {
      const auto& fj = ldba.accepting_set(j);
      if (std::binary_search(fj.begin(), fj.end(), q)) ep.accepting_mask[i] |= 1u << j;
    }
  }
  return ep;
}

struct EndComponent {
  std::vector<std::uint32_t> states;
  std::vector<std::vector<std::uint32_t>> choices;  // allowed choice indices per member
};

// Maximal end components by repeated SCC refinement: drop every choice that
// can leave its state's SCC, drop states left without choices, repeat.
inline std::vector<EndComponent> maximal_end_components(const ExplicitProduct& ep) {
  const std::size_t n = ep.size();
  std::vector<char> alive(n, 1);
  std::vector<std::vector<char>> allowed(n);
  for (std::size_t i = 0; i < n; ++i) allowed[i].assign(ep.choices[i].size(), 1);

  std::vector<std::vector<std::size_t>> adj(n);
  std::vector<std::size_t> comp;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      adj[i].clear();
      if (!alive[i]) continue;
      for (std::size_t c = 0; c < allowed[i].size(); ++c)
        if (allowed[i][c])
          for (const auto& t : ep.choices[i][c].row) adj[i].push_back(t.target);
    }
    comp = graph::scc(n, [&](std::size_t v) -> const std::vector<std::size_t>& { return adj[v]; });
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      bool any = false;
      for (std::size_t c = 0; c < allowed[i].size(); ++c) {
        if (!allowed[i][c]) continue;
        for (const auto& t : ep.choices[i][c].row) {
          if (!alive[t.target] || comp[t.target] != comp[i]) {
            allowed[i][c] = 0;
            changed = true;
            break;
          }
        }
        any = any || allowed[i][c];
      }
      if (!any) {
        alive[i] = 0;
        changed = true;
      }
    }
  }

  std::unordered_map<std::size_t, std::size_t> slot;
  std::vector<EndComponent> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    auto [it, fresh] = slot.try_emplace(comp[i], out.size());
    if (fresh) out.emplace_back();
    EndComponent& ec = out[it->second];
    ec.states.push_back(static_cast<std::uint32_t>(i));
    std::vector<std::uint32_t> cs;
    for (std::size_t c = 0; c < allowed[i].size(); ++c)
      if (allowed[i][c]) cs.push_back(static_cast<std::uint32_t>(c));
    ec.choices.push_back(std::move(cs));
  }
  return out;
}

struct SatisfactionValues {
  std::vector<double> value;  // midpoint of the interval, or lower if uncertified
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<char> accepting_ec;  // member of an accepting maximal end component
  std::size_t iterations = 0;
  bool certified = false;  // upper - lower < tolerance everywhere
};

// Maximal probability of Buechi acceptance: reach the union of accepting
// maximal end components (those meeting every F_j).  Works on the quotient in
// which every other end component is collapsed and its internal choices
// discarded, and returns certified lower and upper bounds.
inline SatisfactionValues max_sat_probability(const ExplicitProduct& ep, double tolerance = 1e-8,
                                              std::size_t max_iterations = 1000000) {
  const std::size_t n = ep.size();
  const std::uint32_t full = ep.num_accepting_sets >= 32 ? ~0u : ((1u << ep.num_accepting_sets) - 1);
  SatisfactionValues out;
  out.accepting_ec.assign(n, 0);

  auto mecs = maximal_end_components(ep);
  std::vector<std::uint32_t> rep(n);
  for (std::size_t i = 0; i < n; ++i) rep[i] = static_cast<std::uint32_t>(i);
  std::vector<char> collapsed(n, 0);
  for (const auto& ec : mecs) {
    std::uint32_t mask = 0;
    for (auto s : ec.states) mask |= ep.accepting_mask[s];
    if (mask == full) {
      for (auto s : ec.states) out.accepting_ec[s] = 1;
    } else {
      for (auto s : ec.states) {
        rep[s] = ec.states.front();
        collapsed[s] = 1;
      }
    }
  }

  // Quotient choices: every choice of every member that does not stay inside
  // its own collapsed component.
  std::vector<std::vector<const Choice*>> qchoices(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& c : ep.choices[i]) {
      bool internal = collapsed[i] && std::all_of(c.row.begin(), c.row.end(), [&](const Successor& t) {
                        return rep[t.target] == rep[i];
                      });
      if (!internal) qchoices[rep[i]].push_back(&c);
    }
  }

  // States that cannot reach the target under any choice are fixed at 0.
  std::vector<std::vector<std::uint32_t>> pred(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const Choice* c : qchoices[i])
      for (const auto& t : c->row) pred[rep[t.target]].push_back(static_cast<std::uint32_t>(i));
  std::vector<char> reach(n, 0);
  std::queue<std::uint32_t> bfs;
  for (std::size_t i = 0; i < n; ++i)
    if (out.accepting_ec[i]) {
      reach[i] = 1;
      bfs.push(static_cast<std::uint32_t>(i));
    }
  while (!bfs.empty()) {
    auto v = bfs.front();
    bfs.pop();
    for (auto p : pred[v])
      if (!reach[p]) {
        reach[p] = 1;
        bfs.push(p);
      }
  }

  std::vector<double> lo(n, 0.0), hi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.accepting_ec[i]) lo[i] = hi[i] = 1.0;
    else if (reach[i] && rep[i] == i) hi[i] = 1.0;
  }
  auto backup = [&](std::size_t i, const std::vector<double>& v) {
    double best = 0.0;
    for (const Choice* c : qchoices[i]) {
      double acc = 0.0;
      for (const auto& t : c->row) acc += t.probability * v[rep[t.target]];
      best = std::max(best, acc);
    }
    return best;
  };
  // Interval iteration, with an optimistic shortcut: whenever the lower
  // bound settles, the guess lo + tolerance is tried as an upper bound and
  // accepted once a backup does not raise it.  Without non-accepting end
  // components the fixpoint is unique, so such a super-fixpoint is sound.
  // Next to near-closed regions with a tiny leak rate neither bound closes
  // in floating point; the settled lower bound is then reported, uncertified.
  std::size_t it = 0;
  std::vector<double> guess(n);
  double settle = tolerance;
  while (it < max_iterations && settle > 1e-15) {
    double delta = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (rep[i] != i || out.accepting_ec[i] || !reach[i]) continue;
      const double v = backup(i, lo);
      if (v > lo[i]) {
        delta = std::max(delta, v - lo[i]);
        lo[i] = v;
      }
      hi[i] = std::min(hi[i], backup(i, hi));
      gap = std::max(gap, hi[i] - lo[i]);
    }
    ++it;
    if (gap < tolerance) {
      out.certified = true;
      break;
    }
    if (delta >= settle) continue;

    for (std::size_t i = 0; i < n; ++i) guess[i] = std::min(hi[i], lo[i] + tolerance);
    bool verified = false, crossed = false;
    for (std::size_t k = 0; k < 64 && !verified && !crossed; ++k, ++it) {
      verified = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (rep[i] != i || out.accepting_ec[i] || !reach[i]) continue;
        const double v = backup(i, guess);
        if (v > guess[i]) verified = false;
        if (v < lo[i]) crossed = true;
        guess[i] = std::min(guess[i], v);
      }
    }
    if (verified) {
      hi = guess;
      out.certified = true;
      break;
    }
    settle /= 16.0;
  }
  out.iterations = it;
  out.lower.resize(n);
  out.upper.resize(n);
  out.value.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.lower[i] = lo[rep[i]];
    out.upper[i] = hi[rep[i]];
    out.value[i] = out.certified ? 0.5 * (lo[rep[i]] + hi[rep[i]]) : lo[rep[i]];
  }
  return out;
}

// Satisfaction probability of a memoryless policy given as one choice index
// per product state: the induced chain analysed with the same machinery.
inline SatisfactionValues policy_sat_probability(const ExplicitProduct& ep, std::span<const std::size_t> policy,
                                                 double tolerance = 1e-8) {
  ExplicitProduct chain = ep;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (chain.choices[i].empty()) continue;
    Choice keep = chain.choices[i].at(policy[i]);
    chain.choices[i].assign(1, std::move(keep));
  }
  return max_sat_probability(chain, tolerance);
}

// Policy table read from a product-level policy.
inline std::vector<std::size_t> tabulate_policy(const ExplicitProduct& ep,
                                                const std::function<ProductAction(const ProductState&)>& policy) {
  std::vector<std::size_t> out(ep.size(), 0);
  for (std::size_t i = 0; i < ep.size(); ++i)
    if (!ep.choices[i].empty()) out[i] = ep.choice_index(i, policy(ep.states[i]));
  return out;
}

struct ExactQ {
  std::vector<std::vector<double>> q;  // per state, per choice
  std::size_t iterations = 0;

  double at(std::size_t state, std::size_t choice) const { return q[state][choice]; }
};

// Q* for the reward r_p on entering an accepting state, with the frontier
// frozen at the full accepting union (exact when there is one accepting set).
// Sink states are terminal with value 0, as episodes end there.
inline ExactQ exact_q(const ExplicitProduct& ep, double r_p, double gamma, double tolerance = 1e-10,
                      std::size_t max_iterations = 10000000) {
  if (!(gamma < 1.0)) throw std::invalid_argument("exact_q requires gamma < 1");
  const std::size_t n = ep.size();
  std::vector<double> v(n, 0.0);
  ExactQ out;
  out.q.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.q[i].assign(ep.choices[i].size(), 0.0);
  auto reward = [&](std::uint32_t t) { return ep.accepting_mask[t] ? r_p : 0.0; };

  for (std::size_t it = 0; it < max_iterations; ++it) {
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (ep.sink[i]) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < ep.choices[i].size(); ++c) {
        double acc = 0.0;
        for (const auto& t : ep.choices[i][c].row) acc += t.probability * (reward(t.target) + gamma * v[t.target]);
        delta = std::max(delta, std::abs(acc - out.q[i][c]));
        out.q[i][c] = acc;
        best = std::max(best, acc);
      }
      if (!ep.choices[i].empty()) v[i] = best;
    }
    out.iterations = it + 1;
    if (delta < tolerance) break;
  }
  return out;
}

// A local kernel: the window, its safe flags and per-state action rows.
struct LocalKernel {
  std::vector<StateId> window;
  std::vector<char> safe;
  std::vector<std::vector<std::pair<ActionId, std::vector<Transition>>>> rows;  // aligned with window
};

// Probability of leaving the safe window within `horizon` transitions, the
// first being a: 1 - sum_s' P(s, a, s') stay(s', H - 1), with stay evaluated
// by expanding the full tree of continuations (no memoisation):
// stay(x, 0) = safe(x), stay(x, k) = safe(x) min_a sum P stay(x', k - 1),
// out-of-window mass 0.
inline double brute_force_violation(const LocalKernel& lk, StateId s, ActionId a, unsigned horizon) {
  auto find = [&](StateId x) -> std::ptrdiff_t {
    auto it = std::find(lk.window.begin(), lk.window.end(), x);
    return it == lk.window.end() ? -1 : it - lk.window.begin();
  };
  std::function<double(StateId, unsigned)> stay = [&](StateId x, unsigned k) -> double {
    auto i = find(x);
    if (i < 0 || !lk.safe[i]) return 0.0;
    if (k == 0) return 1.0;
    const auto& acts = lk.rows[i];
    if (acts.empty()) return stay(x, k - 1);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [act, row] : acts) {
      double acc = 0.0;
      for (const auto& t : row) acc += t.probability * stay(t.next, k - 1);
      best = std::min(best, acc);
    }
    return best;
  };
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  auto i = find(s);
  if (i < 0) throw std::invalid_argument("state outside the window");
  for (const auto& [act, row] : lk.rows[i]) {
    if (act != a) continue;
    double acc = 0.0;
    for (const auto& t : row) acc += t.probability * stay(t.next, horizon - 1);
    return std::clamp(1.0 - acc, 0.0, 1.0);
  }
  return 1.0;  // an action with no known row has no safe mass
}

inline void write_product_csv(std::ostream& os, const ExplicitProduct& ep, const Product& prod) {
  os << "# cautious-rl csv v1\n";
  os << "index,s,q,sink,accepting_mask,action,next,probability\n";
  for (std::size_t i = 0; i < ep.size(); ++i) {
    const auto& ps = ep.states[i];
    for (const auto& c : ep.choices[i])
      for (const auto& t : c.row)
        os << i << ',' << prod.env().state_name(ps.s) << ',' << prod.ldba().state_name(ps.q) << ','
           << int(ep.sink[i]) << ',' << ep.accepting_mask[i] << ',' << prod.action_name(c.action) << ','
           << t.target << ',' << t.probability << '\n';
  }
}

}  // namespace crl
