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

// Black-box environment surface seen by the learner, plus an explicit
// kernel interface reserved for oracles.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cautious_rl/common.hpp"

namespace crl {

struct Transition {
  StateId next;
  double probability;
  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Observation {
  StateId state;
  Label label;
  unsigned distance;
};

// Agent-facing MDP.  The transition kernel is deliberately absent: the agent
// can sample moves, read labels and observe a bounded neighbourhood.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::string action_name(ActionId a) const = 0;
  virtual std::string state_name(StateId s) const { return std::to_string(s); }
  virtual StateId initial_state() const = 0;
  virtual std::span<const ActionId> actions(StateId s) const = 0;
  virtual StateId sample(StateId s, ActionId a, Rng& rng) const = 0;
  virtual const std::vector<std::string>& propositions() const = 0;
  virtual Label label(StateId s) const = 0;

  // States at directed distance <= radius from s (s itself at distance 0),
  // in breadth-first order, each with its label.
  std::vector<Observation> observe(StateId s, unsigned radius) const {
    std::vector<Observation> out{{s, label(s), 0}};
    std::unordered_map<StateId, unsigned> seen{{s, 0}};
    std::vector<StateId> next;
    for (std::size_t head = 0; head < out.size(); ++head) {
      const Observation cur = out[head];
      if (cur.distance == radius) continue;
      next.clear();
      successors(cur.state, next);
      for (StateId t : next) {
        if (seen.emplace(t, cur.distance + 1).second) out.push_back({t, label(t), cur.distance + 1});
      }
    }
    return out;
  }

 protected:
  // One-step support of the transition graph (any action, positive mass).
  virtual void successors(StateId s, std::vector<StateId>& out) const = 0;
};

// Exact transition kernel, for oracle computations only.
class KernelModel {
 public:
  virtual ~KernelModel() = default;
  virtual std::vector<Transition> kernel(StateId s, ActionId a) const = 0;
};

inline StateId sample_from(std::span<const Transition> row, Rng& rng) {
  double u = uniform01(rng), acc = 0.0;
  for (const auto& t : row) {
    acc += t.probability;
    if (u < acc) return t.next;
  }
  return row.back().next;
}

// Explicit finite MDP given as tables; also the vehicle for random test
// instances.
class TabularMdp : public Environment, public KernelModel {
 public:
  TabularMdp(std::vector<std::string> props, std::vector<std::string> action_names)
      : props_(std::move(props)), action_names_(std::move(action_names)) {}

  StateId add_state(Label label, std::string name = {}) {
    labels_.push_back(label);
    names_.push_back(name.empty() ? "s" + std::to_string(labels_.size() - 1) : std::move(name));
    rows_.emplace_back();
    acts_.emplace_back();
    return static_cast<StateId>(labels_.size() - 1);
  }

  void set_transition(StateId s, ActionId a, std::vector<Transition> row) {
    auto& acts = acts_[s];
    auto pos = std::lower_bound(acts.begin(), acts.end(), a);
    auto idx = pos - acts.begin();
    if (pos == acts.end() || *pos != a) {
      acts.insert(pos, a);
      rows_[s].insert(rows_[s].begin() + idx, std::move(row));
    } else {
      rows_[s][idx] = std::move(row);
    }
  }

  void set_initial(StateId s) { initial_ = s; }

  std::size_t num_states() const override { return labels_.size(); }
  std::size_t num_actions() const override { return action_names_.size(); }
  std::string action_name(ActionId a) const override { return action_names_.at(a); }
  std::string state_name(StateId s) const override { return names_.at(s); }
  StateId initial_state() const override { return initial_; }
  std::span<const ActionId> actions(StateId s) const override { return acts_[s]; }
  const std::vector<std::string>& propositions() const override { return props_; }
  Label label(StateId s) const override { return labels_[s]; }

  StateId sample(StateId s, ActionId a, Rng& rng) const override { return sample_from(row(s, a), rng); }

  std::vector<Transition> kernel(StateId s, ActionId a) const override { return row(s, a); }

 protected:
  void successors(StateId s, std::vector<StateId>& out) const override {
    for (const auto& r : rows_[s])
      for (const auto& t : r)
        if (t.probability > 0.0) out.push_back(t.next);
  }

 private:
  const std::vector<Transition>& row(StateId s, ActionId a) const {
    const auto& acts = acts_[s];
    auto pos = std::lower_bound(acts.begin(), acts.end(), a);
    if (pos == acts.end() || *pos != a) throw std::invalid_argument("action not available");
    return rows_[s][pos - acts.begin()];
  }

  std::vector<std::string> props_;
  std::vector<std::string> action_names_;
  std::vector<Label> labels_;
  std::vector<std::string> names_;
  std::vector<std::vector<ActionId>> acts_;
  std::vector<std::vector<std::vector<Transition>>> rows_;
  StateId initial_ = 0;
};

// Translates environment labels into an automaton's proposition bits by name.
class LabelMap {
 public:
  LabelMap(const std::vector<std::string>& env_props, const std::vector<std::string>& aut_props) {
    bit_.resize(env_props.size(), 0);
    for (std::size_t i = 0; i < env_props.size(); ++i) {
      auto it = std::find(aut_props.begin(), aut_props.end(), env_props[i]);
      if (it != aut_props.end()) bit_[i] = Label{1} << (it - aut_props.begin());
    }
    for (const auto& p : aut_props)
      if (std::find(env_props.begin(), env_props.end(), p) == env_props.end()) missing_.push_back(p);
  }

  Label operator()(Label env_label) const {
    Label out = 0;
    for (std::size_t i = 0; i < bit_.size(); ++i)
      if (env_label >> i & 1u) out |= bit_[i];
    return out;
  }

  // Automaton propositions the environment never emits.
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<Label> bit_;
  std::vector<std::string> missing_;
};

}  // namespace crl
