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

// Limit-deterministic Buchi automata: representation, text format,
// structural validation, non-accepting sink detection and the accepting
// frontier bookkeeping that drives the state-adaptive reward.
//
// Automaton file format (line oriented, '#' starts a comment):
//
//   ap a b                 proposition list, bit i = i-th name
//   state q0 N             declare a state in the N (initial) partition
//   state q2 D accept 1    D (accepting) partition, member of F_1
//   init q0
//   trans q0 {a} q1        exact label set; {} is the empty set
//   trans q1 else q1       default for every label not listed for q1
//   eps q1 q2              epsilon transition

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cautious_rl/common.hpp"
#include "cautious_rl/graph.hpp"

namespace crl {

enum class Partition { N, D };

struct SinkTransition {
  StateId from;
  Label label;
  StateId to;
  friend bool operator==(const SinkTransition&, const SinkTransition&) = default;
};

class Ldba {
 public:
  static constexpr std::size_t kMaxPropositions = 16;

  std::size_t num_states() const { return names_.size(); }
  std::size_t num_labels() const { return std::size_t{1} << props_.size(); }
  const std::vector<std::string>& propositions() const { return props_; }
  StateId initial() const { return initial_; }
  const std::string& state_name(StateId q) const { return names_[q]; }
  Partition partition(StateId q) const { return partition_[q]; }

  std::optional<StateId> find_state(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<StateId>(it - names_.begin());
  }

  // Deterministic successor; bits outside the proposition list are ignored.
  StateId step(StateId q, Label label) const {
    return delta_[q * num_labels() + (label & (num_labels() - 1))];
  }

  std::span<const StateId> epsilon_successors(StateId q) const { return eps_[q]; }

  std::size_t num_accepting_sets() const { return accepting_.size(); }
  // Sorted member list of F_j, j zero-based.
  const std::vector<StateId>& accepting_set(std::size_t j) const { return accepting_[j]; }
  // Sorted union of all accepting sets.
  const std::vector<StateId>& accepting_union() const { return accepting_union_; }

  // First accepting set containing q.
  std::optional<std::size_t> accepting_index(StateId q) const {
    for (std::size_t j = 0; j < accepting_.size(); ++j)
      if (std::binary_search(accepting_[j].begin(), accepting_[j].end(), q)) return j;
    return std::nullopt;
  }
  bool is_accepting(StateId q) const { return accepting_index(q).has_value(); }

  bool in_sink(StateId q) const { return sink_[q] != 0; }
  const std::vector<StateId>& sink_states() const { return sink_states_; }
  const std::vector<SinkTransition>& sink_transitions() const { return sink_transitions_; }

  // Label rendered in the file syntax, e.g. "{a b}".
  std::string label_string(Label label) const {
    std::string out = "{";
    bool first = true;
    for (std::size_t i = 0; i < props_.size(); ++i) {
      if (!(label >> i & 1u)) continue;
      if (!first) out += ' ';
      out += props_[i];
      first = false;
    }
    return out + "}";
  }

 private:
  friend class LdbaBuilder;

  void compute_sinks();

  std::vector<std::string> props_;
  std::vector<std::string> names_;
  std::vector<Partition> partition_;
  StateId initial_ = 0;
  std::vector<StateId> delta_;
  std::vector<std::vector<StateId>> eps_;
  std::vector<std::vector<StateId>> accepting_;
  std::vector<StateId> accepting_union_;
  std::vector<char> sink_;
  std::vector<StateId> sink_states_;
  std::vector<SinkTransition> sink_transitions_;
};

// Q_sinks: states from which no strongly connected component that carries a
// cycle and meets every accepting set is reachable.  The closed components
// missing some F_k are exactly the non-accepting sink components; everything
// that can only drain into such components is absorbed as well, so the set is
// closed under successors.  Epsilon moves count as edges.
inline void Ldba::compute_sinks() {
  const std::size_t n = num_states();
  std::vector<std::vector<std::size_t>> succ(n), pred(n);
  std::vector<char> self_loop(n, 0);
  for (StateId q = 0; q < n; ++q) {
    std::vector<std::size_t> out;
    for (Label l = 0; l < num_labels(); ++l) out.push_back(step(q, l));
    for (StateId t : eps_[q]) out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    for (std::size_t t : out) {
      if (t == q) self_loop[q] = 1;
      pred[t].push_back(q);
    }
    succ[q] = std::move(out);
  }

  std::size_t ncomp = 0;
  auto comp = graph::scc(n, [&](std::size_t v) -> const std::vector<std::size_t>& { return succ[v]; },
                         &ncomp);
  std::vector<std::size_t> size(ncomp, 0);
  std::vector<char> cyclic(ncomp, 0);
  std::vector<std::vector<char>> meets(ncomp, std::vector<char>(accepting_.size(), 0));
  for (StateId q = 0; q < n; ++q) {
    ++size[comp[q]];
    if (self_loop[q]) cyclic[comp[q]] = 1;
  }
  for (std::size_t c = 0; c < ncomp; ++c)
    if (size[c] > 1) cyclic[c] = 1;
  for (std::size_t j = 0; j < accepting_.size(); ++j)
    for (StateId q : accepting_[j]) meets[comp[q]][j] = 1;

  std::vector<char> live(n, 0);
  std::vector<std::size_t> frontier;
  for (StateId q = 0; q < n; ++q) {
    std::size_t c = comp[q];
    bool good = cyclic[c] && std::all_of(meets[c].begin(), meets[c].end(), [](char m) { return m; });
    if (good) {
      live[q] = 1;
      frontier.push_back(q);
    }
  }
  while (!frontier.empty()) {
    std::size_t v = frontier.back();
    frontier.pop_back();
    for (std::size_t p : pred[v])
      if (!live[p]) {
        live[p] = 1;
        frontier.push_back(p);
      }
  }

  sink_.assign(n, 0);
  sink_states_.clear();
  for (StateId q = 0; q < n; ++q)
    if (!live[q]) {
      sink_[q] = 1;
      sink_states_.push_back(q);
    }
  sink_transitions_.clear();
  for (StateId q = 0; q < n; ++q) {
    if (sink_[q]) continue;
    for (Label l = 0; l < num_labels(); ++l) {
      StateId t = step(q, l);
      if (sink_[t]) sink_transitions_.push_back({q, l, t});
    }
  }
}

// Programmatic construction; build() validates and precomputes sinks.
class LdbaBuilder {
 public:
  LdbaBuilder& propositions(std::vector<std::string> props) {
    if (props.size() > Ldba::kMaxPropositions)
      throw ValidationError("too many propositions (max 16)");
    props_ = std::move(props);
    return *this;
  }

  StateId add_state(std::string name, Partition part) {
    if (index_.count(name)) throw ValidationError("duplicate state '" + name + "'");
    StateId id = static_cast<StateId>(names_.size());
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    partition_.push_back(part);
    eps_.emplace_back();
    defaults_.push_back(std::nullopt);
    return id;
  }

  // j is one-based, matching the file format.
  LdbaBuilder& accept(StateId q, std::size_t j) {
    if (j == 0) throw ValidationError("accepting set index must be >= 1");
    if (accepting_.size() < j) accepting_.resize(j);
    accepting_[j - 1].push_back(q);
    return *this;
  }

  LdbaBuilder& initial(StateId q) {
    initial_ = q;
    return *this;
  }

  LdbaBuilder& transition(StateId from, Label label, StateId to) {
    auto key = std::make_pair(from, label);
    auto it = explicit_.find(key);
    if (it != explicit_.end() && it->second != to)
      throw ValidationError("nondeterministic transition from '" + names_[from] + "'");
    explicit_[key] = to;
    return *this;
  }

  LdbaBuilder& otherwise(StateId from, StateId to) {
    if (defaults_[from] && *defaults_[from] != to)
      throw ValidationError("conflicting default transitions from '" + names_[from] + "'");
    defaults_[from] = to;
    return *this;
  }

  LdbaBuilder& epsilon(StateId from, StateId to) {
    eps_[from].push_back(to);
    return *this;
  }

  std::optional<StateId> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::string>& propositions() const { return props_; }

  Ldba build() const {
    Ldba a;
    a.props_ = props_;
    a.names_ = names_;
    a.partition_ = partition_;
    const std::size_t n = names_.size();
    if (n == 0) throw ValidationError("automaton has no states");
    if (!initial_) throw ValidationError("no initial state");
    a.initial_ = *initial_;

    const std::size_t labels = a.num_labels();
    constexpr StateId kNone = static_cast<StateId>(-1);
    a.delta_.assign(n * labels, kNone);
    for (const auto& [key, to] : explicit_) {
      if (key.second >= labels) throw ValidationError("label outside the proposition list");
      a.delta_[key.first * labels + key.second] = to;
    }
    for (StateId q = 0; q < n; ++q)
      for (Label l = 0; l < labels; ++l) {
        StateId& t = a.delta_[q * labels + l];
        if (t != kNone) continue;
        if (!defaults_[q])
          throw ValidationError("state '" + names_[q] + "' blocks on label " + a.label_string(l) +
                                " (non-blocking check)");
        t = *defaults_[q];
      }

    a.eps_ = eps_;
    for (auto& e : a.eps_) {
      std::sort(e.begin(), e.end());
      e.erase(std::unique(e.begin(), e.end()), e.end());
    }

    if (accepting_.empty()) throw ValidationError("no accepting set declared");
    a.accepting_ = accepting_;
    for (std::size_t j = 0; j < a.accepting_.size(); ++j) {
      auto& set = a.accepting_[j];
      if (set.empty()) throw ValidationError("accepting set " + std::to_string(j + 1) + " is empty");
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
      a.accepting_union_.insert(a.accepting_union_.end(), set.begin(), set.end());
    }
    std::sort(a.accepting_union_.begin(), a.accepting_union_.end());
    a.accepting_union_.erase(std::unique(a.accepting_union_.begin(), a.accepting_union_.end()),
                             a.accepting_union_.end());

    validate(a);
    a.compute_sinks();
    return a;
  }

 private:
  // Limit-determinism: accepting sets live in D, D is closed under labelled
  // moves, N reaches D only through epsilon moves, and the initial state is
  // in N.  An automaton without N states (fully deterministic) may start in D.
  static void validate(const Ldba& a) {
    const std::size_t n = a.num_states();
    for (StateId q : a.accepting_union())
      if (a.partition(q) != Partition::D)
        throw ValidationError("accepting state outside D-partition: '" + a.state_name(q) + "'");
    bool has_n = false;
    for (StateId q = 0; q < n; ++q) {
      if (a.partition(q) == Partition::N) has_n = true;
      for (StateId t : a.epsilon_successors(q)) {
        if (a.partition(q) != Partition::N)
          throw ValidationError("epsilon transition leaves D-partition state '" + a.state_name(q) + "'");
        if (a.partition(t) != Partition::D)
          throw ValidationError("epsilon transition into N-partition state '" + a.state_name(t) + "'");
      }
      for (Label l = 0; l < a.num_labels(); ++l) {
        StateId t = a.step(q, l);
        if (a.partition(q) == Partition::D && a.partition(t) != Partition::D)
          throw ValidationError("labelled transition leaves D-partition at '" + a.state_name(q) + "'");
        if (a.partition(q) == Partition::N && a.partition(t) == Partition::D)
          throw ValidationError("labelled transition from N- to D-partition at '" + a.state_name(q) +
                                "' (must be epsilon)");
      }
    }
    if (has_n && a.partition(a.initial()) != Partition::N)
      throw ValidationError("initial state outside N-partition");
  }

  std::vector<std::string> props_;
  std::vector<std::string> names_;
  std::vector<Partition> partition_;
  std::unordered_map<std::string, StateId> index_;
  std::optional<StateId> initial_;
  std::map<std::pair<StateId, Label>, StateId> explicit_;
  std::vector<std::optional<StateId>> defaults_;
  std::vector<std::vector<StateId>> eps_;
  std::vector<std::vector<StateId>> accepting_;
};

namespace detail {

inline std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace detail

// Parses and validates the automaton text format.  FormatError carries the
// offending line; ValidationError names the violated structural rule.
inline Ldba load_ldba(std::string_view text) {
  LdbaBuilder b;
  bool have_ap = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;

  auto state_ref = [&](const std::string& name) {
    auto id = b.find(name);
    if (!id) throw FormatError("unknown state '" + name + "'", line_no);
    return *id;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto words = detail::split_words(line);
    if (words.empty()) continue;
    const std::string& kw = words[0];
    try {
      if (kw == "ap") {
        if (have_ap) throw FormatError("duplicate 'ap' line", line_no);
        b.propositions({words.begin() + 1, words.end()});
        have_ap = true;
      } else if (kw == "state") {
        if (words.size() < 3) throw FormatError("expected 'state <name> N|D [accept k]...'", line_no);
        Partition part;
        if (words[2] == "N") part = Partition::N;
        else if (words[2] == "D") part = Partition::D;
        else throw FormatError("partition must be N or D", line_no);
        StateId q = b.add_state(words[1], part);
        for (std::size_t i = 3; i < words.size(); i += 2) {
          if (words[i] != "accept" || i + 1 >= words.size())
            throw FormatError("expected 'accept <index>'", line_no);
          std::size_t j = 0;
          try {
            j = std::stoul(words[i + 1]);
          } catch (const std::exception&) {
            throw FormatError("bad accepting index '" + words[i + 1] + "'", line_no);
          }
          b.accept(q, j);
        }
      } else if (kw == "init") {
        if (words.size() != 2) throw FormatError("expected 'init <state>'", line_no);
        b.initial(state_ref(words[1]));
      } else if (kw == "eps") {
        if (words.size() != 3) throw FormatError("expected 'eps <from> <to>'", line_no);
        b.epsilon(state_ref(words[1]), state_ref(words[2]));
      } else if (kw == "trans") {
        if (!have_ap) throw FormatError("'trans' before 'ap'", line_no);
        // trans <from> {a b} <to>   |   trans <from> else <to>
        std::string rest(line.substr(line.find("trans") + 5));
        auto parts = detail::split_words(rest);
        if (parts.size() < 3) throw FormatError("expected 'trans <from> <label> <to>'", line_no);
        StateId from = state_ref(parts.front());
        StateId to = state_ref(parts.back());
        if (parts.size() == 3 && parts[1] == "else") {
          b.otherwise(from, to);
          continue;
        }
        std::size_t open = rest.find('{'), close = rest.find('}');
        if (open == std::string::npos || close == std::string::npos || close < open)
          throw FormatError("label must be '{...}' or 'else'", line_no);
        Label label = 0;
        for (const auto& p : detail::split_words(std::string_view(rest).substr(open + 1, close - open - 1))) {
          const auto& props = b.propositions();
          auto it = std::find(props.begin(), props.end(), p);
          if (it == props.end()) throw FormatError("unknown proposition '" + p + "'", line_no);
          label |= Label{1} << (it - props.begin());
        }
        b.transition(from, label, to);
      } else {
        throw FormatError("unknown directive '" + kw + "'", line_no);
      }
    } catch (const ValidationError& e) {
      throw FormatError(e.what(), line_no);
    }
  }
  return b.build();
}

// Accepting frontier: the accepting states still owed a visit.
struct Frontier {
  std::vector<StateId> states;  // sorted, never empty between updates
  bool contains(StateId q) const { return std::binary_search(states.begin(), states.end(), q); }
  friend bool operator==(const Frontier&, const Frontier&) = default;
};

inline Frontier initial_frontier(const Ldba& a) { return Frontier{a.accepting_union()}; }

struct FrontierUpdate {
  Frontier frontier;
  bool accepting_hit = false;  // q belongs to an accepting set still in the frontier
  bool reset = false;          // the reset branch fired
};

// Visiting F_j removes it from the frontier; visiting the last remaining set
// resets the frontier to all other sets.  A single accepting set resets to
// itself, so the frontier is never empty.
inline FrontierUpdate accepting_frontier(StateId q, const Frontier& fr, const Ldba& a) {
  auto j = a.accepting_index(q);
  if (!j) return {fr, false, false};
  const auto& fj = a.accepting_set(*j);

  FrontierUpdate out;
  out.accepting_hit = std::any_of(fj.begin(), fj.end(), [&](StateId s) { return fr.contains(s); });
  const auto& base = (fr.states == fj) ? a.accepting_union() : fr.states;
  out.reset = fr.states == fj;
  std::set_difference(base.begin(), base.end(), fj.begin(), fj.end(),
                      std::back_inserter(out.frontier.states));
  if (out.frontier.states.empty()) {
    out.frontier.states = a.accepting_union();
    out.reset = true;
  }
  return out;
}

}  // namespace crl
