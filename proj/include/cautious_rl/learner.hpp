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

// The optimistic learner (tabular Q-learning over product states) and the
// training loop that couples it with the safety filter.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "cautious_rl/automata.hpp"
#include "cautious_rl/common.hpp"
#include "cautious_rl/product.hpp"
#include "cautious_rl/safety.hpp"

namespace crl {

struct PaddingParams {
  bool enabled = true;
  unsigned radius = 2;               // observation radius r_o
  double p_critical = 0.82;
  std::uint64_t horizon_step = 20;   // N_h in the horizon schedule
};

struct TrainConfig {
  double gamma = 0.9;
  double mu = 0.85;
  double mu_decay = 0.0;  // step size mu / n^mu_decay, n = visits of the pair
  double r_p = 10.0;
  double q_init = 0.0;
  std::size_t it_threshold = 1000;
  std::size_t episodes = 500;
  double epsilon = 0.1;
  double epsilon_decay = 0.99;  // per episode
  double epsilon_min = 0.0;
  double conv_tol = 1e-3;
  std::size_t conv_window = 10;
  bool stop_on_convergence = true;
  bool conv_requires_reward = true;  // only rewarded episodes count as quiet
  std::uint64_t seed = 1;
  PaddingParams padding;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
    if (!(mu > 0.0 && mu <= 1.0)) throw ValidationError("mu must lie in (0, 1]");
    if (mu_decay < 0.0) throw ValidationError("mu_decay must be >= 0");
    if (!(r_p > 0.0)) throw ValidationError("r_p must be positive");
    if (!std::isfinite(q_init)) throw ValidationError("q_init must be finite");
    if (it_threshold < 1) throw ValidationError("it_threshold must be >= 1");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw ValidationError("epsilon_decay must lie in (0, 1]");
    if (conv_window < 1) throw ValidationError("conv_window must be >= 1");
    if (padding.radius < 1) throw ValidationError("r_o must be >= 1");
    if (!(padding.p_critical > 0.0 && padding.p_critical <= 1.0))
      throw ValidationError("p_critical must lie in (0, 1]");
    if (padding.horizon_step < 1) throw ValidationError("n_h must be >= 1");
  }
};

enum class Termination { Sink, Threshold };

inline const char* termination_name(Termination t) { return t == Termination::Sink ? "sink" : "threshold"; }

struct EpisodeStats {
  std::size_t episode = 0;  // one-based
  std::size_t steps = 0;
  Termination cause = Termination::Threshold;
  std::size_t unsafe_entries = 0;
  std::size_t frontier_resets = 0;
  double reward = 0.0;
  std::size_t forced_choices = 0;
  bool success = false;  // an owed accepting set was visited before any sink
  double max_delta_q = 0.0;
};

struct QEntry {
  ProductState ps;
  ProductAction pa;
  double value;
};

// Sparse Q over (product state, product action); unseen pairs read q_init.
class QTable {
 public:
  explicit QTable(double q_init = 0.0) : q_init_(q_init) {}

  double q_init() const { return q_init_; }

  double get(const ProductState& ps, const ProductAction& pa) const {
    auto it = values_.find(key(ps, pa));
    return it == values_.end() ? q_init_ : it->second.value;
  }

  void set(const ProductState& ps, const ProductAction& pa, double v) { values_[key(ps, pa)].value = v; }

  // Increments and returns the update count of the pair.
  std::uint64_t bump(const ProductState& ps, const ProductAction& pa) {
    auto [it, fresh] = values_.try_emplace(key(ps, pa));
    if (fresh) it->second.value = q_init_;
    return ++it->second.updates;
  }

  double max_value(const Product& prod, const ProductState& ps) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& pa : prod.available_actions(ps)) best = std::max(best, get(ps, pa));
    return std::isinf(best) ? q_init_ : best;
  }

  std::size_t size() const { return values_.size(); }

  std::vector<QEntry> entries() const {
    std::vector<QEntry> out;
    out.reserve(values_.size());
    for (const auto& [k, e] : values_) {
      ProductState ps{static_cast<StateId>(k >> 32), static_cast<StateId>((k >> 16) & 0xffffu)};
      std::uint32_t code = static_cast<std::uint32_t>(k & 0xffffu);
      ProductAction pa{(code & 0x8000u) != 0, code & 0x7fffu};
      out.push_back({ps, pa, e.value});
    }
    std::sort(out.begin(), out.end(), [](const QEntry& l, const QEntry& r) {
      return std::make_tuple(l.ps.s, l.ps.q, l.pa.code()) < std::make_tuple(r.ps.s, r.ps.q, r.pa.code());
    });
    return out;
  }

 private:
  struct Entry {
    double value = 0.0;
    std::uint64_t updates = 0;
  };
  static std::uint64_t key(const ProductState& ps, const ProductAction& pa) {
    return (std::uint64_t{ps.s} << 32) | (std::uint64_t{ps.q & 0xffffu} << 16) | pa.code();
  }

  double q_init_;
  std::unordered_map<std::uint64_t, Entry> values_;
};

// Q(ps, pa) += mu [r + gamma max_a' Q(next, a') - Q(ps, pa)], the max taken
// over every action available at `next`.  Sink states end the episode and
// bootstrap 0.  Returns |delta Q|.
inline double q_update(QTable& qt, const Product& prod, const ProductState& ps, const ProductAction& pa,
                       double reward, const ProductState& next, double mu, double gamma) {
  const double old = qt.get(ps, pa);
  const double future = prod.in_sink(next) ? 0.0 : qt.max_value(prod, next);
  const double target = reward + gamma * future;
  const double updated = old + mu * (target - old);
  qt.set(ps, pa, updated);
  return std::abs(updated - old);
}

// Greedy on Q - penalty * U_H with probability 1 - epsilon, otherwise uniform
// over the candidates.  Ties go to the lowest action order.
inline ProductAction select_action(const QTable& qt, const ProductState& ps,
                                   std::span<const ProductAction> candidates, std::span<const double> bounds,
                                   double penalty, double epsilon, Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("select_action: no candidate actions");
  if (epsilon > 0.0 && uniform01(rng) < epsilon) return candidates[uniform_index(rng, candidates.size())];
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double score = qt.get(ps, candidates[i]) - penalty * bounds[i];
    if (score > best_score || (score == best_score && candidates[i] < candidates[best])) {
      best = i;
      best_score = score;
    }
  }
  return candidates[best];
}

inline double episode_epsilon(const TrainConfig& cfg, std::size_t episode_index) {
  return std::max(cfg.epsilon_min, cfg.epsilon * std::pow(cfg.epsilon_decay, static_cast<double>(episode_index)));
}

// One episode of cautious Q-learning.  Per step: violation bounds for every
// available action, the permissive prefix, action choice, execution, belief
// update, reward and frontier update, Q update.  Stops on entering a sink or
// at it_threshold steps.
inline EpisodeStats run_episode(const Product& prod, QTable& qt, BeliefKernel& belief, const TrainConfig& cfg,
                                Rng& rng, std::size_t episode_index = 0) {
  EpisodeStats stats;
  stats.episode = episode_index + 1;
  const double epsilon = episode_epsilon(cfg, episode_index);
  const auto& pad = cfg.padding;

  ProductState ps = prod.initial();
  Frontier frontier = initial_frontier(prod.ldba());
  std::vector<ProductAction> candidates;
  std::vector<double> candidate_bounds;

  if (prod.in_sink(ps)) {
    stats.cause = Termination::Sink;
    stats.unsafe_entries = 1;
    return stats;
  }

  while (stats.steps < cfg.it_threshold) {
    ++stats.steps;
    const auto actions = prod.available_actions(ps);
    std::vector<double> bounds(actions.size(), 0.0);
    candidates.clear();
    candidate_bounds.clear();

    if (pad.enabled) {
      const std::uint64_t v = belief.visits(ps.s);
      const unsigned horizon = schedule_horizon(v, pad.radius, pad.horizon_step);
      // U_H covers H transitions including a itself: H - 1 backups.
      const SafetyValues values = local_safety_values(prod, ps, belief, pad.radius, horizon - 1);
      for (std::size_t i = 0; i < actions.size(); ++i)
        bounds[i] = violation_bound(prod, ps, actions[i], belief, values);
      auto allowed = permissive_actions(actions, bounds, pad.p_critical);
      if (allowed.empty()) {
        ++stats.forced_choices;
        allowed.push_back(least_violating(actions, bounds));
      } else {
        allowed.resize(schedule_kappa(v, allowed.size()));
      }
      for (std::size_t i : allowed) {
        candidates.push_back(actions[i]);
        candidate_bounds.push_back(bounds[i]);
      }
    } else {
      candidates = actions;
      candidate_bounds = bounds;
    }

    const double penalty = pad.enabled ? cfg.r_p : 0.0;
    const ProductAction a = select_action(qt, ps, candidates, candidate_bounds, penalty, epsilon, rng);
    const ProductState next = prod.step(ps, a, rng);
    if (!a.epsilon) belief.record(ps.s, a.id, next.s);

    const RewardOutcome out = reward_and_update(next, frontier, cfg.r_p, prod.ldba());
    frontier = out.update.frontier;
    stats.reward += out.reward;
    if (out.update.reset) ++stats.frontier_resets;
    if (out.update.accepting_hit && !prod.in_sink(next)) stats.success = true;

    const std::uint64_t n = qt.bump(ps, a);
    const double mu = cfg.mu_decay > 0.0 ? cfg.mu / std::pow(static_cast<double>(n), cfg.mu_decay) : cfg.mu;
    stats.max_delta_q = std::max(stats.max_delta_q, q_update(qt, prod, ps, a, out.reward, next, mu, cfg.gamma));

    ps = next;
    if (prod.in_sink(ps)) {
      ++stats.unsafe_entries;
      stats.cause = Termination::Sink;
      return stats;
    }
  }
  stats.cause = Termination::Threshold;
  return stats;
}

// Greedy policy read off a Q-table: argmax over available actions.
class GreedyPolicy {
 public:
  GreedyPolicy(const QTable& qt, const Product& prod) : qt_(qt), prod_(prod) {}
  ProductAction operator()(const ProductState& ps) const {
    const auto actions = prod_.available_actions(ps);
    std::size_t best = 0;
    for (std::size_t i = 1; i < actions.size(); ++i) {
      double v = qt_.get(ps, actions[i]), b = qt_.get(ps, actions[best]);
      if (v > b || (v == b && actions[i] < actions[best])) best = i;
    }
    return actions[best];
  }

 private:
  const QTable& qt_;
  const Product& prod_;
};

struct TrainResult {
  QTable q;
  BeliefKernel belief;
  std::vector<EpisodeStats> episodes;
  std::optional<std::size_t> converged_at;  // one-based episode closing the window
  bool converged() const { return converged_at.has_value(); }
};

// Repeats episodes until the budget is spent or max |delta Q| stays below
// conv_tol for conv_window consecutive episodes.  With conv_requires_reward an
// episode counts only if it also collected reward, so wandering through
// untouched zero-valued states is not mistaken for convergence.  Without
// convergence the table reached at the end of the budget is returned and
// converged_at is empty.
inline TrainResult train(const Product& prod, const TrainConfig& cfg, BeliefKernel::Prior prior = {}) {
  cfg.validate();
  TrainResult result{QTable(cfg.q_init), BeliefKernel(std::move(prior)), {}, std::nullopt};
  Rng rng(cfg.seed);
  std::size_t quiet = 0;
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    EpisodeStats stats = run_episode(prod, result.q, result.belief, cfg, rng, e);
    const bool counts = !cfg.conv_requires_reward || stats.reward > 0.0;
    quiet = (counts && stats.max_delta_q < cfg.conv_tol) ? quiet + 1 : 0;
    result.episodes.push_back(stats);
    if (!result.converged_at && quiet >= cfg.conv_window) {
      result.converged_at = e + 1;
      if (cfg.stop_on_convergence) break;
    }
  }
  return result;
}

struct SatisfactionEstimate {
  double probability = 0.0;
  double half_width = 0.0;  // 95% normal-approximation interval
  std::size_t successes = 0;
  std::size_t rollouts = 0;
};

// Monte-Carlo estimate of the finite-witness satisfaction rate: a rollout
// succeeds when it visits an owed accepting set before entering a sink,
// within it_threshold steps.
inline SatisfactionEstimate evaluate_policy(const Product& prod,
                                            const std::function<ProductAction(const ProductState&)>& policy,
                                            std::size_t rollouts, std::size_t it_threshold, Rng& rng) {
  SatisfactionEstimate est;
  est.rollouts = rollouts;
  for (std::size_t r = 0; r < rollouts; ++r) {
    ProductState ps = prod.initial();
    Frontier frontier = initial_frontier(prod.ldba());
    for (std::size_t t = 0; t < it_threshold && !prod.in_sink(ps); ++t) {
      ProductState next = prod.step(ps, policy(ps), rng);
      auto up = accepting_frontier(next.q, frontier, prod.ldba());
      frontier = up.frontier;
      ps = next;
      if (up.accepting_hit && !prod.in_sink(ps)) {
        ++est.successes;
        break;
      }
    }
  }
  if (rollouts > 0) {
    est.probability = static_cast<double>(est.successes) / static_cast<double>(rollouts);
    est.half_width = 1.96 * std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(rollouts));
  }
  return est;
}

}  // namespace crl
