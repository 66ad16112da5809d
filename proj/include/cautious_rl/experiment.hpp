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

// Experiment configuration, seeded training sweeps and CSV reporting.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "cautious_rl/automata.hpp"
#include "cautious_rl/env.hpp"
#include "cautious_rl/grid_world.hpp"
#include "cautious_rl/learner.hpp"
#include "cautious_rl/ltl.hpp"
#include "cautious_rl/pacman.hpp"
#include "cautious_rl/product.hpp"

namespace crl {

inline constexpr const char* kCsvHeader = "# cautious-rl csv v1";

// Bad or missing configuration values; the message names the key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or unreadable input files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string env_type = "grid";  // grid | pacman
  std::filesystem::path env_file;
  double p_slip = 0.15;
  bool absorbing_targets = true;
  double p_g = 0.5;
  std::string prior = "intended";  // intended | chase | none
  std::filesystem::path automaton_file;
  std::string ltl;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out_dir = "out";
  std::size_t cap = 200000;
  std::size_t rollouts = 1000;
  bool parallel = true;
};

inline std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string(what) + " not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    std::uint64_t v = 0;
    auto [end, err] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (err != std::errc() || end != item.data() + item.size())
      throw ConfigError("run.seeds: not a non-negative integer: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("run.seeds: empty seed list");
  return out;
}

inline bool parse_switch(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected on or off, got '" + v + "'");
}

// Parses the INI text; relative file paths resolve against `base`.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  static const std::map<std::string, std::set<std::string>> kKeys{
      {"env", {"type", "map", "maze", "p_slip", "absorbing_targets", "p_g", "prior"}},
      {"automaton", {"file", "ltl"}},
      {"learning",
       {"gamma", "mu", "mu_decay", "r_p", "q_init", "it_threshold", "episodes", "epsilon", "epsilon_decay",
        "epsilon_min", "conv_tol", "conv_window", "stop_on_convergence", "conv_requires_reward"}},
      {"padding", {"enabled", "r_o", "p_critical", "n_h"}},
      {"run", {"seeds", "out", "cap", "rollouts", "parallel"}},
  };
  for (const auto& [name, sub] : tree) {
    auto section = kKeys.find(name);
    if (section == kKeys.end()) throw ConfigError("config: unknown section [" + name + "]");
    for (const auto& [key, value] : sub)
      if (!section->second.count(key)) throw ConfigError(name + "." + key + ": unknown key");
  }

  auto get = [&]<class T>(const std::string& key, T fallback) -> T {
    auto node = tree.get_optional<std::string>(key);
    if (!node) return fallback;
    std::istringstream ss(*node);
    T v{};
    ss >> v;
    if (ss.fail() || !(ss >> std::ws).eof()) throw ConfigError(key + ": cannot parse '" + *node + "'");
    return v;
  };
  auto str = [&](const std::string& key, const std::string& fallback) {
    return tree.get<std::string>(key, fallback);
  };
  auto path = [&](const std::string& key) -> std::filesystem::path {
    auto v = tree.get_optional<std::string>(key);
    if (!v || v->empty()) throw ConfigError(key + ": missing");
    std::filesystem::path p(*v);
    return p.is_absolute() ? p : base / p;
  };

  ExperimentConfig c;
  c.env_type = str("env.type", c.env_type);
  if (c.env_type != "grid" && c.env_type != "pacman")
    throw ConfigError("env.type: expected grid or pacman, got '" + c.env_type + "'");
  c.env_file = path(c.env_type == "grid" ? "env.map" : "env.maze");
  c.p_slip = get("env.p_slip", c.p_slip);
  if (!(c.p_slip >= 0.0 && c.p_slip <= 1.0)) throw ConfigError("env.p_slip: must lie in [0, 1]");
  c.absorbing_targets = parse_switch("env.absorbing_targets", str("env.absorbing_targets", "on"));
  c.p_g = get("env.p_g", c.p_g);
  if (!(c.p_g >= 0.0 && c.p_g <= 1.0)) throw ConfigError("env.p_g: must lie in [0, 1]");
  c.prior = str("env.prior", c.env_type == "grid" ? "intended" : "chase");
  if (c.prior != "none" && c.prior != (c.env_type == "grid" ? "intended" : "chase"))
    throw ConfigError("env.prior: '" + c.prior + "' is not available for " + c.env_type);

  c.automaton_file = path("automaton.file");
  c.ltl = str("automaton.ltl", "");

  TrainConfig& t = c.train;
  t.gamma = get("learning.gamma", t.gamma);
  t.mu = get("learning.mu", t.mu);
  t.mu_decay = get("learning.mu_decay", t.mu_decay);
  t.r_p = get("learning.r_p", t.r_p);
  t.q_init = get("learning.q_init", t.q_init);
  t.it_threshold = get("learning.it_threshold", t.it_threshold);
  t.episodes = get("learning.episodes", t.episodes);
  t.epsilon = get("learning.epsilon", t.epsilon);
  t.epsilon_decay = get("learning.epsilon_decay", t.epsilon_decay);
  t.epsilon_min = get("learning.epsilon_min", t.epsilon_min);
  t.conv_tol = get("learning.conv_tol", t.conv_tol);
  t.conv_window = get("learning.conv_window", t.conv_window);
  t.stop_on_convergence = parse_switch("learning.stop_on_convergence",
                                       str("learning.stop_on_convergence", t.stop_on_convergence ? "on" : "off"));

  t.conv_requires_reward = parse_switch("learning.conv_requires_reward",
                                        str("learning.conv_requires_reward", t.conv_requires_reward ? "on" : "off"));
  t.padding.enabled = parse_switch("padding.enabled", str("padding.enabled", "on"));
  t.padding.radius = get("padding.r_o", t.padding.radius);
  t.padding.p_critical = get("padding.p_critical", t.padding.p_critical);
  t.padding.horizon_step = get("padding.n_h", t.padding.horizon_step);

  if (auto s = tree.get_optional<std::string>("run.seeds")) c.seeds = parse_seed_list(*s);
  if (auto o = tree.get_optional<std::string>("run.out")) {
    std::filesystem::path p(*o);
    c.out_dir = p.is_absolute() ? p : base / p;
  } else {
    c.out_dir = base / "out";
  }
  c.cap = get("run.cap", c.cap);
  c.rollouts = get("run.rollouts", c.rollouts);
  c.parallel = parse_switch("run.parallel", str("run.parallel", "on"));

  try {
    t.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  return parse_config(read_file(file, "config file"), file.parent_path());
}

// Environment, automaton and belief prior built from a config.
struct Instance {
  std::unique_ptr<Environment> env;
  const KernelModel* model = nullptr;
  Ldba ldba;
  BeliefKernel::Prior prior;

  Product product() const { return Product(*env, ldba); }
};

inline Instance load_instance(const ExperimentConfig& c) {
  Instance inst;
  if (c.env_type == "grid") {
    auto grid =
        std::make_unique<GridWorld>(load_grid(read_file(c.env_file, "map file"), c.p_slip, c.absorbing_targets));
    if (c.prior == "intended") {
      const GridWorld* g = grid.get();
      inst.prior = [g](StateId s, ActionId a) { return std::vector<Transition>{{g->intended(s, a), 1.0}}; };
    }
    inst.model = grid.get();
    inst.env = std::move(grid);
  } else {
    auto maze = std::make_unique<PacmanWorld>(load_maze(read_file(c.env_file, "maze file"), c.p_g));
    if (c.prior == "chase") {
      const PacmanWorld* m = maze.get();
      inst.prior = [m](StateId s, ActionId a) { return m->chase_prior(s, a); };
    }
    inst.model = maze.get();
    inst.env = std::move(maze);
  }
  inst.ldba = load_ldba(read_file(c.automaton_file, "automaton file"));

  LabelMap labels(inst.env->propositions(), inst.ldba.propositions());
  if (!labels.missing().empty())
    throw ConfigError("automaton.file: proposition '" + labels.missing().front() +
                      "' is not produced by the environment");
  if (!c.ltl.empty()) {
    std::set<std::string> atoms;
    try {
      atoms = ltl::atoms(ltl::parse(c.ltl));
    } catch (const ltl::SyntaxError& e) {
      throw ConfigError(std::string("automaton.ltl: ") + e.what());
    }
    const auto& ap = inst.ldba.propositions();
    for (const auto& a : atoms)
      if (std::find(ap.begin(), ap.end(), a) == ap.end())
        throw ConfigError("automaton.ltl: atom '" + a + "' is not an automaton proposition");
  }
  return inst;
}

struct SeedRun {
  std::uint64_t seed = 0;
  bool padding = true;
  TrainResult result;
};

struct RunSummary {
  std::size_t episodes = 0;
  std::size_t fails = 0;
  std::size_t successes = 0;
  std::size_t unsafe_entries = 0;
  std::size_t forced_choices = 0;
  std::size_t episodes_to_convergence = 0;  // budget spent when not converged
  bool converged = false;

  double fail_rate() const { return episodes ? double(fails) / double(episodes) : 0.0; }
  double success_rate() const { return episodes ? double(successes) / double(episodes) : 0.0; }
};

inline RunSummary summarize(const TrainResult& r) {
  RunSummary s;
  s.episodes = r.episodes.size();
  for (const auto& e : r.episodes) {
    s.fails += e.cause == Termination::Sink;
    s.successes += e.success;
    s.unsafe_entries += e.unsafe_entries;
    s.forced_choices += e.forced_choices;
  }
  s.converged = r.converged();
  s.episodes_to_convergence = r.converged_at.value_or(r.episodes.size());
  return s;
}

// One training run per seed; seeds run concurrently when `parallel` is set,
// results come back in seed order.
inline std::vector<SeedRun> run_seeds(const Instance& inst, const ExperimentConfig& c, bool padding) {
  const Product prod = inst.product();
  auto one = [&](std::uint64_t seed) {
    TrainConfig t = c.train;
    t.seed = seed;
    t.padding.enabled = padding;
    return SeedRun{seed, padding, train(prod, t, inst.prior)};
  };
  std::vector<SeedRun> out;
  if (!c.parallel) {
    for (auto seed : c.seeds) out.push_back(one(seed));
    return out;
  }
  std::vector<std::future<SeedRun>> jobs;
  for (auto seed : c.seeds) jobs.push_back(std::async(std::launch::async, one, seed));
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// CSV writers.  Numbers use a fixed format so reruns are byte-identical.

inline std::string fmt(double v, int digits = 6) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

inline void write_episodes_csv(std::ostream& os, const std::vector<EpisodeStats>& eps) {
  os << kCsvHeader << '\n'
     << "episode,steps,cause,unsafe_entries,frontier_resets,reward,forced_choices,success,max_delta_q\n";
  for (const auto& e : eps)
    os << e.episode << ',' << e.steps << ',' << termination_name(e.cause) << ',' << e.unsafe_entries << ','
       << e.frontier_resets << ',' << fmt(e.reward) << ',' << e.forced_choices << ',' << int(e.success) << ','
       << fmt(e.max_delta_q, 9) << '\n';
}

// v(s) for every state (heat map data).
inline void write_visits_csv(std::ostream& os, const Environment& env, const BeliefKernel& belief) {
  os << kCsvHeader << '\n' << "state,name,visits\n";
  for (const auto& [s, n] : belief.executions()) os << s << ',' << '"' << env.state_name(s) << '"' << ',' << n << '\n';
}

inline void write_qtable_csv(std::ostream& os, const Product& prod, const QTable& qt) {
  os << kCsvHeader << '\n' << "s,q,action,value\n";
  for (const auto& e : qt.entries())
    os << e.ps.s << ',' << prod.ldba().state_name(e.ps.q) << ',' << prod.action_name(e.pa) << ','
       << fmt(e.value, 9) << '\n';
}

inline void write_policy_csv(std::ostream& os, const Product& prod, const QTable& qt) {
  os << kCsvHeader << '\n' << "s,q,action\n";
  GreedyPolicy pi(qt, prod);
  std::optional<ProductState> last;
  for (const auto& e : qt.entries()) {
    if (last && *last == e.ps) continue;
    last = e.ps;
    os << e.ps.s << ',' << prod.ldba().state_name(e.ps.q) << ',' << prod.action_name(pi(e.ps)) << '\n';
  }
}

inline void write_belief_csv(std::ostream& os, const BeliefKernel& b) {
  os << kCsvHeader << '\n' << "s,a,next,psi,Psi\n";
  for (const auto& e : b.entries())
    os << e.s << ',' << e.a << ',' << e.next << ',' << e.count << ',' << e.total << '\n';
}

inline void write_summary_header(std::ostream& os) {
  os << kCsvHeader << '\n'
     << "seed,padding,episodes,fail_rate,success_rate,converged,episodes_to_convergence,unsafe_entries,"
        "forced_choices\n";
}

inline void write_summary_row(std::ostream& os, const SeedRun& run) {
  RunSummary s = summarize(run.result);
  os << run.seed << ',' << (run.padding ? "on" : "off") << ',' << s.episodes << ',' << fmt(s.fail_rate()) << ','
     << fmt(s.success_rate()) << ',' << int(s.converged) << ',' << s.episodes_to_convergence << ','
     << s.unsafe_entries << ',' << s.forced_choices << '\n';
}

// Writes through a temporary file and renames, so readers never see a
// partial file.
template <class Writer>
void write_atomically(const std::filesystem::path& path, Writer&& w) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + tmp.string());
    w(os);
  }
  std::filesystem::rename(tmp, path);
}

inline void write_seed_outputs(const std::filesystem::path& dir, const Instance& inst, const SeedRun& run) {
  const Product prod = inst.product();
  write_atomically(dir / "episodes.csv", [&](std::ostream& os) { write_episodes_csv(os, run.result.episodes); });
  write_atomically(dir / "visits.csv", [&](std::ostream& os) { write_visits_csv(os, *inst.env, run.result.belief); });
  write_atomically(dir / "qtable.csv", [&](std::ostream& os) { write_qtable_csv(os, prod, run.result.q); });
  write_atomically(dir / "policy.csv", [&](std::ostream& os) { write_policy_csv(os, prod, run.result.q); });
  write_atomically(dir / "belief.csv", [&](std::ostream& os) { write_belief_csv(os, run.result.belief); });
}

struct ComparisonRow {
  bool padding = true;
  std::size_t seeds = 0;
  RunSummary total;
  double median_convergence = 0.0;
};

inline ComparisonRow aggregate(const std::vector<SeedRun>& runs, bool padding) {
  ComparisonRow row;
  row.padding = padding;
  row.seeds = runs.size();
  std::vector<double> conv;
  for (const auto& r : runs) {
    RunSummary s = summarize(r.result);
    row.total.episodes += s.episodes;
    row.total.fails += s.fails;
    row.total.successes += s.successes;
    row.total.unsafe_entries += s.unsafe_entries;
    row.total.forced_choices += s.forced_choices;
    conv.push_back(static_cast<double>(s.episodes_to_convergence));
  }
  row.median_convergence = median(conv);
  return row;
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << kCsvHeader << '\n'
     << "padding,seeds,episodes,fail_rate,success_rate,median_episodes_to_convergence,unsafe_entries\n";
  for (const auto& r : rows) {
    if (r.total.episodes == 0) continue;
    os << (r.padding ? "on" : "off") << ',' << r.seeds << ',' << r.total.episodes << ','
       << fmt(r.total.fail_rate()) << ',' << fmt(r.total.success_rate()) << ',' << fmt(r.median_convergence, 1)
       << ',' << r.total.unsafe_entries << '\n';
  }
}

// Cumulative unsafe entries per episode for matched seeds.
inline void write_cumulative_csv(std::ostream& os, const std::vector<SeedRun>& on, const std::vector<SeedRun>& off) {
  os << kCsvHeader << '\n' << "seed,episode,cumulative_unsafe_on,cumulative_unsafe_off\n";
  for (std::size_t i = 0; i < on.size() && i < off.size(); ++i) {
    const auto& a = on[i].result.episodes;
    const auto& b = off[i].result.episodes;
    std::size_t ca = 0, cb = 0;
    for (std::size_t e = 0; e < std::max(a.size(), b.size()); ++e) {
      if (e < a.size()) ca += a[e].unsafe_entries;
      if (e < b.size()) cb += b[e].unsafe_entries;
      os << on[i].seed << ',' << e + 1 << ',' << ca << ',' << cb << '\n';
    }
  }
}

}  // namespace crl
