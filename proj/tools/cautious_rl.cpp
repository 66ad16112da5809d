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

// Command-line front end: train, compare, oracle, validate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cautious_rl/experiment.hpp"
#include "cautious_rl/oracle.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kCap = 3 };

struct Overrides {
  std::string config;
  std::string seeds;
  std::string padding;
  std::string out;
  std::optional<std::size_t> episodes;
  bool dump = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (INI)")->required();
  cmd->add_option("--seed", o.seeds, "comma-separated seed list");
  cmd->add_option("--padding", o.padding, "safe padding on|off")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--episodes", o.episodes, "episode budget per seed");
}

crl::ExperimentConfig resolve(const Overrides& o) {
  crl::ExperimentConfig c = crl::load_config(o.config);
  if (!o.seeds.empty()) c.seeds = crl::parse_seed_list(o.seeds);
  if (!o.padding.empty()) c.train.padding.enabled = o.padding == "on";
  if (!o.out.empty()) c.out_dir = o.out;
  if (o.episodes) c.train.episodes = *o.episodes;
  return c;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

int cmd_train(const Overrides& o) {
  auto c = resolve(o);
  auto inst = crl::load_instance(c);
  const bool padding = c.train.padding.enabled;
  auto runs = crl::run_seeds(inst, c, padding);
  for (const auto& r : runs) crl::write_seed_outputs(c.out_dir / ("seed_" + std::to_string(r.seed)), inst, r);
  crl::write_atomically(c.out_dir / "summary.csv", [&](std::ostream& os) {
    crl::write_summary_header(os);
    for (const auto& r : runs) crl::write_summary_row(os, r);
  });
  for (const auto& r : runs) {
    auto s = crl::summarize(r.result);
    std::cout << "seed " << r.seed << " padding " << (padding ? "on" : "off") << ": " << s.episodes
              << " episodes, fail " << percent(s.fail_rate()) << ", success " << percent(s.success_rate());
    if (s.converged) std::cout << ", converged after " << s.episodes_to_convergence;
    else std::cout << ", not converged";
    std::cout << '\n';
  }
  return kOk;
}

int cmd_compare(const Overrides& o) {
  auto c = resolve(o);
  auto inst = crl::load_instance(c);
  auto on = crl::run_seeds(inst, c, true);
  auto off = crl::run_seeds(inst, c, false);
  for (const auto& r : on) crl::write_seed_outputs(c.out_dir / "on" / ("seed_" + std::to_string(r.seed)), inst, r);
  for (const auto& r : off) crl::write_seed_outputs(c.out_dir / "off" / ("seed_" + std::to_string(r.seed)), inst, r);
  std::vector<crl::ComparisonRow> rows{crl::aggregate(on, true), crl::aggregate(off, false)};
  crl::write_atomically(c.out_dir / "summary.csv", [&](std::ostream& os) {
    crl::write_summary_header(os);
    for (const auto& r : on) crl::write_summary_row(os, r);
    for (const auto& r : off) crl::write_summary_row(os, r);
  });
  crl::write_atomically(c.out_dir / "comparison.csv", [&](std::ostream& os) { crl::write_comparison_csv(os, rows); });
  crl::write_atomically(c.out_dir / "cumulative_unsafe.csv",
                        [&](std::ostream& os) { crl::write_cumulative_csv(os, on, off); });

  std::cout << "padding  fail rate  success rate  median episodes to convergence\n";
  for (const auto& r : rows) {
    if (r.total.episodes == 0) continue;
    std::printf("%-8s %9s %13s %31.1f\n", r.padding ? "on" : "off", percent(r.total.fail_rate()).c_str(),
                percent(r.total.success_rate()).c_str(), r.median_convergence);
  }
  return kOk;
}

int cmd_oracle(const Overrides& o) {
  auto c = resolve(o);
  auto inst = crl::load_instance(c);
  const crl::Product prod = inst.product();
  auto ep = crl::materialize_product(prod, *inst.model, c.cap);
  auto sat = crl::max_sat_probability(ep);
  std::printf("product states: %zu\n", ep.size());
  std::printf("max satisfaction probability at s0: %.6f\n", sat.value[0]);
  if (sat.certified) std::printf("bounds: [%.6f, %.6f]\n", sat.lower[0], sat.upper[0]);
  else std::printf("bounds: lower bound only, the upper bound did not close\n");
  if (o.dump)
    crl::write_atomically(c.out_dir / "product.csv", [&](std::ostream& os) { crl::write_product_csv(os, ep, prod); });
  return kOk;
}

int cmd_validate(const Overrides& o) {
  auto c = resolve(o);
  auto inst = crl::load_instance(c);
  const auto& a = inst.ldba;
  std::cout << "config ok: " << inst.env->num_states() << " environment states, " << a.num_states()
            << " automaton states, " << a.num_accepting_sets() << " accepting set(s), " << a.sink_states().size()
            << " sink state(s)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cautious reinforcement learning with LTL tasks and safe padding"};
  app.require_subcommand(1);
  Overrides train_o, compare_o, oracle_o, validate_o;
  auto* train = app.add_subcommand("train", "train one agent per seed");
  add_common(train, train_o);
  auto* compare = app.add_subcommand("compare", "matched-seed runs with padding on and off");
  add_common(compare, compare_o);
  auto* oracle = app.add_subcommand("oracle", "exact maximal satisfaction probability");
  add_common(oracle, oracle_o);
  oracle->add_flag("--dump", oracle_o.dump, "write the explicit product to product.csv");
  auto* validate = app.add_subcommand("validate", "check config, files and automaton");
  add_common(validate, validate_o);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_o);
    if (*compare) return cmd_compare(compare_o);
    if (*oracle) return cmd_oracle(oracle_o);
    return cmd_validate(validate_o);
  } catch (const crl::CapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCap;
  } catch (const crl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const crl::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const crl::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const crl::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
