// Copyright 2026 The qpulse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qpulse/qpulse.hpp"

namespace {

int cmd_run(const std::string& config, const std::string& out) {
  const auto cfg = qpulse::load_config(config);
  const auto result = qpulse::run_scenario(cfg);
  const std::filesystem::path dir = out.empty() ? std::filesystem::path("out") / cfg.name : std::filesystem::path(out);
  qpulse::write_run(result, dir);
  std::cout << result.summary() << '\n';
  if (result.wigner && result.wigner->boundary_warning) {
    std::cerr << "warning: Wigner function does not decay at the grid boundary; increase wigner_range\n";
  }
  return 0;
}

int cmd_find_modes(const std::string& config, int k, const std::string& out) {
  const auto cfg = qpulse::load_config(config);
  const auto result = qpulse::find_modes(cfg, k);
  const std::filesystem::path dir =
      out.empty() ? std::filesystem::path("out") / (cfg.name + "_modes") : std::filesystem::path(out);
  qpulse::write_modes(result, dir);
  double total = 0.0;
  for (std::size_t i = 0; i < result.modes.size(); ++i) {
    std::cout << "n_" << i + 1 << " = " << result.modes[i].occupation << '\n';
    total += result.modes[i].occupation;
  }
  std::cout << "sum of listed n_i = " << total << ", total emitted = " << result.correlation.emitted() << '\n';
  return 0;
}

int cmd_wigner(const std::string& checkpoint, const std::string& mode, double range, int res, const std::string& out) {
  const auto rho = qpulse::read_checkpoint(checkpoint);
  const int nf = static_cast<int>(rho.space().dims().size());
  int factor = 0;
  if (mode == "v") {
    factor = nf - 1;
  } else if (mode == "u") {
    factor = 0;
  } else {
    throw qpulse::InvalidArgument("--mode must be u or v");
  }
  const auto w = qpulse::wigner(qpulse::partial_trace(rho, {factor}), {range, res});
  if (out.empty()) {
    qpulse::write_wigner(std::cout, w);
  } else {
    std::ofstream f(out);
    if (!f) throw qpulse::Error("cannot write " + out);
    qpulse::write_wigner(f, w);
  }
  if (w.boundary_warning) std::cerr << "warning: Wigner function does not decay at the grid boundary; increase --range\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Travelling quantum pulses scattered on a local system, via virtual input and output cavities"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, mode = "v";
  int k = 3, res = 101;
  double range = 4.0;

  auto* run = app.add_subcommand("run", "Integrate a scenario and write its outputs");
  run->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (default out/<name>)");

  auto* fm = app.add_subcommand("find-modes", "Dominant output modes from the emitter autocorrelation");
  fm->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);
  fm->add_option("-k", k, "Number of modes")->check(CLI::PositiveNumber);
  fm->add_option("--out", out, "Output directory (default out/<name>_modes)");

  auto* wg = app.add_subcommand("wigner", "Wigner function of one mode of a saved density matrix");
  wg->add_option("checkpoint", checkpoint, "rho_final.bin from a run")->required()->check(CLI::ExistingFile);
  wg->add_option("--mode", mode, "u or v")->check(CLI::IsMember({"u", "v"}));
  wg->add_option("--range", range, "Half-width of the square x/p grid")->check(CLI::PositiveNumber);
  wg->add_option("--res", res, "Points per axis")->check(CLI::Range(2, 2001));
  wg->add_option("--out", out, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, out);
    if (*fm) return cmd_find_modes(config, k, out);
    if (*wg) return cmd_wigner(checkpoint, mode, range, res, out);
  } catch (const qpulse::ConfigError& e) {
    std::cerr << config << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
