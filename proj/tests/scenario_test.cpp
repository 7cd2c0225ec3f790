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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "qpulse/io.hpp"
#include "qpulse/scenario.hpp"

using namespace qpulse;
namespace fs = std::filesystem;

namespace {

fs::path scenario(const std::string& name) { return fs::path(QPULSE_SCENARIO_DIR) / name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "qpulse_scenario_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Scenario, EmptyCavityCapturesThePhoton) {
  const auto cfg = load_config(scenario("empty_cavity.cfg").string());
  const auto r = run_scenario(cfg);
  EXPECT_GE(r.integration.series.final("n_v"), 0.99);
  EXPECT_GE(r.integration.series.final("P_v1"), 0.99);
  EXPECT_LE(r.integration.series.final("lost_output"), 1e-2);
  EXPECT_NE(r.summary().find("empty_cavity: dim="), std::string::npos);
}

TEST(Scenario, RunsAreDeterministic) {
  const auto cfg = load_config(scenario("empty_cavity.cfg").string());
  const auto a = scratch("det_a"), b = scratch("det_b");
  write_run(run_scenario(cfg), a);
  write_run(run_scenario(cfg), b);
  for (const char* f : {"timeseries.csv", "rho_final.bin", "mode_u.txt", "mode_v.txt", "summary.txt"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Scenario, CheckpointRoundTripKeepsTheRestrictedBasis) {
  auto cfg = load_config(scenario("stimulated_emission.cfg").string());
  const auto r = run_scenario(cfg);
  std::stringstream buf;
  write_checkpoint(buf, r.integration.final_state);
  const auto back = read_checkpoint(buf);
  EXPECT_EQ(back.space().dims(), r.integration.final_state.space().dims());
  EXPECT_EQ(back.dimension(), r.integration.final_state.dimension());
  EXPECT_EQ(back.matrix(), r.integration.final_state.matrix());
  for (std::size_t p = 0; p < back.space().dimension(); ++p) {
    EXPECT_EQ(back.space().full_index(p), r.integration.final_state.space().full_index(p));
  }
  std::stringstream junk("NOTQPULSE");
  EXPECT_THROW(read_checkpoint(junk), Error);
}

TEST(Scenario, ModeFilesRoundTrip) {
  const TimeGrid g(0.0, 6.0, 601);
  const auto u = make_mode(Gaussian{3.0, 0.4}, g);
  const auto dir = scratch("mode_file");
  {
    std::ofstream f(dir / "u.txt");
    write_mode(f, u);
  }
  const auto back = make_mode(read_mode_file((dir / "u.txt").string()), g);
  for (int j = 0; j < g.size(); ++j) EXPECT_NEAR(std::abs(back[j] - u[j]), 0.0, 1e-14);
}

TEST(Scenario, InitialStateRejectsACapThatCutsTheInput) {
  std::istringstream in(R"([system]
preset = empty_cavity
gamma = 1 gamma
[input]
shape = gaussian
center = 3 /gamma
width = 0.5 /gamma
state = coherent 0.5
[grid]
t0 = 0 /gamma
t1 = 8 /gamma
samples = 801
)");
  const auto cfg = parse_config(in);
  const auto spec = preset(cfg.preset, cfg.params);
  const auto u = make_mode(cfg.input_shape, cfg.grid());
  const CascadeModel capped(spec, cfg.input_truncation + 1, 2, gu_from_mode(u), gv_from_mode(u), 1);
  EXPECT_THROW(initial_state(capped, input_vector(cfg), spec.initial), InvalidArgument);
  const CascadeModel full(spec, cfg.input_truncation + 1, 2, gu_from_mode(u), gv_from_mode(u), cfg.excitation_cap);
  EXPECT_NEAR(initial_state(full, input_vector(cfg), spec.initial).trace(), 1.0, 1e-12);
}

TEST(Scenario, DetunedCavityIsCapturedWithTheReflectedMode) {
  std::istringstream in(R"([system]
preset = empty_cavity
gamma = 1 gamma
detuning = 0.8 gamma
[input]
shape = gaussian
center = 3.5 /gamma
width = 0.5 /gamma
state = fock 1
[grid]
t0 = 0 /gamma
t1 = 14 /gamma
samples = 1401
[integrator]
stride = 100
)");
  const auto r = run_scenario(parse_config(in));
  EXPECT_GE(r.integration.series.final("n_v"), 0.99);
}

TEST(Scenario, FindModesOnTheEmptyCavity) {
  const auto cfg = load_config(scenario("empty_cavity.cfg").string());
  const auto modes = find_modes(cfg, 2);
  ASSERT_EQ(modes.modes.size(), 2u);
  EXPECT_NEAR(modes.modes[0].occupation, 1.0, 2e-3);
  EXPECT_LT(modes.modes[1].occupation, 1e-6);
  const auto v = output_mode(cfg, make_mode(cfg.input_shape, cfg.grid()));
  EXPECT_GE(std::norm(overlap(resample(modes.modes[0].mode, cfg.grid()), v)), 0.999);
  const auto dir = scratch("modes");
  write_modes(modes, dir);
  EXPECT_TRUE(fs::exists(dir / "mode_1.txt"));
  EXPECT_TRUE(fs::exists(dir / "mode_2.txt"));
  EXPECT_EQ(slurp(dir / "occupations.csv").rfind("index,occupation\n1,", 0), 0u);
}
