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

#include <algorithm>
#include <array>
#include <cmath>

#include "qpulse/evolve.hpp"
#include "qpulse/oracle.hpp"

using namespace qpulse;
using Counts = std::array<int, 3>;

namespace {

double l2_distance(const std::vector<cplx>& a, const std::vector<cplx>& b, double dt) {
  std::vector<double> d(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) d[j] = std::norm(a[j] - b[j]);
  return std::sqrt(trapezoid(d, dt));
}

}  // namespace

TEST(Oracle, ReleaseFollowsTheCumulativeNorm) {
  const TimeGrid g(0.0, 8.0, 801);
  const auto u = make_mode(Gaussian{4.0, 0.8}, g);
  const auto states = single_excitation_evolve(gu_from_mode(u), CouplingSchedule::zero(g), {0.0, 0.0, 0.0}, Counts{1, 0, 0});
  ASSERT_EQ(states.size(), 801u);
  for (std::size_t j = 0; j < states.size(); j += 50) {
    EXPECT_NEAR(states[j].loss, u.cumulative()[j], 1e-4) << "t = " << states[j].t;
    EXPECT_NEAR(std::norm(states[j].psi_u), 1.0 - u.cumulative()[j], 1e-4);
  }
}

TEST(Oracle, ScattererDecaysExponentially) {
  const TimeGrid g(0.0, 4.0, 401);
  const auto states =
      single_excitation_evolve(CouplingSchedule::zero(g), CouplingSchedule::zero(g), {1.5, 0.3, 0.0}, Counts{0, 1, 0});
  for (const auto& s : states) EXPECT_NEAR(std::norm(s.psi_s), std::exp(-1.5 * s.t), 1e-9);
}

TEST(Oracle, NormPlusLossIsConserved) {
  const TimeGrid g(0.0, 14.0, 1401);
  const auto u = make_mode(Gaussian{3.5, 0.5}, g);
  const auto v = reflect_mode(u, 1.0, 0.4);
  const auto states = single_excitation_evolve(gu_from_mode(u), gv_from_mode(v), {1.0, 0.4, 0.2}, Counts{1, 0, 0});
  for (const auto& s : states) EXPECT_NEAR(s.norm() + s.loss, 1.0, 1e-8) << "t = " << s.t;
}

TEST(Oracle, RejectsMultipleExcitations) {
  const TimeGrid g(0.0, 1.0, 11);
  const auto z = CouplingSchedule::zero(g);
  EXPECT_THROW(single_excitation_evolve(z, z, {}, Counts{1, 1, 0}), InvalidArgument);
  EXPECT_THROW(single_excitation_evolve(z, z, {}, Counts{0, 0, 0}), InvalidArgument);
  EXPECT_THROW(single_excitation_evolve(z, z, {}, std::array<cplx, 3>{1.0, 1.0, 0.0}), InvalidArgument);
}

TEST(Oracle, ReleaseThenCaptureIsLossless) {
  const TimeGrid g(0.0, 10.0, 1001);
  const auto u = make_mode(Gaussian{5.0, 1.0}, g);
  const auto states = single_excitation_evolve(gu_from_mode(u), gv_from_mode(u), {0.0, 0.0, 0.0}, Counts{1, 0, 0});
  EXPECT_GE(std::norm(states.back().psi_v), 1.0 - 1e-4);
}

TEST(Oracle, ClosedFormReflectionMatchesSpectralFilter) {
  const TimeGrid g(0.0, 14.0, 2801);
  const auto u = make_mode(Gaussian{3.5, 0.5}, g);
  for (double delta : {0.0, 0.8, -1.3}) {
    const auto a = closed_form_reflection_samples(u, 1.0, delta);
    const auto b = reflect_samples(u, 1.0, delta);
    EXPECT_LE(l2_distance(a, b, g.dt()), 1e-5) << "delta = " << delta;
  }
}

TEST(Oracle, BroadCavityReflectsWithSignFlip) {
  const TimeGrid g(0.0, 4.0, 8001);
  const auto u = make_mode(Gaussian{2.0, 0.3}, g);
  const auto v = closed_form_reflection(u, 200.0, 0.0);
  EXPECT_GT((-overlap(u, v)).real(), 0.999);
  const auto flat = make_mode(Flat{2.0, 1.0}, g);
  EXPECT_GT((-overlap(flat, closed_form_reflection(flat, 200.0, 0.0))).real(), 0.99);
}

TEST(Oracle, MasterEquationAgreesInTheOneExcitationSector) {
  const TimeGrid g(0.0, 14.0, 1401);
  const double gamma = 1.2, delta = 0.3;
  const auto u = make_mode(Gaussian{3.5, 0.6}, g);
  const auto v = reflect_mode(u, gamma, -delta);
  const auto gu = gu_from_mode(u), gv = gv_from_mode(v);
  PresetParams p;
  p.gamma = gamma;
  p.detuning = delta;
  const CascadeModel m(preset(Preset::empty_cavity, p), 2, 2, gu, gv);
  Vector psi = Vector::Zero(m.dimension());
  psi[static_cast<Eigen::Index>(*m.space()->position(m.layout().index(1, 0, 0)))] = 1.0;
  IntegrationConfig cfg;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  cfg.stride = 10;
  const auto res = integrate(m, DensityMatrix::pure(m.space(), psi), cfg);
  const auto oracle = single_excitation_evolve(gu, gv, {gamma, delta, 0.0}, Counts{1, 0, 0});
  const auto idx = sample_indices(g, cfg.stride);
  const auto nu = res.series.channel("n_u"), nc = res.series.channel("n_c"), nv = res.series.channel("n_v");
  double worst = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = oracle[static_cast<std::size_t>(idx[k])];
    worst = std::max({worst, std::abs(nu[k] - std::norm(s.psi_u)), std::abs(nc[k] - std::norm(s.psi_s)),
                      std::abs(nv[k] - std::norm(s.psi_v))});
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_GE(nv.back(), 0.99);
}
