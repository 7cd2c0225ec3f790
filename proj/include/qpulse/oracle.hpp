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

// Independent reference solutions: the single-excitation amplitude equations
// of the cascade and a time-domain form of the cavity reflection filter.
// Neither path shares integration or Fourier machinery with the main solver.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "qpulse/errors.hpp"
#include "qpulse/hilbert.hpp"
#include "qpulse/pulses.hpp"

namespace qpulse {

/// Amplitudes of one shared excitation in (u, s, v) plus the probability lost
/// through the output line and the scatterer's own loss.
struct AmplitudeState {
  double t = 0.0;
  cplx psi_u = 0.0;
  cplx psi_s = 0.0;
  cplx psi_v = 0.0;
  double loss = 0.0;

  double norm() const { return std::norm(psi_u) + std::norm(psi_s) + std::norm(psi_v); }
};

/// Scatterer seen by a single excitation: a resonance at `detuning` coupled at
/// rate `gamma` to the line and at `loss_rate` to elsewhere. Both the empty
/// cavity and the two-level atom reduce to this in the one-excitation sector.
struct SingleExcitationSystem {
  double gamma = 1.0;
  double detuning = 0.0;
  double loss_rate = 0.0;
};

/// Integrates
///   psi_u' = -|g_u|^2/2 psi_u
///   psi_s' = -(i Delta + (gamma + kappa)/2) psi_s - sqrt(gamma) g_u psi_u
///   psi_v' = -|g_v|^2/2 psi_v - sqrt(gamma) g_v* psi_s - g_u g_v* psi_u
///   loss'  = |sqrt(gamma) psi_s + g_u psi_u + g_v psi_v|^2 + kappa |psi_s|^2
/// with classical RK4 at dt / substeps, taking g(t) from the schedules.
/// Returns one state per grid point.
inline std::vector<AmplitudeState> single_excitation_evolve(const CouplingSchedule& gu, const CouplingSchedule& gv,
                                                            const SingleExcitationSystem& sys,
                                                            std::array<cplx, 3> psi0, int substeps = 4) {
  if (!(gu.grid() == gv.grid())) throw InvalidArgument("oracle: g_u and g_v must share one grid");
  if (substeps < 1) throw InvalidArgument("oracle: substeps must be >= 1");
  if (sys.gamma < 0.0 || sys.loss_rate < 0.0) throw InvalidArgument("oracle: rates must be non-negative");
  const double n0 = std::norm(psi0[0]) + std::norm(psi0[1]) + std::norm(psi0[2]);
  if (std::abs(n0 - 1.0) > 1e-10) throw InvalidArgument("oracle: initial amplitudes must be normalized");

  const auto& grid = gu.grid();
  const double dt = grid.dt();
  const double sg = std::sqrt(sys.gamma);
  const cplx decay_s = -(kI * sys.detuning + 0.5 * (sys.gamma + sys.loss_rate));

  using Y = std::array<cplx, 4>;  // psi_u, psi_s, psi_v, loss (real part)
  auto f = [&](double t, const Y& y) {
    const double tc = std::min(t, grid.t1());
    const cplx a = gu.at(tc);
    const cplx b = gv.at(tc);
    const cplx out = sg * y[1] + a * y[0] + b * y[2];
    return Y{-0.5 * std::norm(a) * y[0], decay_s * y[1] - sg * a * y[0],
             -0.5 * std::norm(b) * y[2] - sg * std::conj(b) * y[1] - a * std::conj(b) * y[0],
             std::norm(out) + sys.loss_rate * std::norm(y[1])};
  };
  auto axpy = [](const Y& y, double h, const Y& k) {
    Y r;
    for (int i = 0; i < 4; ++i) r[i] = y[i] + h * k[i];
    return r;
  };

  std::vector<AmplitudeState> out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  Y y{psi0[0], psi0[1], psi0[2], 0.0};
  out.push_back({grid.t0(), y[0], y[1], y[2], 0.0});
  const double h = dt / substeps;
  for (int j = 0; j + 1 < grid.size(); ++j) {
    for (int s = 0; s < substeps; ++s) {
      const double t = grid.time(j) + s * h;
      const Y k1 = f(t, y);
      const Y k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
      const Y k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
      const Y k4 = f(t + h, axpy(y, h, k3));
      for (int i = 0; i < 4; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out.push_back({grid.time(j + 1), y[0], y[1], y[2], y[3].real()});
  }
  return out;
}

/// Same, starting from a Fock configuration (n_u, n_s, n_v) that must hold
/// exactly one excitation.
inline std::vector<AmplitudeState> single_excitation_evolve(const CouplingSchedule& gu, const CouplingSchedule& gv,
                                                            const SingleExcitationSystem& sys,
                                                            std::array<int, 3> counts, int substeps = 4) {
  if (counts[0] < 0 || counts[1] < 0 || counts[2] < 0 || counts[0] + counts[1] + counts[2] != 1) {
    throw InvalidArgument("oracle: the initial state must hold exactly one excitation");
  }
  return single_excitation_evolve(gu, gv, sys,
                                  std::array<cplx, 3>{double(counts[0]), double(counts[1]), double(counts[2])},
                                  substeps);
}

/// v(t) = u(t) - gamma int_{t0}^t exp(-(gamma/2 + i Delta)(t - s)) u(s) ds,
/// integrated exactly for piecewise-linear u. Not renormalized.
inline std::vector<cplx> closed_form_reflection_samples(const ModeFunction& u, double gamma, double delta) {
  if (gamma < 0.0) throw InvalidArgument("closed_form_reflection: gamma must be non-negative");
  const auto& s = u.samples();
  const double h = u.grid().dt();
  const cplx k = 0.5 * gamma + kI * delta;
  cplx decay = 1.0, a = h, b = 0.5 * h * h;
  if (std::abs(k * h) > 1e-8) {
    decay = std::exp(-k * h);
    a = (1.0 - decay) / k;
    b = h / k - (1.0 - decay) / (k * k);
  }
  std::vector<cplx> v(s.size());
  cplx psi = 0.0;
  v[0] = s[0];
  for (std::size_t j = 0; j + 1 < s.size(); ++j) {
    psi = decay * psi + s[j] * a + (s[j + 1] - s[j]) * b / h;
    v[j + 1] = s[j + 1] - gamma * psi;
  }
  return v;
}

inline ModeFunction closed_form_reflection(const ModeFunction& u, double gamma, double delta) {
  return ModeFunction(u.grid(), closed_form_reflection_samples(u, gamma, delta));
}

}  // namespace qpulse
