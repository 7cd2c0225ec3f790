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

// Two-time emitter autocorrelation g1(t, t') = <L_s^dag(t) L_s(t')> by the
// quantum regression theorem, and its decomposition into temporal modes
// g1(t, t') = sum_i n_i v_i*(t) v_i(t').

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qpulse/cascade.hpp"
#include "qpulse/errors.hpp"
#include "qpulse/evolve.hpp"
#include "qpulse/hilbert.hpp"
#include "qpulse/pulses.hpp"

namespace qpulse {

/// G(j, k) = g1(t_j, t_k) on `grid` with trapezoidal weights.
struct CorrelationMatrix {
  TimeGrid grid;
  Matrix G;
  std::vector<double> weights;

  /// int g1(t, t) dt, the total emitted photon number.
  double emitted() const {
    double acc = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) acc += weights[j] * G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)).real();
    return acc;
  }
};

inline std::vector<double> trapezoid_weights(const TimeGrid& grid) {
  std::vector<double> w(static_cast<std::size_t>(grid.size()), grid.dt());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

/// Tr(op^dag m) = sum_rc conj(op_rc) m_rc.
inline cplx adjoint_trace(const Operator& op, const Matrix& m) {
  cplx acc = 0.0;
  for (int r = 0; r < op.outerSize(); ++r) {
    for (Operator::InnerIterator it(op, r); it; ++it) acc += std::conj(it.value()) * m(it.row(), it.col());
  }
  return acc;
}

/// `model` must be built without an output cavity (output dimension 1), so that
/// L_0(t) reduces to L_s(t) = g_u(t) a_u + sqrt(gamma) c. Columns are sampled
/// every `stride` grid points.
inline CorrelationMatrix g1_matrix(const CascadeModel& model, const DensityMatrix& rho0, const IntegrationConfig& config,
                                   int stride) {
  if (model.layout().dim(Slot::v) != 1) throw InvalidArgument("g1_matrix: the model must not contain an output cavity");
  if (rho0.dimension() != model.dimension()) throw InvalidDimension("g1_matrix: initial state does not match the model");
  if (stride < 1) throw InvalidArgument("g1_matrix: stride must be >= 1");
  const auto& fine = model.grid();
  if ((fine.size() - 1) % stride != 0) throw InvalidArgument("g1_matrix: stride must divide the number of grid steps");
  const TimeGrid grid = fine.subsampled(stride);
  const int n = grid.size();

  std::vector<Operator> ls(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) ls[static_cast<std::size_t>(j)] = model.lindblad0_at(grid.time(j));

  Matrix g = Matrix::Zero(n, n);
  LindbladPropagator forward(model, config);
  LindbladState y{rho0.matrix(), 0.0, 0.0};
  for (int k = 0; k < n; ++k) {
    if (k > 0) forward.advance(y, grid.time(k - 1), grid.time(k));
    LindbladState sigma{ls[static_cast<std::size_t>(k)] * y.rho, 0.0, 0.0};
    LindbladPropagator column(model, config);
    for (int j = k; j < n; ++j) {
      if (j > k) column.advance(sigma, grid.time(j - 1), grid.time(j));
      const cplx v = adjoint_trace(ls[static_cast<std::size_t>(j)], sigma.rho);
      g(j, k) = v;
      if (j != k) g(k, j) = std::conj(v);
    }
    g(k, k) = g(k, k).real();
  }
  return CorrelationMatrix{grid, std::move(g), trapezoid_weights(grid)};
}

struct DominantMode {
  double occupation;
  ModeFunction mode;
};

/// The k largest eigenpairs of W^{1/2} G W^{1/2}, de-weighted into unit-norm
/// mode functions. Each mode is rotated so its largest-magnitude sample is
/// real and positive; equal eigenvalues are ordered by earliest peak.
inline std::vector<DominantMode> dominant_modes(const CorrelationMatrix& corr, int k) {
  const auto n = corr.G.rows();
  if (k < 1 || k > n) throw InvalidArgument("dominant_modes: k must lie in [1, grid size]");
  Eigen::VectorXd sw(n);
  for (Eigen::Index j = 0; j < n; ++j) sw[j] = std::sqrt(corr.weights[static_cast<std::size_t>(j)]);
  Matrix kernel = sw.asDiagonal() * corr.G * sw.asDiagonal();
  kernel = symmetrized(kernel);
  Eigen::SelfAdjointEigenSolver<Matrix> es(kernel);
  if (es.info() != Eigen::Success) throw NumericalFailure("dominant_modes: eigendecomposition failed");

  struct Candidate {
    double value;
    Eigen::Index peak;
    std::vector<cplx> samples;
  };
  std::vector<Candidate> cands;
  for (Eigen::Index c = n - 1; c >= 0; --c) {
    std::vector<cplx> s(static_cast<std::size_t>(n));
    Eigen::Index peak = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      s[static_cast<std::size_t>(j)] = es.eigenvectors()(j, c) / sw[j];
      if (std::abs(s[static_cast<std::size_t>(j)]) > best + 1e-12) {
        best = std::abs(s[static_cast<std::size_t>(j)]);
        peak = j;
      }
    }
    const cplx phase = std::conj(s[static_cast<std::size_t>(peak)]) / std::abs(s[static_cast<std::size_t>(peak)]);
    for (auto& z : s) z *= phase;
    cands.push_back({es.eigenvalues()[c], peak, std::move(s)});
  }
  const double scale = std::max(1.0, std::abs(cands.front().value));
  std::stable_sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    if (std::abs(a.value - b.value) > 1e-10 * scale) return a.value > b.value;
    return a.peak < b.peak;
  });

  std::vector<DominantMode> out;
  for (int i = 0; i < k; ++i) {
    auto& c = cands[static_cast<std::size_t>(i)];
    out.push_back({c.value, ModeFunction(corr.grid, std::move(c.samples))});
  }
  return out;
}

}  // namespace qpulse
