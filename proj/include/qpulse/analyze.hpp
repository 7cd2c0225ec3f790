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

// Observables and state analysis on density matrices: expectations, output
// flux, coherent and cat states, Wigner functions and atomic postselection.
//
// Phase-space convention: beta = x + i p with x = Re<a>, p = Im<a>. With this
// scaling the Wigner function integrates to one over dx dp and the vacuum has
// W(0, 0) = 2 / pi.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <vector>

#include "qpulse/cascade.hpp"
#include "qpulse/errors.hpp"
#include "qpulse/evolve.hpp"
#include "qpulse/hilbert.hpp"

namespace qpulse {

inline cplx expectation(const DensityMatrix& rho, const Operator& op) {
  if (op.rows() != rho.dimension() || op.cols() != rho.dimension()) {
    throw InvalidArgument("expectation: operator and state dimensions differ");
  }
  return trace_product(op, rho.matrix());
}

inline cplx expectation(const DensityMatrix& rho, const Matrix& op) {
  if (op.rows() != rho.dimension() || op.cols() != rho.dimension()) {
    throw InvalidArgument("expectation: operator and state dimensions differ");
  }
  return (rho.matrix() * op).trace();
}

/// I_out(t) = Tr(rho L_0^dag(t) L_0(t)).
inline double output_flux(const CascadeModel& model, const DensityMatrix& rho, double t) {
  if (rho.dimension() != model.dimension()) throw InvalidArgument("output_flux: state does not match the model");
  if (!model.grid().contains(t)) throw OutOfRange("output_flux: t outside the grid");
  return std::max(0.0, trace_product(model.lindblad0_norm_at(t), rho.matrix()).real());
}

/// Smallest truncation N that holds a coherent amplitude alpha.
inline int coherent_truncation(cplx alpha) {
  const double a = std::abs(alpha);
  return static_cast<int>(std::ceil(a * a + 6.0 * a - 1e-12));
}

/// Fock expansion of |alpha> on `dim` levels, renormalized after truncation.
inline Vector coherent_state(int dim, cplx alpha) {
  if (dim < 1) throw InvalidDimension("coherent_state: dim must be >= 1");
  Vector psi(dim);
  psi[0] = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < dim; ++n) psi[n] = psi[n - 1] * alpha / std::sqrt(static_cast<double>(n));
  return psi / psi.norm();
}

inline Vector fock_state(int dim, int n) {
  if (n < 0 || n >= dim) throw OutOfRange("fock_state: level outside the truncation");
  Vector psi = Vector::Zero(dim);
  psi[n] = 1.0;
  return psi;
}

/// Single-factor state from a pure vector.
inline DensityMatrix mode_state(const Vector& psi) {
  return DensityMatrix::pure(std::make_shared<const TensorSpace>(std::vector<int>{static_cast<int>(psi.size())}), psi);
}

inline std::vector<double> fock_populations(const DensityMatrix& mode) {
  std::vector<double> p(static_cast<std::size_t>(mode.dimension()));
  for (Eigen::Index k = 0; k < mode.dimension(); ++k) p[static_cast<std::size_t>(k)] = mode.matrix()(k, k).real();
  return p;
}

inline cplx mode_mean(const DensityMatrix& mode) { return expectation(mode, annihilation(static_cast<int>(mode.dimension()))); }

inline double mode_number(const DensityMatrix& mode) {
  return expectation(mode, number_operator(static_cast<int>(mode.dimension()))).real();
}

/// (|up>|alpha> + |down>|-alpha>)/sqrt(2) on atom (dimension atom_dim) x mode.
inline Vector cat_state(int atom_dim, int mode_dim, cplx alpha, const AtomLevels& levels = {}) {
  if (std::max(levels.up, levels.down) >= atom_dim) throw InvalidDimension("cat_state: atom levels outside the atom");
  Vector psi = kron(fock_state(atom_dim, levels.up), coherent_state(mode_dim, alpha)) +
               kron(fock_state(atom_dim, levels.down), coherent_state(mode_dim, -alpha));
  return psi / psi.norm();
}

/// <cat|rho|cat> for a state on atom x mode.
inline double cat_fidelity(const DensityMatrix& atom_mode, cplx alpha, const AtomLevels& levels = {}) {
  const auto& dims = atom_mode.space().dims();
  if (dims.size() != 2) throw InvalidArgument("cat_fidelity: expected a state on atom x mode");
  const int m = dims[1] - 1;
  if (m < coherent_truncation(alpha)) {
    throw InsufficientTruncation("cat_fidelity: output truncation " + std::to_string(m) + " is below |alpha|^2 + 6|alpha|");
  }
  const Vector cat = cat_state(dims[0], dims[1], alpha, levels);
  return (cat.adjoint() * atom_mode.matrix() * cat)(0, 0).real();
}

struct WignerSpec {
  double range = 4.0;  // x and p both span [-range, range]
  int resolution = 101;
};

/// W(x, p) on a square grid; values(i, j) holds W(xs[j], ps[i]).
struct WignerGrid {
  std::vector<double> xs;
  std::vector<double> ps;
  Eigen::MatrixXd values;
  bool boundary_warning = false;

  double spacing() const { return xs.size() > 1 ? xs[1] - xs[0] : 0.0; }

  double integral() const {
    double acc = 0.0;
    const auto n = values.rows(), m = values.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        const double wj = (j == 0 || j == m - 1) ? 0.5 : 1.0;
        acc += wi * wj * values(i, j);
      }
    }
    return acc * spacing() * spacing();
  }

  /// Integral over p at each x.
  std::vector<double> marginal_x() const {
    std::vector<double> out(xs.size(), 0.0);
    const auto n = values.rows();
    for (std::size_t j = 0; j < xs.size(); ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        out[j] += ((i == 0 || i == n - 1) ? 0.5 : 1.0) * values(i, static_cast<Eigen::Index>(j));
      }
      out[j] *= spacing();
    }
    return out;
  }
};

/// Displaced-parity evaluation W(beta) = (2/pi) Tr[D(-beta) rho D(-beta)^dag Pi].
/// D(-beta)|m> is built exactly on an enlarged Fock basis so the result does not
/// suffer from truncating the displacement operator.
inline WignerGrid wigner(const DensityMatrix& mode, const WignerSpec& spec) {
  if (mode.space().dims().size() != 1) throw InvalidArgument("wigner: expected a single-mode state");
  if (!(spec.range > 0.0) || spec.resolution < 2) throw InvalidArgument("wigner: range must be positive, resolution >= 2");
  const int n = static_cast<int>(mode.dimension());
  const int res = spec.resolution;
  WignerGrid out;
  out.xs.resize(static_cast<std::size_t>(res));
  for (int i = 0; i < res; ++i) out.xs[static_cast<std::size_t>(i)] = -spec.range + 2.0 * spec.range * i / (res - 1);
  out.ps = out.xs;
  out.values.resize(res, res);

  const double rmax = std::sqrt(2.0) * spec.range;
  const int big = n + static_cast<int>(std::ceil(rmax * rmax + 10.0 * rmax)) + 20;
  const Matrix& rho = mode.matrix();
  Matrix c(big, n);
  Matrix tmp(big, n);
  for (int i = 0; i < res; ++i) {
    for (int j = 0; j < res; ++j) {
      const cplx g = -cplx(out.xs[static_cast<std::size_t>(j)], out.ps[static_cast<std::size_t>(i)]);
      // Column 0: coherent state |g> on the enlarged basis.
      c.col(0)(0) = std::exp(-0.5 * std::norm(g));
      for (int k = 1; k < big; ++k) c(k, 0) = c(k - 1, 0) * g / std::sqrt(static_cast<double>(k));
      for (int m = 0; m + 1 < n; ++m) {
        // (a^dag - g*) col_m / sqrt(m + 1)
        const double s = 1.0 / std::sqrt(static_cast<double>(m + 1));
        c(0, m + 1) = -std::conj(g) * c(0, m) * s;
        for (int k = 1; k < big; ++k) {
          c(k, m + 1) = (std::sqrt(static_cast<double>(k)) * c(k - 1, m) - std::conj(g) * c(k, m)) * s;
        }
      }
      tmp.noalias() = c * rho;
      double acc = 0.0;
      for (int k = 0; k < big; ++k) {
        const double diag = (tmp.row(k) * c.row(k).adjoint())(0, 0).real();
        acc += (k % 2 == 0) ? diag : -diag;
      }
      out.values(i, j) = 2.0 / std::numbers::pi * acc;
    }
  }
  const double peak = out.values.cwiseAbs().maxCoeff();
  double edge = 0.0;
  for (int k = 0; k < res; ++k) {
    edge = std::max({edge, std::abs(out.values(0, k)), std::abs(out.values(res - 1, k)), std::abs(out.values(k, 0)),
                     std::abs(out.values(k, res - 1))});
  }
  out.boundary_warning = edge > 1e-3 * peak;
  return out;
}

/// Circular variance 1 - |<e^{i theta}>| of the Wigner distribution about the
/// origin; near zero for a well-displaced coherent state, larger when the
/// phase is spread.
inline double azimuthal_spread(const WignerGrid& w) {
  cplx acc = 0.0;
  double mass = 0.0;
  for (Eigen::Index i = 0; i < w.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.values.cols(); ++j) {
      const cplx z(w.xs[static_cast<std::size_t>(j)], w.ps[static_cast<std::size_t>(i)]);
      const double r = std::abs(z);
      if (r == 0.0) continue;
      acc += w.values(i, j) * z / r;
      mass += w.values(i, j);
    }
  }
  if (!(mass > 0.0)) throw NumericalFailure("azimuthal_spread: Wigner mass is not positive");
  return 1.0 - std::abs(acc) / mass;
}

struct Postselection {
  double probability;
  DensityMatrix mode;
};

/// Applies a pi/2 rotation on the {down, up} subspace of the atom factor
/// (R|down> = (|down> - |up>)/sqrt2, R|up> = (|down> + |up>)/sqrt2), projects
/// the atom on `outcome` and returns the outcome probability and the
/// normalized state of `mode_factor`.
inline Postselection postselect_atom(const DensityMatrix& rho, int atom_factor, int mode_factor, int outcome,
                                     const AtomLevels& levels = {}) {
  if (atom_factor == mode_factor) throw InvalidArgument("postselect_atom: atom and mode factors coincide");
  const auto reduced = partial_trace(rho, {atom_factor, mode_factor});
  const int na = rho.space().dims()[static_cast<std::size_t>(atom_factor)];
  const int nm = rho.space().dims()[static_cast<std::size_t>(mode_factor)];
  if (outcome < 0 || outcome >= na) throw OutOfRange("postselect_atom: outcome outside the atom");
  // partial_trace orders factors ascending.
  const bool atom_first = atom_factor < mode_factor;

  Matrix r = Matrix::Identity(na, na);
  const double s = 1.0 / std::sqrt(2.0);
  r(levels.down, levels.down) = s;
  r(levels.up, levels.down) = -s;
  r(levels.down, levels.up) = s;
  r(levels.up, levels.up) = s;
  const Matrix proj_row = r.row(outcome);  // <outcome| R

  // Conditional mode state: sum over atom indices a, b of <o|R|a> rho_{(a,m),(b,n)} <b|R^dag|o>.
  Matrix mode = Matrix::Zero(nm, nm);
  const Matrix& m = reduced.matrix();
  auto idx = [&](int a, int k) { return atom_first ? a * nm + k : k * na + a; };
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < na; ++b) {
      const cplx w = proj_row(0, a) * std::conj(proj_row(0, b));
      if (w == cplx(0.0)) continue;
      for (int k = 0; k < nm; ++k) {
        for (int l = 0; l < nm; ++l) mode(k, l) += w * m(idx(a, k), idx(b, l));
      }
    }
  }
  const double p = mode.trace().real();
  if (!(p >= 1e-9)) throw DegeneratePostselection("postselect_atom: outcome probability below 1e-9");
  mode /= p;
  return {p, DensityMatrix(std::make_shared<const TensorSpace>(std::vector<int>{nm}), symmetrized(mode))};
}

}  // namespace qpulse
