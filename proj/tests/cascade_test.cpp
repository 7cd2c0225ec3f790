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

#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "qpulse/cascade.hpp"

using namespace qpulse;

namespace {

CouplingSchedule constant_schedule(const TimeGrid& g, cplx value) {
  const auto n = static_cast<std::size_t>(g.size());
  return CouplingSchedule(g, std::vector<cplx>(n, value), 1e9, std::vector<bool>(n, false));
}

CouplingSchedule random_schedule(const TimeGrid& g, std::mt19937& rng) {
  std::normal_distribution<double> d;
  std::vector<cplx> s(static_cast<std::size_t>(g.size()));
  for (auto& z : s) z = cplx(d(rng), d(rng));
  return CouplingSchedule(g, s, 1e9, std::vector<bool>(s.size(), false));
}

Matrix dense_lower(int n) {
  Matrix a = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

Matrix eye(int n) { return Matrix::Identity(n, n); }

Matrix kron3(const Matrix& a, const Matrix& b, const Matrix& c) {
  Matrix ab = Eigen::kroneckerProduct(a, b).eval();
  return Eigen::kroneckerProduct(ab, c).eval();
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

struct Slh {
  Matrix L;
  Matrix H;
};

// Series product G2 <| G1 with unit scattering matrices.
Slh series(const Slh& g2, const Slh& g1) {
  const cplx half_over_i = cplx(0.0, -0.5);
  return {g1.L + g2.L, g1.H + g2.H + half_over_i * (g2.L.adjoint() * g1.L - g1.L.adjoint() * g2.L)};
}

}  // namespace

TEST(Cascade, EmptyCavityMatchesHandBuiltMatrices) {
  const TimeGrid g(0.0, 1.0, 11);
  const cplx gu(0.7, -0.2), gv(-0.4, 0.5);
  PresetParams p;
  p.gamma = 1.3;
  p.detuning = 0.25;
  const CascadeModel m(preset(Preset::empty_cavity, p), 2, 2, constant_schedule(g, gu), constant_schedule(g, gv));
  ASSERT_EQ(m.dimension(), 8);

  const Matrix a = dense_lower(2), I = eye(2);
  const Matrix au = kron3(a, I, I), c = kron3(I, a, I), av = kron3(I, I, a);
  const double sg = std::sqrt(1.3);
  const cplx i(0.0, 1.0);
  Matrix X = sg * std::conj(gu) * au.adjoint() * c + sg * gv * c.adjoint() * av + std::conj(gu) * gv * au.adjoint() * av;
  const Matrix H = 0.25 * c.adjoint() * c + 0.5 * i * (X - Matrix(X.adjoint()));
  const Matrix L = sg * c + gu * au + gv * av;

  EXPECT_LT(max_abs(Matrix(m.hamiltonian_at(0.37)) - H), 1e-14);
  EXPECT_LT(max_abs(Matrix(m.lindblad0_at(0.37)) - L), 1e-14);
  EXPECT_LT(max_abs(Matrix(m.lindblad0_norm_at(0.37)) - L.adjoint() * L), 1e-14);
  EXPECT_LT(max_abs(Matrix(m.effective_hamiltonian_at(0.37)) - (H - 0.5 * i * L.adjoint() * L)), 1e-14);
  EXPECT_LT(hermiticity_error(Matrix(m.hamiltonian_at(0.9))), 1e-14);
}

TEST(Cascade, AgreesWithSeriesProductAtRandomTimes) {
  std::mt19937 rng(7);
  const TimeGrid g(0.0, 2.0, 21);
  PresetParams p;
  p.gamma = 0.8;
  p.coupling = 1.1;
  p.atom_decay = 0.3;
  p.kappa_oc = 0.2;
  p.detuning = -0.4;
  p.cavity_levels = 2;
  const auto spec = preset(Preset::atom_in_cavity, p);
  const CascadeModel m(spec, 2, 3, random_schedule(g, rng), random_schedule(g, rng));
  const int ds = spec.d;
  const Matrix Iu = eye(2), Iv = eye(3), Is = eye(ds);
  std::uniform_real_distribution<double> ut(0.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double t = ut(rng);
    const cplx gu = m.gu().at(t), gv = m.gv().at(t);
    const Slh G_u{gu * kron3(dense_lower(2), Is, Iv), Matrix::Zero(m.dimension(), m.dimension())};
    const Slh G_s{std::sqrt(spec.gamma) * kron3(Iu, Matrix(spec.c), Iv), kron3(Iu, Matrix(spec.hamiltonian.at(t)), Iv)};
    const Slh G_v{gv * kron3(Iu, Is, dense_lower(3)), Matrix::Zero(m.dimension(), m.dimension())};
    const Slh total = series(G_v, series(G_s, G_u));
    EXPECT_LT(max_abs(Matrix(m.hamiltonian_at(t)) - total.H), 1e-12) << "t = " << t;
    EXPECT_LT(max_abs(Matrix(m.lindblad0_at(t)) - total.L), 1e-12) << "t = " << t;
    Matrix norm = total.L.adjoint() * total.L;
    for (const auto& ch : spec.extra) {
      const Matrix l = kron3(Iu, Matrix(ch.op), Iv);
      norm += l.adjoint() * l;
    }
    const Matrix heff = total.H - cplx(0.0, 0.5) * norm;
    EXPECT_LT(max_abs(Matrix(m.effective_hamiltonian_at(t)) - heff), 1e-12) << "t = " << t;
  }
}

TEST(Cascade, ExcitationCapRestrictsEveryOperator) {
  std::mt19937 rng(11);
  const TimeGrid g(0.0, 1.0, 11);
  PresetParams p;
  p.cavity_levels = 3;
  p.coupling = 0.9;
  p.atom_decay = 0.5;
  const auto spec = preset(Preset::atom_in_cavity, p);
  const auto gu = random_schedule(g, rng), gv = random_schedule(g, rng);
  const CascadeModel full(spec, 3, 3, gu, gv);
  const CascadeModel capped(spec, 3, 3, gu, gv, 2);
  // Count product states with n_u + exc(s) + n_v <= 2 directly.
  int expected = 0;
  for (int nu = 0; nu < 3; ++nu)
    for (int s = 0; s < spec.d; ++s)
      for (int nv = 0; nv < 3; ++nv) expected += nu + spec.excitation[static_cast<std::size_t>(s)] + nv <= 2;
  ASSERT_EQ(capped.dimension(), expected);
  ASSERT_LT(capped.dimension(), full.dimension());
  const auto& space = *capped.space();
  Matrix sel = Matrix::Zero(full.dimension(), capped.dimension());
  for (std::size_t k = 0; k < space.dimension(); ++k) sel(static_cast<Eigen::Index>(space.full_index(k)), static_cast<Eigen::Index>(k)) = 1.0;
  const double t = 0.43;
  auto project = [&](const Operator& op) { return Matrix(sel.transpose() * Matrix(op) * sel); };
  EXPECT_LT(max_abs(project(full.effective_hamiltonian_at(t)) - Matrix(capped.effective_hamiltonian_at(t))), 1e-14);
  EXPECT_LT(max_abs(project(full.lindblad0_at(t)) - Matrix(capped.lindblad0_at(t))), 1e-14);
  // The kept block is invariant: no operator leaks weight out of it.
  const Matrix heff = full.effective_hamiltonian_at(t);
  Matrix leak = (Matrix::Identity(full.dimension(), full.dimension()) - sel * sel.transpose()) * heff * sel;
  EXPECT_LT(max_abs(leak), 1e-14);
}

TEST(Cascade, CapRejectsNonConservingSystems) {
  const TimeGrid g(0.0, 1.0, 11);
  SystemSpec s;
  s.name = "driven";
  s.d = 2;
  s.factors = {2};
  Matrix sx(2, 2);
  sx << 0, 1, 1, 0;
  s.hamiltonian.constant = to_operator(sx);
  s.c = transition(2, 0, 1);
  s.gamma = 1.0;
  s.excitation = {0, 1};
  s.initial = Matrix::Identity(2, 2) / 2.0;
  EXPECT_NO_THROW(CascadeModel(s, 2, 2, CouplingSchedule::zero(g), CouplingSchedule::zero(g)));
  EXPECT_THROW(CascadeModel(s, 2, 2, CouplingSchedule::zero(g), CouplingSchedule::zero(g), 1), InvalidArgument);
}

TEST(Cascade, QueriesOutsideTheGridThrow) {
  const TimeGrid g(0.0, 1.0, 11);
  const CascadeModel m(preset(Preset::empty_cavity, {}), 2, 2, constant_schedule(g, 1.0), constant_schedule(g, 1.0));
  EXPECT_THROW(m.hamiltonian_at(1.5), OutOfRange);
  EXPECT_THROW(m.effective_hamiltonian_at(-0.1), OutOfRange);
}

TEST(Cascade, MismatchedGridsThrow) {
  const TimeGrid a(0.0, 1.0, 11), b(0.0, 1.0, 21);
  EXPECT_THROW(CascadeModel(preset(Preset::empty_cavity, {}), 2, 2, CouplingSchedule::zero(a), CouplingSchedule::zero(b)),
               InvalidArgument);
}

TEST(Presets, ShapesAndChannels) {
  PresetParams p;
  p.cavity_levels = 4;
  p.tau_jit = 2.0;
  const auto e = preset(Preset::empty_cavity, p);
  EXPECT_EQ(e.d, 4);
  EXPECT_TRUE(e.extra.empty());

  const auto n = preset(Preset::phase_noise, p);
  ASSERT_EQ(n.extra.size(), 1u);
  EXPECT_FALSE(n.extra[0].removes_excitation);
  EXPECT_NEAR(Matrix(n.extra[0].op)(3, 3).real(), 3.0 / std::sqrt(2.0), 1e-14);
  p.tau_jit = 0.0;
  EXPECT_THROW(preset(Preset::phase_noise, p), InvalidArgument);

  p.atom = AtomInit::excited;
  const auto a = preset(Preset::two_level_atom, p);
  EXPECT_EQ(a.initial(1, 1), cplx(1.0));

  p.atom = AtomInit::superposition;
  p.atom_decay = 1.0;
  p.kappa_oc = 0.5;
  const auto ac = preset(Preset::atom_in_cavity, p);
  EXPECT_EQ(ac.d, 12);
  EXPECT_EQ(ac.factors, (std::vector<int>{3, 4}));
  ASSERT_EQ(ac.extra.size(), 2u);
  EXPECT_TRUE(ac.extra[0].removes_excitation && ac.extra[1].removes_excitation);
  EXPECT_NEAR(ac.initial.trace().real(), 1.0, 1e-15);
  EXPECT_NEAR(ac.initial(0, 4 * 1).real(), 0.5, 1e-15);  // |down,0><up,0|
  p.atom_decay = -1.0;
  EXPECT_THROW(preset(Preset::atom_in_cavity, p), InvalidArgument);
  EXPECT_THROW(preset_from_name("laser"), InvalidArgument);
}

TEST(Presets, SystemValidationCatchesBadOperators) {
  auto s = preset(Preset::empty_cavity, {});
  s.c = annihilation(3);
  EXPECT_THROW(s.validate(), InvalidDimension);
  s = preset(Preset::empty_cavity, {});
  s.hamiltonian.constant = annihilation(2);
  EXPECT_THROW(s.validate(), InvalidArgument);
}
