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

// The cascaded three-component model: input virtual cavity u releasing the
// incident pulse, the scatterer s, and output virtual cavity v absorbing the
// chosen outgoing mode. All presets are written in the rotating frame of the
// carrier, so only detunings appear in the scatterer Hamiltonian.

#pragma once

#include <cmath>
#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpulse/errors.hpp"
#include "qpulse/hilbert.hpp"
#include "qpulse/pulses.hpp"

namespace qpulse {

/// H_s(t) = constant + sum_k f_k(t) op_k with real coefficients.
struct ScattererHamiltonian {
  struct Term {
    std::function<double(double)> coefficient;
    Operator op;
  };

  Operator constant;
  std::vector<Term> modulated;

  Operator at(double t) const {
    Operator h = constant;
    for (const auto& term : modulated) h += term.coefficient(t) * term.op;
    return h;
  }
};

/// Extra Lindblad channel L_i (rate already folded into `op`).
struct DecayChannel {
  std::string name;
  Operator op;
  /// True when a jump removes one excitation from the system (a loss), false
  /// for excitation-conserving channels such as dephasing.
  bool removes_excitation = true;
};

/// Named scatterer observable, evaluated as a real expectation value.
struct Observable {
  std::string name;
  Operator op;
};

/// Level indices of a three-level atom factor inside the scatterer.
struct AtomLevels {
  int factor = 0;  // index into SystemSpec::factors
  int down = 0;
  int up = 1;
  int excited = 2;
};

struct SystemSpec {
  std::string name;
  int d = 1;
  std::vector<int> factors;  // sub-factorization of the scatterer slot, product == d
  ScattererHamiltonian hamiltonian;
  Operator c;
  double gamma = 0.0;
  std::vector<DecayChannel> extra;
  std::vector<int> excitation;  // excitation number of each scatterer level
  Matrix initial;               // d x d scatterer state
  std::vector<Observable> observables;
  std::optional<AtomLevels> atom;

  void validate() const {
    if (d < 1) throw InvalidDimension(name + ": scatterer dimension must be >= 1");
    if (product(factors) != static_cast<std::size_t>(d)) throw InvalidDimension(name + ": factors do not multiply to d");
    auto check = [&](const Operator& op, const std::string& what) {
      if (op.rows() != d || op.cols() != d) throw InvalidDimension(name + ": " + what + " has the wrong dimension");
    };
    check(hamiltonian.constant, "H_s");
    for (const auto& t : hamiltonian.modulated) check(t.op, "modulated H_s term");
    check(c, "coupling operator c");
    for (const auto& ch : extra) check(ch.op, "channel " + ch.name);
    for (const auto& ob : observables) check(ob.op, "observable " + ob.name);
    if (!(gamma >= 0.0)) throw InvalidArgument(name + ": gamma must be non-negative");
    if (hermiticity_error(Matrix(hamiltonian.constant)) > 1e-12) throw InvalidArgument(name + ": H_s is not Hermitian");
    for (const auto& t : hamiltonian.modulated) {
      if (hermiticity_error(Matrix(t.op)) > 1e-12) throw InvalidArgument(name + ": modulated H_s term is not Hermitian");
    }
    if (excitation.size() != static_cast<std::size_t>(d)) throw InvalidDimension(name + ": excitation table size != d");
    if (initial.rows() != d || initial.cols() != d) throw InvalidDimension(name + ": initial state has the wrong dimension");
  }
};

enum class Preset { empty_cavity, phase_noise, two_level_atom, atom_in_cavity };

inline Preset preset_from_name(const std::string& name) {
  if (name == "empty_cavity") return Preset::empty_cavity;
  if (name == "phase_noise") return Preset::phase_noise;
  if (name == "two_level_atom") return Preset::two_level_atom;
  if (name == "atom_in_cavity") return Preset::atom_in_cavity;
  throw InvalidArgument("unknown preset '" + name + "'");
}

enum class AtomInit { ground, excited, superposition };

/// Parameters shared by the presets; each preset reads the fields it needs.
/// Rates are in the run's inverse time unit.
struct PresetParams {
  double gamma = 1.0;     // coupling of c to the input/output line
  double detuning = 0.0;  // scatterer resonance minus carrier
  int cavity_levels = 2;  // n_c for presets containing a cavity mode
  double tau_jit = 0.0;   // phase_noise: mirror jitter time
  double coupling = 0.0;  // atom_in_cavity: g
  double atom_decay = 0.0;  // atom_in_cavity: Gamma
  double kappa_oc = 0.0;    // atom_in_cavity: other cavity losses
  AtomInit atom = AtomInit::ground;
};

namespace detail {

inline Matrix projector_state(int d, int level) {
  Matrix m = Matrix::Zero(d, d);
  m(level, level) = 1.0;
  return m;
}

inline SystemSpec cavity_spec(const std::string& name, const PresetParams& p) {
  if (p.cavity_levels < 2) throw InvalidArgument(name + ": cavity needs at least 2 levels");
  if (!(p.gamma >= 0.0)) throw InvalidArgument(name + ": gamma must be non-negative");
  const int n = p.cavity_levels;
  SystemSpec s;
  s.name = name;
  s.d = n;
  s.factors = {n};
  s.c = annihilation(n);
  s.gamma = p.gamma;
  s.hamiltonian.constant = p.detuning * number_operator(n);
  for (int k = 0; k < n; ++k) s.excitation.push_back(k);
  s.initial = projector_state(n, 0);
  s.observables.push_back({"n_c", number_operator(n)});
  return s;
}

}  // namespace detail

inline SystemSpec preset(Preset which, const PresetParams& p) {
  switch (which) {
    case Preset::empty_cavity: {
      auto s = detail::cavity_spec("empty_cavity", p);
      s.validate();
      return s;
    }
    case Preset::phase_noise: {
      if (!(p.tau_jit > 0.0)) throw InvalidArgument("phase_noise: tau_jit must be positive");
      auto s = detail::cavity_spec("phase_noise", p);
      s.extra.push_back({"dephasing", (1.0 / std::sqrt(p.tau_jit)) * number_operator(s.d), false});
      s.validate();
      return s;
    }
    case Preset::two_level_atom: {
      // |g> = 0, |e> = 1.
      SystemSpec s;
      s.name = "two_level_atom";
      s.d = 2;
      s.factors = {2};
      s.c = transition(2, 0, 1);
      s.gamma = p.gamma;
      s.hamiltonian.constant = p.detuning * transition(2, 1, 1);
      s.excitation = {0, 1};
      if (p.atom == AtomInit::superposition) {
        Vector psi(2);
        psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
        s.initial = psi * psi.adjoint();
      } else {
        s.initial = detail::projector_state(2, p.atom == AtomInit::excited ? 1 : 0);
      }
      s.observables.push_back({"p_e", transition(2, 1, 1)});
      s.validate();
      return s;
    }
    case Preset::atom_in_cavity: {
      // Atom levels |down> = 0, |up> = 1, |e> = 2; scatterer = atom (x) cavity.
      if (p.cavity_levels < 2) throw InvalidArgument("atom_in_cavity: cavity needs at least 2 levels");
      if (p.atom_decay < 0.0 || p.kappa_oc < 0.0 || p.gamma < 0.0) {
        throw InvalidArgument("atom_in_cavity: rates must be non-negative");
      }
      const int n = p.cavity_levels;
      const Operator id_atom = identity(3);
      const Operator id_cav = identity(n);
      const Operator a = annihilation(n);
      const Operator up_e = transition(3, 1, 2);
      SystemSpec s;
      s.name = "atom_in_cavity";
      s.d = 3 * n;
      s.factors = {3, n};
      s.c = kron(id_atom, a);
      s.gamma = p.gamma;
      const Operator jc = kron(up_e, Operator(a.adjoint()));
      s.hamiltonian.constant = p.coupling * (jc + Operator(jc.adjoint())) +
                               p.detuning * kron(id_atom, number_operator(n));
      // Spontaneous decay of |e> is taken back into |up>, the state it couples to.
      if (p.atom_decay > 0.0) s.extra.push_back({"atom_decay", std::sqrt(p.atom_decay) * kron(up_e, id_cav), true});
      if (p.kappa_oc > 0.0) s.extra.push_back({"cavity_loss", std::sqrt(p.kappa_oc) * s.c, true});
      for (int lvl = 0; lvl < 3; ++lvl) {
        for (int k = 0; k < n; ++k) s.excitation.push_back(k + (lvl == 2 ? 1 : 0));
      }
      Vector atom = Vector::Zero(3);
      switch (p.atom) {
        case AtomInit::ground:
          atom[0] = 1.0;
          break;
        case AtomInit::excited:
          atom[2] = 1.0;
          break;
        case AtomInit::superposition:
          atom[0] = atom[1] = 1.0 / std::sqrt(2.0);
          break;
      }
      Vector cav = Vector::Zero(n);
      cav[0] = 1.0;
      Vector psi = kron(atom, cav);
      s.initial = psi * psi.adjoint();
      s.observables.push_back({"p_down", kron(transition(3, 0, 0), id_cav)});
      s.observables.push_back({"p_up", kron(transition(3, 1, 1), id_cav)});
      s.observables.push_back({"p_e", kron(transition(3, 2, 2), id_cav)});
      s.observables.push_back({"n_c", kron(id_atom, number_operator(n))});
      s.atom = AtomLevels{};
      s.validate();
      return s;
    }
  }
  throw InvalidArgument("unknown preset");
}

/// The assembled cascade u -> s -> v on a (possibly excitation-capped) space.
class CascadeModel {
 public:
  /// `input_dim` = N + 1 and `output_dim` = M + 1. With `excitation_cap`, only
  /// product states with n_u + exc(s) + n_v <= cap are retained; this is exact
  /// when H_s conserves excitations, c lowers them by one and every extra
  /// channel conserves or lowers them.
  CascadeModel(SystemSpec system, int input_dim, int output_dim, CouplingSchedule gu, CouplingSchedule gv,
               std::optional<int> excitation_cap = std::nullopt)
      : system_(std::move(system)),
        layout_(input_dim, system_.d, output_dim, system_.factors),
        gu_(std::move(gu)),
        gv_(std::move(gv)),
        cap_(excitation_cap) {
    system_.validate();
    if (!(gu_.grid() == gv_.grid())) throw InvalidArgument("CascadeModel: g_u and g_v must share one time grid");
    if (cap_) check_excitation_structure();
    space_ = std::make_shared<const TensorSpace>(build_space());
    assemble();
  }

  const SystemSpec& system() const { return system_; }
  const SpaceLayout& layout() const { return layout_; }
  const std::shared_ptr<const TensorSpace>& space() const { return space_; }
  Eigen::Index dimension() const { return static_cast<Eigen::Index>(space_->dimension()); }
  const TimeGrid& grid() const { return gu_.grid(); }
  const CouplingSchedule& gu() const { return gu_; }
  const CouplingSchedule& gv() const { return gv_; }
  std::optional<int> excitation_cap() const { return cap_; }
  double sqrt_gamma() const { return std::sqrt(system_.gamma); }

  const Operator& a_u() const { return a_u_; }
  const Operator& a_v() const { return a_v_; }
  const Operator& c() const { return c_; }
  const Operator& n_u() const { return n_u_; }
  const Operator& n_v() const { return n_v_; }
  /// n_u + exc(s) + n_v.
  const Operator& excitation_number() const { return n_total_; }
  const std::vector<Operator>& extra_lindblads() const { return extra_; }

  /// Scatterer operator embedded into (and restricted to) the model space.
  Operator embed_scatterer(const Operator& op) const { return space_->restrict(embed(op, Slot::s, layout_)); }
  Operator embed_slot(const Operator& op, Slot slot) const { return space_->restrict(embed(op, slot, layout_)); }

  /// H(t) = H_s(t) + (i/2)[sqrt(gamma) g_u* a_u^dag c + sqrt(gamma) g_v c^dag a_v + g_u* g_v a_u^dag a_v - h.c.]
  Operator hamiltonian_at(double t) const {
    Operator out;
    hamiltonian_at(t, out);
    return out;
  }
  void hamiltonian_at(double t, Operator& out) const {
    const auto co = coefficients(t);
    std::vector<cplx> k(co.hs.begin(), co.hs.end());
    const auto h = hamiltonian_part(co);
    k.insert(k.end(), h.begin(), h.end());
    h_comb_->evaluate(k, out);
  }

  /// L_0(t) = sqrt(gamma) c + g_u(t) a_u + g_v(t) a_v.
  Operator lindblad0_at(double t) const {
    Operator out;
    lindblad0_at(t, out);
    return out;
  }
  void lindblad0_at(double t, Operator& out) const {
    const auto co = coefficients(t);
    const std::array<cplx, 3> k{co.sg, co.gu, co.gv};
    l0_comb_->evaluate(k, out);
  }

  /// L_0^dag L_0.
  Operator lindblad0_norm_at(double t) const {
    Operator out;
    lindblad0_norm_at(t, out);
    return out;
  }
  void lindblad0_norm_at(double t, Operator& out) const {
    const auto k = norm_part(coefficients(t));
    norm_comb_->evaluate(k, out);
  }

  /// H(t) - (i/2) sum_i L_i^dag L_i, the non-Hermitian drift of the master equation.
  Operator effective_hamiltonian_at(double t) const {
    Operator out;
    effective_hamiltonian_at(t, out);
    return out;
  }
  void effective_hamiltonian_at(double t, Operator& out) const {
    const auto co = coefficients(t);
    std::vector<cplx> k(co.hs.begin(), co.hs.end());
    const auto h = hamiltonian_part(co);
    const auto n = norm_part(co);
    // Terms: [H_s..., ud_c, cd_u, cd_v, vd_c, ud_v, vd_u, cd_c, n_u, n_v, extra].
    const std::array<cplx, 9> shared{h[0] - 0.5 * kI * n[4], h[1] - 0.5 * kI * n[3], h[2] - 0.5 * kI * n[5],
                                     h[3] - 0.5 * kI * n[6], h[4] - 0.5 * kI * n[7], h[5] - 0.5 * kI * n[8],
                                     -0.5 * kI * n[0],       -0.5 * kI * n[1],       -0.5 * kI * n[2]};
    k.insert(k.end(), shared.begin(), shared.end());
    k.push_back(-0.5 * kI);
    heff_comb_->evaluate(k, out);
  }

  /// Excitation-removing part of sum_i L_i^dag L_i over the extra channels.
  const Operator& extra_loss_norm() const { return extra_loss_norm_; }

 private:
  struct Coefficients {
    cplx gu, gv;
    double sg;
    std::vector<cplx> hs;  // 1 followed by the modulated H_s coefficients
  };

  Coefficients coefficients(double t) const {
    Coefficients co{gu_.at(t), gv_.at(t), sqrt_gamma(), {1.0}};
    for (const auto& term : system_.hamiltonian.modulated) co.hs.emplace_back(term.coefficient(t));
    return co;
  }

  /// Coefficients of [ud_c, cd_u, cd_v, vd_c, ud_v, vd_u] in H - H_s.
  static std::array<cplx, 6> hamiltonian_part(const Coefficients& co) {
    const cplx k1 = co.sg * std::conj(co.gu), k2 = co.sg * co.gv, k3 = std::conj(co.gu) * co.gv;
    return {0.5 * kI * k1, -0.5 * kI * std::conj(k1), 0.5 * kI * k2,
            -0.5 * kI * std::conj(k2), 0.5 * kI * k3, -0.5 * kI * std::conj(k3)};
  }

  /// Coefficients of [cd_c, n_u, n_v, cd_u, ud_c, cd_v, vd_c, ud_v, vd_u] in L_0^dag L_0.
  static std::array<cplx, 9> norm_part(const Coefficients& co) {
    const cplx gu = co.gu, gv = co.gv;
    const double sg = co.sg;
    return {sg * sg, std::norm(gu), std::norm(gv), sg * gu, sg * std::conj(gu),
            sg * gv, sg * std::conj(gv), std::conj(gu) * gv, gu * std::conj(gv)};
  }

  void check_excitation_structure() const {
    const auto& exc = system_.excitation;
    auto scan = [&](const Operator& op, auto&& ok, const std::string& what) {
      for (int r = 0; r < op.outerSize(); ++r) {
        for (Operator::InnerIterator it(op, r); it; ++it) {
          if (std::abs(it.value()) == 0.0) continue;
          if (!ok(exc[static_cast<std::size_t>(it.row())] - exc[static_cast<std::size_t>(it.col())])) {
            throw InvalidArgument("excitation cap: " + what + " of preset " + system_.name +
                                  " breaks the excitation structure");
          }
        }
      }
    };
    scan(system_.hamiltonian.constant, [](int d) { return d == 0; }, "H_s");
    for (const auto& t : system_.hamiltonian.modulated) scan(t.op, [](int d) { return d == 0; }, "H_s");
    scan(system_.c, [](int d) { return d == -1; }, "c");
    for (const auto& ch : system_.extra) scan(ch.op, [](int d) { return d <= 0; }, ch.name);
  }

  TensorSpace build_space() const {
    auto dims = layout_.factor_dims();
    if (!cap_) return TensorSpace(dims);
    std::vector<std::size_t> kept;
    const auto& d = layout_.dims();
    for (int nu = 0; nu < d[0]; ++nu) {
      for (int s = 0; s < d[1]; ++s) {
        for (int nv = 0; nv < d[2]; ++nv) {
          if (nu + system_.excitation[static_cast<std::size_t>(s)] + nv <= *cap_) kept.push_back(layout_.index(nu, s, nv));
        }
      }
    }
    if (kept.empty()) throw InvalidArgument("excitation cap leaves no states");
    return TensorSpace(dims, std::move(kept));
  }

  void assemble() {
    auto r = [&](const Operator& full) { return space_->restrict(full); };
    const Operator au_full = embed(annihilation(layout_.dim(Slot::u)), Slot::u, layout_);
    const Operator av_full = embed(annihilation(layout_.dim(Slot::v)), Slot::v, layout_);
    const Operator c_full = embed(system_.c, Slot::s, layout_);
    const Operator aud = au_full.adjoint(), avd = av_full.adjoint(), cd = c_full.adjoint();
    a_u_ = r(au_full);
    a_v_ = r(av_full);
    c_ = r(c_full);
    n_u_ = r(aud * au_full);
    n_v_ = r(avd * av_full);
    cd_c_ = r(cd * c_full);
    ud_c_ = r(aud * c_full);
    cd_u_ = r(cd * au_full);
    cd_v_ = r(cd * av_full);
    vd_c_ = r(avd * c_full);
    ud_v_ = r(aud * av_full);
    vd_u_ = r(avd * au_full);
    hs_constant_ = r(embed(system_.hamiltonian.constant, Slot::s, layout_));
    for (const auto& t : system_.hamiltonian.modulated) hs_modulated_.push_back(r(embed(t.op, Slot::s, layout_)));

    const auto n = dimension();
    extra_norm_ = Operator(n, n);
    extra_loss_norm_ = Operator(n, n);
    for (const auto& ch : system_.extra) {
      const Operator full = embed(ch.op, Slot::s, layout_);
      extra_.push_back(r(full));
      const Operator norm = r(Operator(full.adjoint()) * full);
      extra_norm_ += norm;
      if (ch.removes_excitation) extra_loss_norm_ += norm;
    }

    std::vector<Operator> hs_terms{hs_constant_};
    hs_terms.insert(hs_terms.end(), hs_modulated_.begin(), hs_modulated_.end());
    std::vector<Operator> h_terms = hs_terms;
    for (const Operator* op : {&ud_c_, &cd_u_, &cd_v_, &vd_c_, &ud_v_, &vd_u_}) h_terms.push_back(*op);
    h_comb_ = std::make_shared<const OperatorCombination>(h_terms);
    std::vector<Operator> heff_terms = h_terms;
    for (const Operator* op : {&cd_c_, &n_u_, &n_v_, &extra_norm_}) heff_terms.push_back(*op);
    heff_comb_ = std::make_shared<const OperatorCombination>(heff_terms);
    l0_comb_ = std::make_shared<const OperatorCombination>(std::vector<Operator>{c_, a_u_, a_v_});
    norm_comb_ = std::make_shared<const OperatorCombination>(
        std::vector<Operator>{cd_c_, n_u_, n_v_, cd_u_, ud_c_, cd_v_, vd_c_, ud_v_, vd_u_});

    Matrix exc = Matrix::Zero(system_.d, system_.d);
    for (int k = 0; k < system_.d; ++k) exc(k, k) = system_.excitation[static_cast<std::size_t>(k)];
    n_total_ = n_u_ + n_v_ + r(embed(to_operator(exc), Slot::s, layout_));
  }

  SystemSpec system_;
  SpaceLayout layout_;
  CouplingSchedule gu_;
  CouplingSchedule gv_;
  std::optional<int> cap_;
  std::shared_ptr<const TensorSpace> space_;

  Operator a_u_, a_v_, c_, n_u_, n_v_, n_total_;
  Operator cd_c_, ud_c_, cd_u_, cd_v_, vd_c_, ud_v_, vd_u_;
  Operator hs_constant_;
  std::vector<Operator> hs_modulated_;
  std::vector<Operator> extra_;
  Operator extra_norm_, extra_loss_norm_;
  std::shared_ptr<const OperatorCombination> h_comb_, heff_comb_, l0_comb_, norm_comb_;
};

}  // namespace qpulse
