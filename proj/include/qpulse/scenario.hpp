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

// End-to-end scenario pipeline: configuration -> modes and couplings ->
// cascaded model -> integration -> analysis and output files.

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qpulse/analyze.hpp"
#include "qpulse/cascade.hpp"
#include "qpulse/config.hpp"
#include "qpulse/errors.hpp"
#include "qpulse/evolve.hpp"
#include "qpulse/hilbert.hpp"
#include "qpulse/io.hpp"
#include "qpulse/pulses.hpp"
#include "qpulse/regression.hpp"

namespace qpulse {

inline Vector input_vector(const ScenarioConfig& cfg) {
  const int dim = cfg.input_truncation + 1;
  if (cfg.input_state.kind == InputState::Kind::fock) return fock_state(dim, cfg.input_state.photons);
  return coherent_state(dim, cfg.input_state.alpha);
}

/// psi_u (x) rho_s (x) |0><0|_v, written directly on the model's retained basis.
inline DensityMatrix initial_state(const CascadeModel& model, const Vector& psi_u, const Matrix& rho_s) {
  const auto& layout = model.layout();
  const int du = layout.dim(Slot::u), ds = layout.dim(Slot::s), dv = layout.dim(Slot::v);
  if (psi_u.size() != du || rho_s.rows() != ds || rho_s.cols() != ds) {
    throw InvalidDimension("initial_state: input or scatterer state does not match the layout");
  }
  const auto& space = *model.space();
  const auto n = static_cast<Eigen::Index>(space.dimension());
  std::vector<Eigen::Index> pos;
  std::vector<int> nu_of, s_of;
  for (Eigen::Index p = 0; p < n; ++p) {
    const std::size_t full = space.full_index(static_cast<std::size_t>(p));
    if (full % static_cast<std::size_t>(dv) != 0) continue;  // n_v = 0 only
    const std::size_t rest = full / static_cast<std::size_t>(dv);
    pos.push_back(p);
    s_of.push_back(static_cast<int>(rest % static_cast<std::size_t>(ds)));
    nu_of.push_back(static_cast<int>(rest / static_cast<std::size_t>(ds)));
  }
  Matrix rho = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < pos.size(); ++i) {
    for (std::size_t j = 0; j < pos.size(); ++j) {
      rho(pos[i], pos[j]) = psi_u[nu_of[i]] * std::conj(psi_u[nu_of[j]]) * rho_s(s_of[i], s_of[j]);
    }
  }
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) {
    throw InvalidArgument("initial_state: the excitation cap discards part of the initial state");
  }
  return DensityMatrix(model.space(), symmetrized(rho));
}

/// Probability that the output slot holds k photons.
inline double output_population(const CascadeModel& model, const Matrix& rho, int k) {
  const auto dv = static_cast<std::size_t>(model.layout().dim(Slot::v));
  const auto& space = *model.space();
  double acc = 0.0;
  for (std::size_t p = 0; p < space.dimension(); ++p) {
    if (space.full_index(p) % dv == static_cast<std::size_t>(k)) {
      acc += rho(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)).real();
    }
  }
  return acc;
}

/// Reduced state of the output mode.
inline DensityMatrix output_mode_state(const DensityMatrix& rho) {
  return partial_trace(rho, {static_cast<int>(rho.space().dims().size()) - 1});
}

/// Reduced state on atom (x) output mode for presets with an atom.
inline DensityMatrix atom_mode_state(const CascadeModel& model, const DensityMatrix& rho) {
  if (!model.system().atom) throw InvalidArgument("atom_mode_state: the scatterer has no atom");
  const int atom_factor = 1 + model.system().atom->factor;
  return partial_trace(rho, {atom_factor, static_cast<int>(rho.space().dims().size()) - 1});
}

/// Model with the output slot reduced to a single level and g_v = 0, as used
/// for the emitter autocorrelation.
inline CascadeModel emitter_model(const ScenarioConfig& cfg, const ModeFunction& u, const SystemSpec& spec) {
  return CascadeModel(spec, cfg.input_truncation + 1, 1, gu_from_mode(u, cfg.clamp), CouplingSchedule::zero(u.grid()),
                      cfg.excitation_cap);
}

struct ModeFinderResult {
  CorrelationMatrix correlation;
  std::vector<DominantMode> modes;
};

inline ModeFinderResult find_modes(const ScenarioConfig& cfg, int k) {
  const auto grid = cfg.grid();
  const auto u = make_mode(cfg.input_shape, grid);
  const auto spec = preset(cfg.preset, cfg.params);
  const auto model = emitter_model(cfg, u, spec);
  const auto rho0 = initial_state(model, input_vector(cfg), spec.initial);
  auto corr = g1_matrix(model, rho0, cfg.integration, cfg.analysis.g1_stride);
  auto modes = dominant_modes(corr, k);
  return {std::move(corr), std::move(modes)};
}

inline ModeFunction output_mode(const ScenarioConfig& cfg, const ModeFunction& u) {
  switch (cfg.output) {
    case OutputChoice::reflect:
      // The output cavity absorbs the conjugate of the field it receives; with
      // H_s = Delta c^dag c that makes v the reflection at detuning -Delta.
      return reflect_mode(u, cfg.params.gamma, -cfg.params.detuning);
    case OutputChoice::same_as_input:
      return u;
    case OutputChoice::shape:
      return make_mode(*cfg.output_shape, u.grid());
    case OutputChoice::from_g1:
      return resample(find_modes(cfg, 1).modes.front().mode, u.grid());
  }
  throw InvalidArgument("unknown output choice");
}

struct RunResult {
  std::string name;
  ModeFunction u;
  ModeFunction v;
  IntegrationResult integration;
  std::optional<double> fidelity;
  std::optional<Postselection> postselection;
  std::optional<WignerGrid> wigner;
  Eigen::Index dimension = 0;

  std::string summary() const {
    const auto& s = integration.series;
    std::ostringstream out;
    out << std::setprecision(6) << name << ": dim=" << dimension << " n_u=" << s.final("n_u") << " n_v=" << s.final("n_v")
        << " lost_output=" << s.final("lost_output") << " lost_extra=" << s.final("lost_extra");
    for (const auto& ch : s.channels()) {
      if (ch.rfind("P_v", 0) == 0) out << ' ' << ch << '=' << s.final(ch);
    }
    if (fidelity) out << " fidelity=" << *fidelity;
    if (postselection) out << " postselect_probability=" << postselection->probability;
    out << " steps=" << integration.stats.steps << " rejected=" << integration.stats.rejected;
    return out.str();
  }
};

inline RunResult run_scenario(const ScenarioConfig& cfg) {
  const auto grid = cfg.grid();
  const auto u = make_mode(cfg.input_shape, grid);
  const auto v = output_mode(cfg, u);
  const auto spec = preset(cfg.preset, cfg.params);
  const CascadeModel model(spec, cfg.input_truncation + 1, cfg.output_truncation + 1, gu_from_mode(u, cfg.clamp),
                           gv_from_mode(v, cfg.clamp), cfg.excitation_cap);
  const auto rho0 = initial_state(model, input_vector(cfg), spec.initial);

  std::vector<Probe> probes;
  for (int k = 0; k < cfg.analysis.fock_channels; ++k) {
    probes.push_back({"P_v" + std::to_string(k),
                      [&model, k](double, const DensityMatrix& rho) { return output_population(model, rho.matrix(), k); }});
  }
  const cplx cat_alpha = cfg.analysis.cat_alpha.value_or(cfg.input_state.alpha);
  if (cfg.analysis.cat_fidelity) {
    probes.push_back({"fidelity", [&model, cat_alpha](double, const DensityMatrix& rho) {
                        return cat_fidelity(atom_mode_state(model, rho), cat_alpha, *model.system().atom);
                      }});
  }

  RunResult out{cfg.name, u, v, integrate(model, rho0, cfg.integration, probes), std::nullopt, std::nullopt,
                std::nullopt, model.dimension()};
  const auto& final_state = out.integration.final_state;
  if (cfg.analysis.cat_fidelity) out.fidelity = out.integration.series.final("fidelity");
  if (cfg.analysis.postselect) {
    const int atom_factor = 1 + spec.atom->factor;
    out.postselection = postselect_atom(final_state, atom_factor, static_cast<int>(final_state.space().dims().size()) - 1,
                                        *cfg.analysis.postselect, *spec.atom);
  }
  if (cfg.analysis.wigner) {
    out.wigner = wigner(out.postselection ? out.postselection->mode : output_mode_state(final_state),
                        cfg.analysis.wigner_spec);
  }
  return out;
}

/// Writes timeseries.csv, rho_final.bin, mode_u.txt, mode_v.txt, summary.txt
/// and, when requested, wigner_v.csv into `dir`.
inline void write_run(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("timeseries.csv");
    r.integration.series.write(f);
  }
  write_checkpoint((dir / "rho_final.bin").string(), r.integration.final_state);
  {
    auto f = open("mode_u.txt");
    write_mode(f, r.u);
  }
  {
    auto f = open("mode_v.txt");
    write_mode(f, r.v);
  }
  if (r.wigner) {
    auto f = open("wigner_v.csv");
    write_wigner(f, *r.wigner);
  }
  auto f = open("summary.txt");
  f << r.summary() << '\n';
}

inline void write_modes(const ModeFinderResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<double> occ;
  for (std::size_t i = 0; i < r.modes.size(); ++i) {
    std::ofstream f(dir / ("mode_" + std::to_string(i + 1) + ".txt"));
    if (!f) throw Error("cannot write mode files into " + dir.string());
    write_mode(f, r.modes[i].mode);
    occ.push_back(r.modes[i].occupation);
  }
  std::ofstream f(dir / "occupations.csv");
  write_occupations(f, occ);
}

}  // namespace qpulse
