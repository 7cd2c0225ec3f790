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

// Time integration of the cascaded Lindblad master equation
//
//   drho/dt = -i[H(t), rho] + sum_i ( L_i rho L_i^dag - 1/2 {L_i^dag L_i, rho} ),
//
// with L_0(t) the collective output-line operator and static extra channels.
// rho is propagated as a full dense matrix; the generator is applied through
// sparse operator products and never assembled as a superoperator.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qpulse/cascade.hpp"
#include "qpulse/errors.hpp"
#include "qpulse/hilbert.hpp"

namespace qpulse {

enum class Method { rk4_fixed, rk45_adaptive };

struct IntegrationConfig {
  Method method = Method::rk45_adaptive;
  double dt = 0.0;  // rk4_fixed step; 0 means the grid spacing
  double rtol = 1e-8;
  double atol = 1e-12;
  int stride = 1;  // record observables every `stride` grid points
  bool renormalize_trace = false;
  double max_trace_drift = 1e-4;
  int eigen_checkpoints = 0;  // evenly spaced smallest-eigenvalue checks (always includes the final time when > 0)
  long max_steps = 50'000'000;

  void validate(const TimeGrid& grid) const {
    if (method == Method::rk45_adaptive && !(rtol > 0.0 && atol > 0.0)) {
      throw InvalidArgument("integration: rtol and atol must be positive");
    }
    if (method == Method::rk4_fixed && (dt < 0.0 || dt > grid.dt() * (1 + 1e-12))) {
      throw InvalidArgument("integration: rk4 step must satisfy 0 < dt <= grid spacing");
    }
    if (stride < 1) throw InvalidArgument("integration: stride must be >= 1");
  }
};

/// Observables sampled on a shared time axis; one named column per channel.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<std::string> channels) : names_(std::move(channels)) {}

  const std::vector<std::string>& channels() const { return names_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }

  void append(double t, std::vector<double> row) {
    if (row.size() != names_.size()) throw InvalidDimension("TimeSeries: row width does not match the channels");
    times_.push_back(t);
    rows_.push_back(std::move(row));
  }

  bool has(const std::string& name) const { return std::find(names_.begin(), names_.end(), name) != names_.end(); }

  std::vector<double> channel(const std::string& name) const {
    const auto k = column(name);
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r[k]);
    return out;
  }

  double final(const std::string& name) const {
    if (rows_.empty()) throw OutOfRange("TimeSeries: empty");
    return rows_.back()[column(name)];
  }

  /// Comma-separated, header row `t,<channels...>`, 17 significant digits.
  void write(std::ostream& out) const {
    out << "t";
    for (const auto& n : names_) out << ',' << n;
    out << '\n';
    std::ostringstream line;
    line << std::setprecision(17);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      line.str("");
      line << times_[i];
      for (double v : rows_[i]) line << ',' << v;
      out << line.str() << '\n';
    }
  }

 private:
  std::size_t column(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw InvalidArgument("TimeSeries: no channel '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  std::vector<std::string> names_;
  std::vector<double> times_;
  std::vector<std::vector<double>> rows_;
};

/// Tr(op rho) for a sparse op, O(nnz).
inline cplx trace_product(const Operator& op, const Matrix& rho) {
  cplx acc = 0.0;
  for (int r = 0; r < op.outerSize(); ++r) {
    for (Operator::InnerIterator it(op, r); it; ++it) acc += it.value() * rho(it.col(), it.row());
  }
  return acc;
}

/// Density matrix (or regression operator) plus two loss accumulators:
/// photons lost through L_0 and excitations removed by extra channels.
struct LindbladState {
  Matrix rho;
  double lost_output = 0.0;
  double lost_extra = 0.0;
};

/// Right-hand side of the master equation at time t.
inline Matrix lindblad_rhs(const CascadeModel& model, double t, const Matrix& rho) {
  if (rho.rows() != model.dimension() || rho.cols() != model.dimension()) {
    throw InvalidDimension("lindblad_rhs: state dimension does not match the model");
  }
  const Operator heff = model.effective_hamiltonian_at(t);
  const Operator l0 = model.lindblad0_at(t);
  Matrix out(rho.rows(), rho.cols());
  Matrix tmp(rho.rows(), rho.cols());
  out.noalias() = heff * rho;
  tmp.noalias() = rho * heff.adjoint();
  out = -kI * out + kI * tmp;
  tmp.noalias() = l0 * rho;
  out.noalias() += tmp * l0.adjoint();
  for (const auto& l : model.extra_lindblads()) {
    tmp.noalias() = l * rho;
    out.noalias() += tmp * l.adjoint();
  }
  return out;
}

struct PropagationStats {
  long steps = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
};

/// Steps the master equation between arbitrary times, landing exactly on the
/// requested endpoints. The adaptive step size carries over between calls.
class LindbladPropagator {
 public:
  LindbladPropagator(const CascadeModel& model, IntegrationConfig config) : model_(model), cfg_(config) {
    cfg_.validate(model.grid());
  }

  const PropagationStats& stats() const { return stats_; }

  void advance(LindbladState& y, double t_from, double t_to) {
    if (t_to <= t_from) return;
    if (cfg_.method == Method::rk4_fixed) {
      const double dt = cfg_.dt > 0.0 ? cfg_.dt : model_.grid().dt();
      const int n = std::max(1, static_cast<int>(std::ceil((t_to - t_from) / dt - 1e-9)));
      const double h = (t_to - t_from) / n;
      for (int k = 0; k < n; ++k) rk4_step(y, t_from + k * h, h);
      return;
    }
    dopri_advance(y, t_from, t_to);
  }

 private:
  void rhs(double t, const LindbladState& y, LindbladState& dy) {
    ++stats_.rhs_evaluations;
    model_.effective_hamiltonian_at(t, heff_);
    model_.lindblad0_at(t, l0_);
    model_.lindblad0_norm_at(t, l0_norm_);
    const Operator& heff = heff_;
    const Operator& l0 = l0_;
    dy.rho.resize(y.rho.rows(), y.rho.cols());
    work_.resize(y.rho.rows(), y.rho.cols());
    dy.rho.noalias() = heff * y.rho;
    work_.noalias() = y.rho * heff.adjoint();
    dy.rho = -kI * dy.rho + kI * work_;
    work_.noalias() = l0 * y.rho;
    dy.rho.noalias() += work_ * l0.adjoint();
    dy.lost_output = trace_product(l0_norm_, y.rho).real();
    for (const auto& l : model_.extra_lindblads()) {
      work_.noalias() = l * y.rho;
      dy.rho.noalias() += work_ * l.adjoint();
    }
    dy.lost_extra = model_.system().extra.empty() ? 0.0 : trace_product(model_.extra_loss_norm(), y.rho).real();
  }

  void rk4_step(LindbladState& y, double t, double h) {
    auto& [k1, k2, k3, k4, tmp] = rk4_;
    rhs(t, y, k1);
    combine(tmp, y, {{0.5 * h, &k1}});
    rhs(t + 0.5 * h, tmp, k2);
    combine(tmp, y, {{0.5 * h, &k2}});
    rhs(t + 0.5 * h, tmp, k3);
    combine(tmp, y, {{h, &k3}});
    rhs(t + h, tmp, k4);
    combine(y, y, {{h / 6.0, &k1}, {h / 3.0, &k2}, {h / 3.0, &k3}, {h / 6.0, &k4}});
    ++stats_.steps;
    check_finite(y, t + h);
  }

  struct Term {
    double coeff;
    const LindbladState* k;
  };

  static void combine(LindbladState& out, const LindbladState& y, std::initializer_list<Term> terms) {
    if (&out != &y) out.rho = y.rho;
    out.lost_output = y.lost_output;
    out.lost_extra = y.lost_extra;
    for (const auto& term : terms) {
      if (term.coeff == 0.0) continue;
      out.rho += term.coeff * term.k->rho;
      out.lost_output += term.coeff * term.k->lost_output;
      out.lost_extra += term.coeff * term.k->lost_extra;
    }
  }

  static void check_finite(const LindbladState& y, double t) {
    if (!y.rho.allFinite()) {
      throw NumericalFailure("master equation produced non-finite entries at t = " + std::to_string(t));
    }
  }

  /// Scaled RMS error over the density-matrix entries and the loss integrals.
  double error_norm(const LindbladState& y0, const LindbladState& y1, const LindbladState& err) const {
    const double atol = cfg_.atol, rtol = cfg_.rtol;
    const auto n = y0.rho.size();
    const cplx* a = y0.rho.data();
    const cplx* b = y1.rho.data();
    const cplx* e = err.rho.data();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = atol + rtol * std::max(std::abs(a[i]), std::abs(b[i]));
      const double r = std::abs(e[i]) / sc;
      sum += r * r;
    }
    auto scalar = [&](double x0, double x1, double ex) {
      const double sc = atol + rtol * std::max(std::abs(x0), std::abs(x1));
      return (ex / sc) * (ex / sc);
    };
    sum += scalar(y0.lost_output, y1.lost_output, err.lost_output);
    sum += scalar(y0.lost_extra, y1.lost_extra, err.lost_extra);
    return std::sqrt(sum / static_cast<double>(n + 2));
  }

  void dopri_advance(LindbladState& y, double t, double t_end) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    auto& [k1, k2, k3, k4, k5, k6, k7, ytmp, ynew, err] = dp_;
    const double span = t_end - t;
    rhs(t, y, k1);
    if (h_ <= 0.0) h_ = initial_step(y, k1, t, span);

    while (t < t_end) {
      if (stats_.steps + stats_.rejected > cfg_.max_steps) {
        throw IntegrationDiverged("step limit exceeded; the problem is too stiff for the adaptive integrator");
      }
      bool last = false;
      double h = h_;
      if (t + h >= t_end - 1e-12 * span) {
        h = t_end - t;
        last = true;
      }
      combine(ytmp, y, {{h * a21, &k1}});
      rhs(t + c2 * h, ytmp, k2);
      combine(ytmp, y, {{h * a31, &k1}, {h * a32, &k2}});
      rhs(t + c3 * h, ytmp, k3);
      combine(ytmp, y, {{h * a41, &k1}, {h * a42, &k2}, {h * a43, &k3}});
      rhs(t + c4 * h, ytmp, k4);
      combine(ytmp, y, {{h * a51, &k1}, {h * a52, &k2}, {h * a53, &k3}, {h * a54, &k4}});
      rhs(t + c5 * h, ytmp, k5);
      combine(ytmp, y, {{h * a61, &k1}, {h * a62, &k2}, {h * a63, &k3}, {h * a64, &k4}, {h * a65, &k5}});
      rhs(t + h, ytmp, k6);
      combine(ynew, y, {{h * a71, &k1}, {h * a73, &k3}, {h * a74, &k4}, {h * a75, &k5}, {h * a76, &k6}});
      rhs(t + h, ynew, k7);
      err.rho.setZero(y.rho.rows(), y.rho.cols());
      err.lost_output = err.lost_extra = 0.0;
      combine(err, err, {{h * e1, &k1}, {h * e3, &k3}, {h * e4, &k4}, {h * e5, &k5}, {h * e6, &k6}, {h * e7, &k7}});

      const double en = error_norm(y, ynew, err);
      if (!std::isfinite(en)) {
        h_ = 0.25 * h;
        ++stats_.rejected;
        if (h_ < 1e-14 * span) throw NumericalFailure("step size underflow at t = " + std::to_string(t));
        continue;
      }
      const double factor = std::clamp(0.9 * std::pow(std::max(en, 1e-16), -0.2), 0.2, 5.0);
      if (en <= 1.0) {
        t = last ? t_end : t + h;
        std::swap(y, ynew);
        std::swap(k1, k7);
        ++stats_.steps;
        // Do not let the clipped final step shrink the carried step size.
        h_ = last ? std::max(h_, h * factor) : h * factor;
      } else {
        h_ = h * std::min(1.0, factor);
        ++stats_.rejected;
        if (h_ < 1e-14 * std::max(span, 1.0)) throw NumericalFailure("step size underflow at t = " + std::to_string(t));
      }
    }
    check_finite(y, t_end);
  }

  double initial_step(const LindbladState& y, const LindbladState& f, double t, double span) {
    const double d0 = y.rho.norm() / std::sqrt(static_cast<double>(y.rho.size()));
    const double d1 = f.rho.norm() / std::sqrt(static_cast<double>(y.rho.size()));
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, span);
    (void)t;
    return std::max(h, 1e-12 * span);
  }

  const CascadeModel& model_;
  IntegrationConfig cfg_;
  PropagationStats stats_;
  double h_ = 0.0;
  Matrix work_;
  Operator heff_, l0_, l0_norm_;
  std::tuple<LindbladState, LindbladState, LindbladState, LindbladState, LindbladState> rk4_;
  std::tuple<LindbladState, LindbladState, LindbladState, LindbladState, LindbladState, LindbladState, LindbladState,
             LindbladState, LindbladState, LindbladState>
      dp_;
};

/// Extra recorded channel evaluated on the (symmetrized) state at sample times.
struct Probe {
  std::string name;
  std::function<double(double t, const DensityMatrix& rho)> evaluate;
};

struct EigenCheckpoint {
  double t;
  double min_eigenvalue;
};

struct IntegrationResult {
  TimeSeries series;
  DensityMatrix final_state;
  std::vector<EigenCheckpoint> checkpoints;
  PropagationStats stats;
};

/// Sample indices: every `stride`-th grid point plus the final one.
inline std::vector<int> sample_indices(const TimeGrid& grid, int stride) {
  std::vector<int> idx;
  for (int j = 0; j < grid.size(); j += stride) idx.push_back(j);
  if (idx.back() != grid.size() - 1) idx.push_back(grid.size() - 1);
  return idx;
}

/// Evolves rho0 over the model grid, recording
///   n_u, <scatterer observables>, n_v, I_out, lost_output, lost_extra,
///   excitations, bookkeeping, trace, hermiticity
/// followed by the caller's probes. `bookkeeping` is the total excitation
/// number plus everything lost so far; it is constant for excitation-preserving
/// models.
inline IntegrationResult integrate(const CascadeModel& model, const DensityMatrix& rho0, const IntegrationConfig& config,
                                   const std::vector<Probe>& probes = {}) {
  if (rho0.dimension() != model.dimension()) throw InvalidDimension("integrate: initial state does not match the model");
  const auto& grid = model.grid();
  config.validate(grid);

  std::vector<std::string> names{"n_u"};
  std::vector<Operator> scatterer_ops;
  for (const auto& ob : model.system().observables) {
    names.push_back(ob.name);
    scatterer_ops.push_back(model.embed_scatterer(ob.op));
  }
  for (std::string n : {"n_v", "I_out", "lost_output", "lost_extra", "excitations", "bookkeeping", "trace", "hermiticity"}) {
    names.push_back(n);
  }
  for (const auto& p : probes) names.push_back(p.name);
  TimeSeries series(names);

  const auto samples = sample_indices(grid, config.stride);
  std::vector<bool> eig_at(samples.size(), false);
  if (config.eigen_checkpoints > 0) {
    const int k = config.eigen_checkpoints;
    for (int i = 0; i < k; ++i) {
      const auto pos = k == 1 ? samples.size() - 1 : (i * (samples.size() - 1)) / static_cast<std::size_t>(k - 1);
      eig_at[pos] = true;
    }
  }

  const double trace0 = rho0.trace();
  LindbladState y{rho0.matrix(), 0.0, 0.0};
  LindbladPropagator prop(model, config);
  std::vector<EigenCheckpoint> checkpoints;
  std::optional<DensityMatrix> last;

  double t_prev = grid.t0();
  for (std::size_t si = 0; si < samples.size(); ++si) {
    const double t = grid.time(samples[si]);
    prop.advance(y, t_prev, t);
    t_prev = t;

    const double tr = y.rho.trace().real();
    if (!std::isfinite(tr)) throw NumericalFailure("trace is not finite at t = " + std::to_string(t));
    const double drift = std::abs(tr - trace0);
    if (drift > config.max_trace_drift) {
      std::ostringstream msg;
      msg << "trace drifted by " << drift << " at t = " << t << "; reduce the step size or tolerances";
      throw IntegrationDiverged(msg.str());
    }
    const double herm = hermiticity_error(y.rho);
    if (config.renormalize_trace) y.rho *= trace0 / tr;

    DensityMatrix rho(model.space(), symmetrized(y.rho));
    const Matrix& m = rho.matrix();
    std::vector<double> row;
    row.reserve(names.size());
    row.push_back(trace_product(model.n_u(), m).real());
    for (const auto& op : scatterer_ops) row.push_back(trace_product(op, m).real());
    row.push_back(trace_product(model.n_v(), m).real());
    row.push_back(trace_product(model.lindblad0_norm_at(t), m).real());
    row.push_back(y.lost_output);
    row.push_back(y.lost_extra);
    const double exc = trace_product(model.excitation_number(), m).real();
    row.push_back(exc);
    row.push_back(exc + y.lost_output + y.lost_extra);
    row.push_back(tr);
    row.push_back(herm);
    for (const auto& p : probes) row.push_back(p.evaluate(t, rho));
    series.append(t, std::move(row));

    if (eig_at[si]) checkpoints.push_back({t, rho.min_eigenvalue()});
    if (si + 1 == samples.size()) last.emplace(std::move(rho));
  }
  return IntegrationResult{std::move(series), std::move(*last), std::move(checkpoints), prop.stats()};
}

}  // namespace qpulse
