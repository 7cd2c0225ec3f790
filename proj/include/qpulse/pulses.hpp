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

// Temporal mode functions and the virtual-cavity coupling schedules that
// release (input) or absorb (output) them.
//
// Every integral over a mode (cumulative norm, overlaps, flux integrals) uses
// the same trapezoidal rule on the uniform grid, so normalization identities
// hold to the same tolerance everywhere.

#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qpulse/errors.hpp"
#include "qpulse/hilbert.hpp"

namespace qpulse {

/// Uniform grid t_j = t0 + j dt, j = 0..n-1, dt = (t1 - t0) / (n - 1).
class TimeGrid {
 public:
  TimeGrid(double t0, double t1, int n_steps) : t0_(t0), t1_(t1), n_(n_steps) {
    if (!(t1 > t0)) throw InvalidArgument("TimeGrid: t1 must exceed t0");
    if (n_steps < 2) throw InvalidArgument("TimeGrid: at least two samples required");
    dt_ = (t1 - t0) / (n_steps - 1);
  }

  double t0() const { return t0_; }
  double t1() const { return t1_; }
  int size() const { return n_; }
  double dt() const { return dt_; }
  double time(int j) const { return j == n_ - 1 ? t1_ : t0_ + j * dt_; }

  bool contains(double t) const {
    const double slack = 1e-9 * dt_;
    return t >= t0_ - slack && t <= t1_ + slack;
  }

  /// Segment index j and fraction in [0, 1] such that t = (1 - f) t_j + f t_{j+1}.
  std::pair<int, double> locate(double t) const {
    if (!contains(t)) {
      throw OutOfRange("time " + std::to_string(t) + " outside grid [" + std::to_string(t0_) + ", " +
                       std::to_string(t1_) + "]");
    }
    const double x = std::clamp((t - t0_) / dt_, 0.0, static_cast<double>(n_ - 1));
    int j = std::min(static_cast<int>(x), n_ - 2);
    return {j, x - j};
  }

  /// Every `stride`-th sample, which must land on t1.
  TimeGrid subsampled(int stride) const {
    if (stride < 1 || (n_ - 1) % stride != 0) {
      throw InvalidArgument("TimeGrid::subsampled: stride must divide the number of intervals");
    }
    return TimeGrid(t0_, t1_, (n_ - 1) / stride + 1);
  }

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) {
    return a.n_ == b.n_ && a.t0_ == b.t0_ && a.t1_ == b.t1_;
  }

 private:
  double t0_;
  double t1_;
  int n_;
  double dt_;
};

/// Trapezoidal cumulative integral, starting at zero.
inline std::vector<double> cumulative_trapezoid(const std::vector<double>& f, double dt) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t j = 1; j < f.size(); ++j) out[j] = out[j - 1] + 0.5 * dt * (f[j - 1] + f[j]);
  return out;
}

template <class T>
T trapezoid(const std::vector<T>& f, double dt) {
  T acc{};
  for (std::size_t j = 1; j < f.size(); ++j) acc += 0.5 * dt * (f[j - 1] + f[j]);
  return acc;
}

template <class T>
T interpolate(const TimeGrid& grid, const std::vector<T>& samples, double t) {
  const auto [j, f] = grid.locate(t);
  return (1.0 - f) * samples[static_cast<std::size_t>(j)] + f * samples[static_cast<std::size_t>(j) + 1];
}

/// Unit-normalized complex envelope sampled on a grid, with its cumulative
/// norm F(t_j).
class ModeFunction {
 public:
  /// Normalizes the samples with the trapezoidal rule.
  ModeFunction(TimeGrid grid, std::vector<cplx> samples) : grid_(grid), samples_(std::move(samples)) {
    if (samples_.size() != static_cast<std::size_t>(grid_.size())) {
      throw InvalidDimension("ModeFunction: sample count does not match the grid");
    }
    std::vector<double> density(samples_.size());
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      if (!std::isfinite(samples_[j].real()) || !std::isfinite(samples_[j].imag())) {
        throw InvalidArgument("ModeFunction: non-finite sample");
      }
      density[j] = std::norm(samples_[j]);
    }
    const double norm = trapezoid(density, grid_.dt());
    if (!(norm > 0.0)) throw InvalidArgument("ModeFunction: mode has zero norm");
    const double scale = 1.0 / std::sqrt(norm);
    for (auto& s : samples_) s *= scale;
    for (auto& d : density) d /= norm;
    cumulative_ = cumulative_trapezoid(density, grid_.dt());
    for (auto& f : cumulative_) f = std::min(f, 1.0);
  }

  const TimeGrid& grid() const { return grid_; }
  const std::vector<cplx>& samples() const { return samples_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  cplx operator[](int j) const { return samples_[static_cast<std::size_t>(j)]; }
  cplx value_at(double t) const { return interpolate(grid_, samples_, t); }

  ModeFunction conjugated() const {
    std::vector<cplx> c(samples_.size());
    std::transform(samples_.begin(), samples_.end(), c.begin(), [](cplx z) { return std::conj(z); });
    return ModeFunction(grid_, std::move(c));
  }

 private:
  TimeGrid grid_;
  std::vector<cplx> samples_;
  std::vector<double> cumulative_;
};

/// Gaussian envelope; `width` is the standard deviation of |u(t)|^2.
struct Gaussian {
  double center;
  double width;
};

/// u(t) = sqrt(rate) exp(-rate (t - onset) / 2) for t >= onset.
struct ExponentialDecay {
  double rate;
  double onset = 0.0;
};

/// u(t) = 1/sqrt(duration) on [start, start + duration]; start defaults to the grid origin.
struct Flat {
  double duration;
  std::optional<double> start;
};

/// Tabulated envelope, linearly interpolated onto the grid (zero outside its range).
struct Custom {
  std::vector<double> times;
  std::vector<cplx> values;
};

using ModeShape = std::variant<Gaussian, ExponentialDecay, Flat, Custom>;

inline constexpr double kMaxTailMass = 1e-6;

namespace detail {

inline cplx interpolate_table(const Custom& c, double t) {
  if (c.times.empty() || t < c.times.front() || t > c.times.back()) return 0.0;
  auto it = std::upper_bound(c.times.begin(), c.times.end(), t);
  if (it == c.times.end()) return c.values.back();
  const auto k = static_cast<std::size_t>(it - c.times.begin());
  const double ta = c.times[k - 1], tb = c.times[k];
  const double f = tb > ta ? (t - ta) / (tb - ta) : 0.0;
  return (1.0 - f) * c.values[k - 1] + f * c.values[k];
}

inline void check_tail(double tail, const std::string& shape) {
  if (tail >= kMaxTailMass) {
    std::ostringstream msg;
    msg << shape << " mode loses " << tail << " of its norm outside the grid (limit " << kMaxTailMass
        << "); extend the grid";
    throw TruncatedMode(msg.str());
  }
}

}  // namespace detail

inline ModeFunction make_mode(const ModeShape& shape, const TimeGrid& grid) {
  std::vector<cplx> samples(static_cast<std::size_t>(grid.size()));
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Gaussian>) {
          if (!(s.width > 0.0)) throw InvalidArgument("gaussian: width must be positive");
          const double z0 = (s.center - grid.t0()) / (s.width * std::numbers::sqrt2);
          const double z1 = (grid.t1() - s.center) / (s.width * std::numbers::sqrt2);
          detail::check_tail(0.5 * std::erfc(z0) + 0.5 * std::erfc(z1), "gaussian");
          for (int j = 0; j < grid.size(); ++j) {
            const double x = grid.time(j) - s.center;
            samples[static_cast<std::size_t>(j)] = std::exp(-x * x / (4.0 * s.width * s.width));
          }
        } else if constexpr (std::is_same_v<S, ExponentialDecay>) {
          if (!(s.rate > 0.0)) throw InvalidArgument("exponential_decay: rate must be positive");
          if (s.onset < grid.t0()) throw TruncatedMode("exponential_decay: onset precedes the grid");
          detail::check_tail(std::exp(-s.rate * (grid.t1() - s.onset)), "exponential_decay");
          for (int j = 0; j < grid.size(); ++j) {
            const double x = grid.time(j) - s.onset;
            samples[static_cast<std::size_t>(j)] = x >= 0.0 ? std::sqrt(s.rate) * std::exp(-0.5 * s.rate * x) : 0.0;
          }
        } else if constexpr (std::is_same_v<S, Flat>) {
          if (!(s.duration > 0.0)) throw InvalidArgument("flat: duration must be positive");
          const double start = s.start.value_or(grid.t0());
          const double slack = 1e-9 * grid.dt();
          const double outside = std::max(0.0, grid.t0() - start) + std::max(0.0, start + s.duration - grid.t1());
          if (outside > slack) detail::check_tail(outside / s.duration, "flat");
          for (int j = 0; j < grid.size(); ++j) {
            const double t = grid.time(j);
            samples[static_cast<std::size_t>(j)] =
                (t >= start - slack && t <= start + s.duration + slack) ? 1.0 / std::sqrt(s.duration) : 0.0;
          }
        } else {
          if (s.times.size() != s.values.size() || s.times.size() < 2) {
            throw InvalidArgument("custom: need at least two (t, value) samples of equal length");
          }
          if (!std::is_sorted(s.times.begin(), s.times.end())) throw InvalidArgument("custom: times must be sorted");
          double total = 0.0, outside = 0.0;
          for (std::size_t k = 1; k < s.times.size(); ++k) {
            const double w = 0.5 * (s.times[k] - s.times[k - 1]) * (std::norm(s.values[k]) + std::norm(s.values[k - 1]));
            total += w;
            const double mid = 0.5 * (s.times[k] + s.times[k - 1]);
            if (mid < grid.t0() || mid > grid.t1()) outside += w;
          }
          if (!(total > 0.0)) throw InvalidArgument("custom: mode has zero norm");
          detail::check_tail(outside / total, "custom");
          for (int j = 0; j < grid.size(); ++j) {
            samples[static_cast<std::size_t>(j)] = detail::interpolate_table(s, grid.time(j));
          }
        }
      },
      shape);
  return ModeFunction(grid, std::move(samples));
}

/// Interpolates a mode onto another grid and renormalizes.
inline ModeFunction resample(const ModeFunction& mode, const TimeGrid& grid) {
  if (mode.grid() == grid) return mode;
  Custom table;
  for (int j = 0; j < mode.grid().size(); ++j) {
    table.times.push_back(mode.grid().time(j));
    table.values.push_back(mode[j]);
  }
  return make_mode(table, grid);
}

/// Regularization of the coupling formulas near their singular endpoints.
struct ClampPolicy {
  /// Below this value of the denominator (1 - F for release, F for capture)
  /// the coupling is zero and the sample is flagged.
  double denominator_floor = 1e-12;
  /// Explicit amplitude ceiling; when absent, `ceiling_factor` times the
  /// grid-average |g| of the unclamped formula.
  std::optional<double> g_max;
  double ceiling_factor = 1e3;
};

/// Complex coupling g(t) of a virtual cavity. Between grid points the schedule
/// re-evaluates its defining formula from the linearly interpolated mode and
/// cumulative norm, which keeps the 1/sqrt(t) shape near a singular endpoint;
/// schedules without a formula interpolate g itself.
class CouplingSchedule {
 public:
  /// Inputs of g = sign * conj(m) / sqrt(den), clamped to g_max.
  struct Formula {
    std::vector<cplx> mode;
    std::vector<double> denominator;
    double sign = 1.0;
    double floor = 1e-12;
  };

  CouplingSchedule(TimeGrid grid, std::vector<cplx> samples, double g_max, std::vector<bool> exhausted,
                   std::optional<Formula> formula = std::nullopt)
      : grid_(grid),
        samples_(std::move(samples)),
        g_max_(g_max),
        exhausted_(std::move(exhausted)),
        formula_(std::move(formula)) {
    const auto n = static_cast<std::size_t>(grid_.size());
    if (samples_.size() != n || exhausted_.size() != n) {
      throw InvalidDimension("CouplingSchedule: sample count does not match the grid");
    }
    if (formula_ && (formula_->mode.size() != n || formula_->denominator.size() != n)) {
      throw InvalidDimension("CouplingSchedule: formula tables do not match the grid");
    }
  }

  static CouplingSchedule zero(const TimeGrid& grid) {
    const auto n = static_cast<std::size_t>(grid.size());
    return CouplingSchedule(grid, std::vector<cplx>(n, 0.0), 0.0, std::vector<bool>(n, true));
  }

  const TimeGrid& grid() const { return grid_; }
  const std::vector<cplx>& samples() const { return samples_; }
  cplx operator[](int j) const { return samples_[static_cast<std::size_t>(j)]; }
  double g_max() const { return g_max_; }
  bool exhausted(int j) const { return exhausted_[static_cast<std::size_t>(j)]; }

  cplx at(double t) const {
    if (!formula_) return interpolate(grid_, samples_, t);
    const auto [j, f] = grid_.locate(t);
    if (f == 0.0) return samples_[static_cast<std::size_t>(j)];
    const auto k = static_cast<std::size_t>(j);
    const double den = (1.0 - f) * formula_->denominator[k] + f * formula_->denominator[k + 1];
    if (den < formula_->floor) return 0.0;
    const cplx m = (1.0 - f) * formula_->mode[k] + f * formula_->mode[k + 1];
    cplx g = formula_->sign * std::conj(m) / std::sqrt(den);
    const double mag = std::abs(g);
    if (mag > g_max_) g *= g_max_ / mag;
    return g;
  }

 private:
  TimeGrid grid_;
  std::vector<cplx> samples_;
  double g_max_;
  std::vector<bool> exhausted_;
  std::optional<Formula> formula_;
};

namespace detail {

inline CouplingSchedule coupling_from(const ModeFunction& mode, const ClampPolicy& policy, bool release) {
  const auto& grid = mode.grid();
  const auto n = static_cast<std::size_t>(grid.size());
  CouplingSchedule::Formula formula{mode.samples(), std::vector<double>(n), release ? 1.0 : -1.0,
                                    policy.denominator_floor};
  std::vector<cplx> raw(n, 0.0);
  std::vector<bool> flag(n, false);
  double sum = 0.0;
  int counted = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double F = mode.cumulative()[j];
    const double den = release ? 1.0 - F : F;
    formula.denominator[j] = den;
    if (den < policy.denominator_floor) {
      flag[j] = true;
      continue;
    }
    raw[j] = formula.sign * std::conj(mode.samples()[j]) / std::sqrt(den);
    sum += std::abs(raw[j]);
    ++counted;
  }
  const double g_max = policy.g_max.value_or(counted > 0 ? policy.ceiling_factor * sum / counted : 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double mag = std::abs(raw[j]);
    if (mag > g_max) raw[j] *= g_max / mag;
  }
  return CouplingSchedule(grid, std::move(raw), g_max, std::move(flag), std::move(formula));
}

}  // namespace detail

/// Input-cavity coupling g_u(t) = u*(t) / sqrt(1 - F(t)), which releases the
/// intracavity state into the wave packet u.
inline CouplingSchedule gu_from_mode(const ModeFunction& u, const ClampPolicy& policy = {}) {
  return detail::coupling_from(u, policy, true);
}

/// Output-cavity coupling g_v(t) = -v*(t) / sqrt(F(t)), which absorbs the
/// wave packet v.
inline CouplingSchedule gv_from_mode(const ModeFunction& v, const ClampPolicy& policy = {}) {
  return detail::coupling_from(v, policy, false);
}

/// <a|b> = integral of a*(t) b(t) dt.
inline cplx overlap(const ModeFunction& a, const ModeFunction& b) {
  if (!(a.grid() == b.grid())) throw InvalidArgument("overlap: modes live on different grids");
  std::vector<cplx> f(a.samples().size());
  for (std::size_t j = 0; j < f.size(); ++j) f[j] = std::conj(a.samples()[j]) * b.samples()[j];
  return trapezoid(f, a.grid().dt());
}

/// Reflection coefficient of a one-sided cavity with decay rate gamma at
/// detuning delta, r = [i(w - delta) + gamma/2] / [i(w - delta) - gamma/2].
inline cplx reflection_coefficient(double omega, double gamma, double delta) {
  const cplx x = kI * (omega - delta);
  return (x + 0.5 * gamma) / (x - 0.5 * gamma);
}

inline constexpr double kReflectTailTolerance = 1e-2;

/// Reflected envelope v(w) = r(w) u(w) with the transform u(w) = int u(t) e^{iwt} dt,
/// evaluated on the grid of u before renormalization. The input is zero-padded
/// to at least four times its length to suppress wrap-around.
inline std::vector<cplx> reflect_samples(const ModeFunction& u, double gamma, double delta) {
  const auto& grid = u.grid();
  if (!(gamma > 0.0)) throw InvalidArgument("reflect_mode: gamma must be positive");
  if (grid.dt() > 0.1 / gamma * (1 + 1e-12)) {
    throw InvalidArgument("reflect_mode: grid spacing must be <= 0.1/gamma to resolve the cavity linewidth");
  }
  const std::size_t n = static_cast<std::size_t>(grid.size());
  std::size_t len = 1;
  while (len < 4 * n) len <<= 1;
  std::vector<cplx> padded(len, 0.0), spectrum;
  std::copy(u.samples().begin(), u.samples().end(), padded.begin());

  Eigen::FFT<double> fft;
  fft.fwd(spectrum, padded);
  const double dw = 2.0 * std::numbers::pi / (static_cast<double>(len) * grid.dt());
  for (std::size_t k = 0; k < len; ++k) {
    const double signed_k = k < len / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(len);
    // fwd uses e^{-i 2 pi k j / len}, so bin k carries w = -k dw in the e^{iwt} convention.
    spectrum[k] *= reflection_coefficient(-signed_k * dw, gamma, delta);
  }
  std::vector<cplx> filtered;
  fft.inv(filtered, spectrum);

  double wrap = 0.0, outside = 0.0, total = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    const double p = std::norm(filtered[j]) * grid.dt();
    total += p;
    if (j >= n) outside += p;
    if (j >= len - len / 8) wrap += p;
  }
  if (wrap > 1e-8 * total) {
    throw TruncatedMode("reflect_mode: filtered pulse reaches the end of the padded window (aliasing)");
  }
  if (outside > kReflectTailTolerance * total) {
    std::ostringstream msg;
    msg << "reflect_mode: reflected pulse leaves " << outside / total << " of its norm beyond t1; extend the grid";
    throw TruncatedMode(msg.str());
  }
  filtered.resize(n);
  return filtered;
}

inline ModeFunction reflect_mode(const ModeFunction& u, double gamma, double delta) {
  return ModeFunction(u.grid(), reflect_samples(u, gamma, delta));
}

/// Reads a two- or three-column table (t, Re u[, Im u]); '#' starts a comment,
/// columns may be separated by whitespace or commas.
inline Custom read_mode_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open mode file " + path);
  Custom table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::vector<double> cols;
    double x;
    while (fields >> x) cols.push_back(x);
    if (!fields.eof()) throw ConfigError(lineno, "mode file " + path + ": non-numeric field");
    if (cols.empty()) continue;
    if (cols.size() < 2 || cols.size() > 3) throw ConfigError(lineno, "mode file " + path + ": expected 2 or 3 columns");
    table.times.push_back(cols[0]);
    table.values.emplace_back(cols[1], cols.size() == 3 ? cols[2] : 0.0);
  }
  if (table.times.size() < 2) throw InvalidArgument("mode file " + path + " has fewer than two samples");
  return table;
}

}  // namespace qpulse
