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

// Acceptance suite: runs the bundled scenarios and checks each criterion at its
// stated tolerance. Prints one PASS/FAIL line per criterion; exits non-zero if
// any criterion fails.

#include <chrono>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "qpulse/qpulse.hpp"

using namespace qpulse;
using Counts = std::array<int, 3>;

namespace {

std::string scenario_path(const std::string& name) { return std::string(QPULSE_SCENARIO_DIR) + "/" + name + ".cfg"; }

struct TimedRun {
  ScenarioConfig cfg;
  RunResult result;
  double seconds;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class Suite {
 public:
  const TimedRun& run(const std::string& name) {
    auto it = runs_.find(name);
    if (it != runs_.end()) return it->second;
    auto cfg = load_config(scenario_path(name));
    const auto start = std::chrono::steady_clock::now();
    auto result = run_scenario(cfg);
    const double s = seconds_since(start);
    std::cout << "  [" << name << "] " << result.summary() << " (" << std::fixed << std::setprecision(1) << s << " s)"
              << std::defaultfloat << '\n';
    return runs_.emplace(name, TimedRun{std::move(cfg), std::move(result), s}).first->second;
  }

  void check(int id, const std::string& title, const std::function<std::pair<bool, std::string>()>& body) {
    bool ok = false;
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    try {
      std::tie(ok, detail) = body();
    } catch (const std::exception& e) {
      detail = std::string("error: ") + e.what();
    }
    std::ostringstream line;
    line << (ok ? "PASS" : "FAIL") << " criterion " << id << " (" << title << "): " << detail << " [" << std::fixed
         << std::setprecision(1) << seconds_since(start) << " s]";
    std::cout << line.str() << std::endl;
    if (!ok) ++failures_;
  }

  int failures() const { return failures_; }

 private:
  std::map<std::string, TimedRun> runs_;
  int failures_ = 0;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

bool within(double value, double target, double tol) { return std::abs(value - target) <= tol; }

// Worst-case invariant figures of one run.
struct Invariants {
  double drift_rate = 0.0;
  double min_eigenvalue = 0.0;
  double bookkeeping = 0.0;
};

Invariants invariants_of(const TimedRun& r) {
  Invariants inv;
  const auto& s = r.result.integration.series;
  const auto t = s.times();
  const auto tr = s.channel("trace");
  const auto book = s.channel("bookkeeping");
  for (std::size_t k = 1; k < t.size(); ++k) {
    inv.drift_rate = std::max(inv.drift_rate, std::abs(tr[k] - tr[0]) / (t[k] - t[0]));
    inv.bookkeeping = std::max(inv.bookkeeping, std::abs(book[k] - book[0]));
  }
  inv.min_eigenvalue = 1.0;
  for (const auto& c : r.result.integration.checkpoints) inv.min_eigenvalue = std::min(inv.min_eigenvalue, c.min_eigenvalue);
  return inv;
}

}  // namespace

int main() {
  Suite suite;
  std::cout << std::setprecision(6);

  suite.check(1, "empty-cavity transfer", [&] {
    const auto& r = suite.run("empty_cavity");
    const auto& s = r.result.integration.series;
    const double nv = s.final("n_v"), lost = s.final("lost_output");
    const bool ok = nv >= 0.99 && lost <= 1e-2 && r.seconds < 10.0;
    return std::make_pair(ok, "n_v=" + fmt(nv) + " (>= 0.99), int I_out=" + fmt(lost) + " (<= 1e-2), runtime " +
                                  fmt(r.seconds, 3) + " s (< 10 s)");
  });

  suite.check(2, "stimulated emission", [&] {
    const auto& r = suite.run("stimulated_emission");
    const auto& s = r.result.integration.series;
    const double p2 = s.final("P_v2"), lost = s.final("lost_output");
    const bool ok = within(p2, 0.97, 0.01) && within(lost, 0.07, 0.01) && r.seconds < 10.0 && r.result.dimension <= 16;
    return std::make_pair(ok, "P(2)=" + fmt(p2) + " (0.97 +- 0.01), lost=" + fmt(lost) + " (0.07 +- 0.01), dim=" +
                                  std::to_string(r.result.dimension) + ", runtime " + fmt(r.seconds, 3) + " s");
  });

  auto cat_check = [&](const std::string& a, const std::string& b, double fa, double fb, double tol) {
    return [&suite, a, b, fa, fb, tol] {
      const auto& ra = suite.run(a);
      const auto& rb = suite.run(b);
      const double xa = *ra.result.fidelity, xb = *rb.result.fidelity;
      const double width = std::get<Gaussian>(ra.cfg.input_shape).width;
      const bool ok = within(xa, fa, tol) && within(xb, fb, tol);
      return std::make_pair(ok, "F(alpha=1.4)=" + fmt(xa) + " (" + fmt(fa) + " +- " + fmt(tol) + "), F(alpha=2)=" +
                                    fmt(xb) + " (" + fmt(fb) + " +- " + fmt(tol) + "), width " + fmt(width) +
                                    " us, runtimes " + fmt(ra.seconds, 3) + " s / " + fmt(rb.seconds, 3) + " s");
    };
  };
  suite.check(3, "cat state, ideal", cat_check("cat", "cat_alpha2", 0.98, 0.96, 0.01));
  suite.check(4, "cat state, lossy", cat_check("cat_lossy", "cat_alpha2_lossy", 0.72, 0.56, 0.05));

  suite.check(5, "phase noise", [&] {
    const auto& r = suite.run("phase_noise");
    const auto& res = r.result;
    const auto mode = output_mode_state(res.integration.final_state);
    const double purity = mode.purity();
    const double nv = mode_number(mode);
    const double mean = std::abs(mode_mean(mode));
    const double alpha = std::abs(r.cfg.input_state.alpha);
    const double bound = alpha * std::sqrt(nv / (alpha * alpha));
    const double lost = res.integration.series.final("lost_output");
    const auto in_w = wigner(mode_state(coherent_state(r.cfg.input_truncation + 1, r.cfg.input_state.alpha)),
                             r.cfg.analysis.wigner_spec);
    const double spread_in = azimuthal_spread(in_w), spread_out = azimuthal_spread(*res.wigner);
    const bool ok = purity < 0.99 && mean < bound && lost > 0.0 && spread_out > spread_in;
    return std::make_pair(ok, "purity=" + fmt(purity) + " (< 0.99), |<a_v>|=" + fmt(mean) + " (< " + fmt(bound) +
                                  "), int I_out=" + fmt(lost) + " (> 0), azimuthal spread " + fmt(spread_out) +
                                  " vs input " + fmt(spread_in));
  });

  suite.check(6, "oracle equivalence", [&] {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> gamma_d(0.5, 2.0), delta_d(-1.0, 1.0), width_d(0.4, 1.0), center_d(3.5, 5.0);
    double worst = 0.0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
      const double gamma = gamma_d(rng), delta = delta_d(rng), width = width_d(rng), center = center_d(rng);
      const TimeGrid grid(0.0, 20.0, 2001);
      const auto u = make_mode(Gaussian{center, width}, grid);
      const auto v = reflect_mode(u, gamma, -delta);
      const auto gu = gu_from_mode(u), gv = gv_from_mode(v);
      PresetParams p;
      p.gamma = gamma;
      p.detuning = delta;
      const CascadeModel model(preset(Preset::empty_cavity, p), 2, 2, gu, gv, 1);
      const auto rho0 = initial_state(model, fock_state(2, 1), model.system().initial);
      IntegrationConfig cfg;
      cfg.rtol = 1e-10;
      cfg.atol = 1e-12;
      cfg.stride = 10;
      const auto res = integrate(model, rho0, cfg);
      const auto amp = single_excitation_evolve(gu, gv, {gamma, delta, 0.0}, Counts{1, 0, 0});
      const auto idx = sample_indices(grid, cfg.stride);
      const auto nu = res.series.channel("n_u"), nc = res.series.channel("n_c"), nv = res.series.channel("n_v");
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& a = amp[static_cast<std::size_t>(idx[k])];
        worst = std::max({worst, std::abs(nu[k] - std::norm(a.psi_u)), std::abs(nc[k] - std::norm(a.psi_s)),
                          std::abs(nv[k] - std::norm(a.psi_v))});
      }
    }
    return std::make_pair(worst <= 1e-6, std::to_string(trials) + " random scenarios, max |ME - oracle| = " +
                                             fmt(worst) + " (<= 1e-6)");
  });

  suite.check(7, "mode-finder self-consistency", [&] {
    const auto cfg = load_config(scenario_path("empty_cavity"));
    const auto grid = cfg.grid();
    const auto u = make_mode(cfg.input_shape, grid);
    const auto found = find_modes(cfg, 1);
    const auto top = resample(found.modes.front().mode, grid);
    const double n1 = found.modes.front().occupation;
    const double ov = std::norm(overlap(top, output_mode(cfg, u)));
    const auto spec = preset(cfg.preset, cfg.params);
    const CascadeModel model(spec, cfg.input_truncation + 1, cfg.output_truncation + 1, gu_from_mode(u, cfg.clamp),
                             gv_from_mode(top, cfg.clamp), cfg.excitation_cap);
    const auto res = integrate(model, initial_state(model, input_vector(cfg), spec.initial), cfg.integration);
    const double nv = res.series.final("n_v");
    const bool ok = ov >= 0.999 && std::abs(nv - n1) <= 1e-3;
    return std::make_pair(ok, "|<top|v>|^2=" + fmt(ov) + " (>= 0.999), n_1=" + fmt(n1) + ", recaptured n_v=" + fmt(nv) +
                                  " (|diff| <= 1e-3)");
  });

  suite.check(8, "invariant suite", [&] {
    bool ok = true;
    std::ostringstream d;
    for (const char* name : {"empty_cavity", "stimulated_emission", "phase_noise", "cat", "cat_alpha2", "cat_lossy",
                             "cat_alpha2_lossy"}) {
      const auto inv = invariants_of(suite.run(name));
      const bool good = inv.drift_rate <= 1e-8 && inv.min_eigenvalue >= -1e-8 && inv.bookkeeping <= 1e-6;
      ok = ok && good;
      d << name << (good ? "" : " [violated]") << ": drift/t=" << fmt(inv.drift_rate, 3)
        << " min_eig=" << fmt(inv.min_eigenvalue, 3) << " book=" << fmt(inv.bookkeeping, 3) << "; ";
    }
    return std::make_pair(ok, d.str() + "limits 1e-8 / -1e-8 / 1e-6");
  });

  std::cout << (suite.failures() == 0 ? "all criteria passed" : std::to_string(suite.failures()) + " criteria failed")
            << std::endl;
  return suite.failures() == 0 ? 0 : 1;
}
