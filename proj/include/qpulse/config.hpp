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

// Scenario configuration files.
//
// Plain-text sections of `key = value` lines; `#` starts a comment. Every
// dimensional quantity carries a unit after whitespace, for example
//   gamma = 1 gamma          (runs with units = gamma; times in 1/gamma)
//   center = 3.5 /gamma
//   coupling = 2pi*15.6 MHz  (runs with units = us; times in microseconds)
//   center = 3 us
// A value is a product or quotient of numbers, `pi` or `<number>pi`.

#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qpulse/analyze.hpp"
#include "qpulse/cascade.hpp"
#include "qpulse/errors.hpp"
#include "qpulse/evolve.hpp"
#include "qpulse/pulses.hpp"

namespace qpulse {

enum class TimeUnits { gamma, microseconds };
enum class OutputChoice { reflect, same_as_input, shape, from_g1 };

struct InputState {
  enum class Kind { fock, coherent } kind = Kind::fock;
  int photons = 1;
  cplx alpha = 0.0;

  /// Smallest input truncation N that holds the state.
  int required_truncation() const { return kind == Kind::fock ? photons : coherent_truncation(alpha); }
};

struct AnalysisConfig {
  bool cat_fidelity = false;
  std::optional<cplx> cat_alpha;  // defaults to the input amplitude
  int fock_channels = 0;          // record P(n_v = k) for k < fock_channels
  std::optional<int> postselect;  // atom level for the Wigner postselection
  bool wigner = false;
  WignerSpec wigner_spec{};
  int g1_stride = 10;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path source_dir = ".";
  TimeUnits units = TimeUnits::gamma;
  Preset preset = Preset::empty_cavity;
  PresetParams params;

  ModeShape input_shape = Gaussian{3.0, 0.5};
  InputState input_state;
  int input_truncation = 1;

  OutputChoice output = OutputChoice::reflect;
  std::optional<ModeShape> output_shape;
  int output_truncation = 1;

  double t0 = 0.0, t1 = 10.0;
  int samples = 1001;

  IntegrationConfig integration;
  std::optional<int> excitation_cap;  // resolved: nullopt means no cap
  ClampPolicy clamp;

  AnalysisConfig analysis;

  TimeGrid grid() const { return TimeGrid(t0, t1, samples); }
};

namespace detail {

struct Entry {
  std::string value;
  int line;
};

using Section = std::map<std::string, Entry>;

struct ParsedFile {
  std::map<std::string, Section> sections;
  std::map<std::string, int> header_lines;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline ParsedFile parse_sections(std::istream& in) {
  ParsedFile file;
  auto& out = file.sections;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(lineno, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (out.count(section)) throw ConfigError(lineno, "duplicate section [" + section + "]");
      out[section];
      file.header_lines[section] = lineno;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(lineno, "expected 'key = value'");
    if (section.empty()) throw ConfigError(lineno, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(lineno, "empty key or value");
    auto& sec = out[section];
    if (sec.count(key)) throw ConfigError(lineno, "duplicate key '" + key + "'");
    sec[key] = {value, lineno};
  }
  return file;
}

inline double parse_factor(const std::string& tok, int line) {
  if (tok == "pi") return std::numbers::pi;
  std::string num = tok;
  double scale = 1.0;
  if (num.size() > 2 && num.substr(num.size() - 2) == "pi") {
    num = num.substr(0, num.size() - 2);
    scale = std::numbers::pi;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(num, &used);
  } catch (const std::exception&) {
    throw ConfigError(line, "cannot parse number '" + tok + "'");
  }
  if (used != num.size()) throw ConfigError(line, "cannot parse number '" + tok + "'");
  return v * scale;
}

/// Evaluates `a*b/c...` left to right.
inline double evaluate(const std::string& expr, int line) {
  double acc = 1.0;
  char op = '*';
  std::string tok;
  auto apply = [&]() {
    if (tok.empty()) throw ConfigError(line, "malformed expression '" + expr + "'");
    const double f = parse_factor(tok, line);
    if (op == '*') {
      acc *= f;
    } else {
      if (f == 0.0) throw ConfigError(line, "division by zero in '" + expr + "'");
      acc /= f;
    }
    tok.clear();
  };
  for (std::size_t i = 0; i < expr.size(); ++i) {
    const char ch = expr[i];
    if (ch == '*' || ch == '/') {
      apply();
      op = ch;
    } else {
      tok.push_back(ch);
    }
  }
  apply();
  if (!std::isfinite(acc)) throw ConfigError(line, "value is not finite");
  return acc;
}

}  // namespace detail

/// Typed access to one section; tracks which keys were used so leftovers can be
/// reported.
class SectionReader {
 public:
  SectionReader(std::string name, detail::Section entries, TimeUnits units, int header_line)
      : name_(std::move(name)), entries_(std::move(entries)), units_(units), header_line_(header_line) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  int line(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

  std::string text(const std::string& key) {
    return require(key).value;
  }
  std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text(key) : fallback; }

  double number(const std::string& key) {
    const auto& e = require(key);
    return detail::evaluate(e.value, e.line);
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key) {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(line(key), key + " must be an integer");
    return static_cast<int>(v);
  }
  int integer(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& e = require(key);
    if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
    if (e.value == "false" || e.value == "no" || e.value == "0") return false;
    throw ConfigError(e.line, key + " must be true or false");
  }

  double rate(const std::string& key) { return quantity(key, true); }
  double rate(const std::string& key, double fallback) { return has(key) ? rate(key) : fallback; }
  double time(const std::string& key) { return quantity(key, false); }
  double time(const std::string& key, double fallback) { return has(key) ? time(key) : fallback; }

  /// Throws on the first key that was never read.
  void finish() const {
    for (const auto& [key, e] : entries_) {
      if (!used_.count(key)) throw ConfigError(e.line, "unknown key '" + key + "' in [" + name_ + "]");
    }
  }

 private:
  const detail::Entry& require(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw ConfigError(header_line_, header_line_ ? "missing key '" + key + "' in [" + name_ + "]"
                                                   : "missing section [" + name_ + "] (needs key '" + key + "')");
    }
    used_.insert(key);
    return it->second;
  }

  double quantity(const std::string& key, bool is_rate) {
    const auto& e = require(key);
    const auto sp = e.value.find_last_of(" \t");
    if (sp == std::string::npos) {
      throw ConfigError(e.line, key + " needs a unit (" + std::string(is_rate ? "rate" : "time") + ")");
    }
    const std::string expr = detail::trim(e.value.substr(0, sp));
    const std::string unit = e.value.substr(sp + 1);
    return detail::evaluate(expr, e.line) * unit_scale(unit, is_rate, e.line);
  }

  double unit_scale(const std::string& unit, bool is_rate, int line) const {
    static const std::map<std::string, double> gamma_rates{{"gamma", 1.0}};
    static const std::map<std::string, double> gamma_times{{"/gamma", 1.0}, {"1/gamma", 1.0}};
    static const std::map<std::string, double> us_rates{{"Hz", 1e-6},  {"kHz", 1e-3}, {"MHz", 1.0}, {"GHz", 1e3},
                                                        {"/s", 1e-6},  {"/ms", 1e-3}, {"/us", 1.0}, {"/ns", 1e3}};
    static const std::map<std::string, double> us_times{{"s", 1e6}, {"ms", 1e3}, {"us", 1.0}, {"ns", 1e-3}};
    const auto& table = units_ == TimeUnits::gamma ? (is_rate ? gamma_rates : gamma_times)
                                                   : (is_rate ? us_rates : us_times);
    const auto it = table.find(unit);
    if (it == table.end()) {
      std::string allowed;
      for (const auto& [u, s] : table) allowed += (allowed.empty() ? "" : ", ") + u;
      throw ConfigError(line, "unit '" + unit + "' is not a " + (is_rate ? "rate" : "time") + " unit of this run (" +
                                  allowed + ")");
    }
    return it->second;
  }

  std::string name_;
  detail::Section entries_;
  TimeUnits units_;
  int header_line_;
  std::set<std::string> used_;
};

namespace detail {

inline ModeShape read_shape(SectionReader& sec, const std::filesystem::path& base) {
  const std::string kind = sec.text("shape");
  if (kind == "gaussian") return Gaussian{sec.time("center"), sec.time("width")};
  if (kind == "exponential") return ExponentialDecay{sec.rate("rate"), sec.time("onset", 0.0)};
  if (kind == "flat") {
    Flat f{sec.time("duration"), std::nullopt};
    if (sec.has("start")) f.start = sec.time("start");
    return f;
  }
  if (kind == "file") {
    auto path = std::filesystem::path(sec.text("file"));
    if (path.is_relative()) path = base / path;
    return read_mode_file(path.string());
  }
  throw ConfigError(sec.line("shape"), "unknown shape '" + kind + "' (gaussian, exponential, flat, file)");
}

inline InputState read_input_state(SectionReader& sec) {
  InputState s;
  if (!sec.has("state")) return s;
  const int line = sec.line("state");
  std::istringstream ss(sec.text("state"));
  std::string kind;
  ss >> kind;
  std::vector<std::string> args;
  for (std::string a; ss >> a;) args.push_back(a);
  if (kind == "fock" && args.size() == 1) {
    const double n = evaluate(args[0], line);
    if (n < 0 || n != std::floor(n)) throw ConfigError(line, "fock photon number must be a non-negative integer");
    s.kind = InputState::Kind::fock;
    s.photons = static_cast<int>(n);
    return s;
  }
  if (kind == "coherent" && (args.size() == 1 || args.size() == 2)) {
    s.kind = InputState::Kind::coherent;
    s.alpha = cplx(evaluate(args[0], line), args.size() == 2 ? evaluate(args[1], line) : 0.0);
    return s;
  }
  throw ConfigError(line, "state must be 'fock <n>' or 'coherent <re> [<im>]'");
}

}  // namespace detail

inline ScenarioConfig parse_config(std::istream& in, const std::filesystem::path& source_dir = ".") {
  auto parsed = detail::parse_sections(in);
  auto& sections = parsed.sections;
  for (const auto& [name, sec] : sections) {
    static const std::set<std::string> known{"run", "system", "input", "output", "grid", "integrator", "analysis"};
    if (!known.count(name)) throw ConfigError(parsed.header_lines[name], "unknown section [" + name + "]");
  }
  auto header = [&](const std::string& name) {
    const auto it = parsed.header_lines.find(name);
    return it == parsed.header_lines.end() ? 0 : it->second;
  };
  ScenarioConfig cfg;
  cfg.source_dir = source_dir;

  SectionReader run("run", sections["run"], TimeUnits::gamma, header("run"));
  cfg.name = run.text("name", "scenario");
  const std::string units = run.text("units", "gamma");
  if (units == "gamma") {
    cfg.units = TimeUnits::gamma;
  } else if (units == "us") {
    cfg.units = TimeUnits::microseconds;
  } else {
    throw ConfigError(run.line("units"), "units must be 'gamma' or 'us'");
  }
  run.finish();
  auto reader = [&](const std::string& name) { return SectionReader(name, sections[name], cfg.units, header(name)); };

  auto sys = reader("system");
  try {
    cfg.preset = preset_from_name(sys.text("preset"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(sys.line("preset"), e.what());
  }
  auto& p = cfg.params;
  p.gamma = sys.rate("gamma");
  p.detuning = sys.rate("detuning", 0.0);
  if (cfg.preset == Preset::phase_noise) p.tau_jit = sys.time("tau_jit");
  if (cfg.preset == Preset::empty_cavity || cfg.preset == Preset::phase_noise || cfg.preset == Preset::atom_in_cavity) {
    p.cavity_levels = sys.integer("cavity_levels", cfg.preset == Preset::atom_in_cavity ? 4 : 2);
  }
  if (cfg.preset == Preset::atom_in_cavity) {
    p.coupling = sys.rate("coupling");
    p.atom_decay = sys.rate("atom_decay", 0.0);
    p.kappa_oc = sys.rate("kappa_oc", 0.0);
  }
  if (cfg.preset == Preset::two_level_atom || cfg.preset == Preset::atom_in_cavity) {
    const std::string atom = sys.text("atom", "ground");
    if (atom == "ground") {
      p.atom = AtomInit::ground;
    } else if (atom == "excited") {
      p.atom = AtomInit::excited;
    } else if (atom == "superposition") {
      p.atom = AtomInit::superposition;
    } else {
      throw ConfigError(sys.line("atom"), "atom must be ground, excited or superposition");
    }
  }
  sys.finish();

  auto grid = reader("grid");
  cfg.t0 = grid.time("t0");
  cfg.t1 = grid.time("t1");
  cfg.samples = grid.integer("samples");
  if (!(cfg.t1 > cfg.t0)) throw ConfigError(grid.line("t1"), "t1 must exceed t0");
  if (cfg.samples < 2) throw ConfigError(grid.line("samples"), "samples must be >= 2");
  grid.finish();

  auto input = reader("input");
  cfg.input_shape = detail::read_shape(input, source_dir);
  cfg.input_state = detail::read_input_state(input);
  const int need_in = cfg.input_state.required_truncation();
  cfg.input_truncation = input.integer("truncation", need_in);
  if (cfg.input_truncation < need_in) {
    throw ConfigError(input.line("truncation"), "input truncation " + std::to_string(cfg.input_truncation) +
                                                    " is below the required " + std::to_string(need_in));
  }
  input.finish();

  // Initial scatterer excitation, needed for the output truncation check.
  const SystemSpec spec = preset(cfg.preset, cfg.params);
  int scatterer_exc = 0;
  for (int k = 0; k < spec.d; ++k) {
    if (std::abs(spec.initial(k, k)) > 0.0) scatterer_exc = std::max(scatterer_exc, spec.excitation[static_cast<std::size_t>(k)]);
  }

  auto output = reader("output");
  const std::string mode = output.text("mode", "reflect");
  if (mode == "reflect") {
    cfg.output = OutputChoice::reflect;
    if (cfg.preset != Preset::empty_cavity && cfg.preset != Preset::phase_noise) {
      throw ConfigError(output.line("mode"), "mode = reflect needs a cavity preset (empty_cavity or phase_noise)");
    }
  } else if (mode == "same_as_input") {
    cfg.output = OutputChoice::same_as_input;
  } else if (mode == "from_g1") {
    cfg.output = OutputChoice::from_g1;
  } else if (mode == "shape") {
    cfg.output = OutputChoice::shape;
    cfg.output_shape = detail::read_shape(output, source_dir);
  } else {
    throw ConfigError(output.line("mode"), "mode must be reflect, same_as_input, shape or from_g1");
  }
  const int need_out = need_in + scatterer_exc;
  cfg.output_truncation = output.integer("truncation", need_out);
  if (cfg.output_truncation < need_out) {
    throw ConfigError(output.line("truncation"), "output truncation " + std::to_string(cfg.output_truncation) +
                                                     " is below the required " + std::to_string(need_out));
  }
  output.finish();

  auto integ = reader("integrator");
  auto& ic = cfg.integration;
  const std::string method = integ.text("method", "rk45");
  if (method == "rk45") {
    ic.method = Method::rk45_adaptive;
  } else if (method == "rk4") {
    ic.method = Method::rk4_fixed;
  } else {
    throw ConfigError(integ.line("method"), "method must be rk45 or rk4");
  }
  ic.rtol = integ.number("rtol", ic.rtol);
  ic.atol = integ.number("atol", ic.atol);
  ic.dt = integ.time("dt", 0.0);
  ic.stride = integ.integer("stride", 1);
  ic.renormalize_trace = integ.boolean("renormalize_trace", false);
  ic.eigen_checkpoints = integ.integer("eigen_checkpoints", 0);
  const std::string cap = integ.text("excitation_cap", "auto");
  if (cap == "auto") {
    cfg.excitation_cap = cfg.input_truncation + scatterer_exc;
  } else if (cap == "none") {
    cfg.excitation_cap.reset();
  } else {
    cfg.excitation_cap = integ.integer("excitation_cap");
    if (*cfg.excitation_cap < cfg.input_truncation + scatterer_exc) {
      throw ConfigError(integ.line("excitation_cap"), "excitation_cap is below the initial excitation");
    }
  }
  if (integ.has("g_max")) cfg.clamp.g_max = integ.number("g_max");
  cfg.clamp.denominator_floor = integ.number("denominator_floor", cfg.clamp.denominator_floor);
  try {
    ic.validate(cfg.grid());
  } catch (const InvalidArgument& e) {
    throw ConfigError(integ.line("method"), e.what());
  }
  integ.finish();

  auto an = reader("analysis");
  auto& a = cfg.analysis;
  const std::string fid = an.text("fidelity", "none");
  if (fid == "cat") {
    a.cat_fidelity = true;
    if (cfg.preset != Preset::atom_in_cavity) throw ConfigError(an.line("fidelity"), "cat fidelity needs the atom_in_cavity preset");
  } else if (fid != "none") {
    throw ConfigError(an.line("fidelity"), "fidelity must be cat or none");
  }
  if (an.has("cat_alpha")) a.cat_alpha = cplx(an.number("cat_alpha"), 0.0);
  if (a.cat_fidelity) {
    const cplx alpha = a.cat_alpha.value_or(cfg.input_state.alpha);
    if (cfg.output_truncation < coherent_truncation(alpha)) {
      throw ConfigError(an.line("fidelity"), "output truncation is below |alpha|^2 + 6|alpha| for the cat fidelity");
    }
  }
  a.fock_channels = an.integer("fock_channels", 0);
  if (a.fock_channels < 0 || a.fock_channels > cfg.output_truncation + 1) {
    throw ConfigError(an.line("fock_channels"), "fock_channels must lie in [0, output truncation + 1]");
  }
  if (an.has("postselect")) {
    const std::string ps = an.text("postselect");
    if (cfg.preset != Preset::atom_in_cavity) throw ConfigError(an.line("postselect"), "postselect needs an atom preset");
    if (ps == "down") {
      a.postselect = AtomLevels{}.down;
    } else if (ps == "up") {
      a.postselect = AtomLevels{}.up;
    } else {
      throw ConfigError(an.line("postselect"), "postselect must be down or up");
    }
  }
  a.wigner = an.boolean("wigner", false);
  a.wigner_spec.range = an.number("wigner_range", a.wigner_spec.range);
  a.wigner_spec.resolution = an.integer("wigner_resolution", a.wigner_spec.resolution);
  a.g1_stride = an.integer("g1_stride", a.g1_stride);
  if (a.g1_stride < 1 || (cfg.samples - 1) % a.g1_stride != 0) {
    throw ConfigError(an.line("g1_stride"), "g1_stride must divide samples - 1");
  }
  an.finish();
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  return parse_config(in, std::filesystem::path(path).parent_path());
}

}  // namespace qpulse
