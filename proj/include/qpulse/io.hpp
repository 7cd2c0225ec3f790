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

// File formats.
//
// Density-matrix checkpoint (little-endian):
//   char[8]  "QPULSERH"
//   u32      format version (1)
//   u32      number of tensor factors F
//   u32[F]   factor dimensions, ordered u, scatterer factors..., v
//   u64      D, number of retained basis states
//   u64[D]   product-basis index of each retained state (ascending)
//   f64[2*D*D] rho in row-major order as (re, im) pairs

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qpulse/analyze.hpp"
#include "qpulse/errors.hpp"
#include "qpulse/hilbert.hpp"
#include "qpulse/pulses.hpp"

namespace qpulse {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'Q', 'P', 'U', 'L', 'S', 'E', 'R', 'H'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint: unexpected end of file");
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const DensityMatrix& rho) {
  const auto& space = rho.space();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(space.dims().size()));
  for (int d : space.dims()) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  const auto n = space.dimension();
  detail::put<std::uint64_t>(out, n);
  for (std::size_t p = 0; p < n; ++p) detail::put<std::uint64_t>(out, space.full_index(p));
  const Matrix& m = rho.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      detail::put<double>(out, m(r, c).real());
      detail::put<double>(out, m(r, c).imag());
    }
  }
}

inline void write_checkpoint(const std::string& path, const DensityMatrix& rho) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_checkpoint(out, rho);
}

inline DensityMatrix read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw Error("checkpoint: bad magic");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  const auto nf = detail::get<std::uint32_t>(in);
  if (nf == 0 || nf > 64) throw Error("checkpoint: implausible factor count");
  std::vector<int> dims;
  for (std::uint32_t k = 0; k < nf; ++k) dims.push_back(static_cast<int>(detail::get<std::uint32_t>(in)));
  const auto n = detail::get<std::uint64_t>(in);
  if (n == 0 || n > (1u << 20)) throw Error("checkpoint: implausible dimension");
  std::vector<std::size_t> kept(n);
  for (auto& k : kept) k = detail::get<std::uint64_t>(in);
  auto space = std::make_shared<const TensorSpace>(dims, kept);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double re = detail::get<double>(in);
      const double im = detail::get<double>(in);
      m(r, c) = cplx(re, im);
    }
  }
  return DensityMatrix(std::move(space), std::move(m));
}

inline DensityMatrix read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_checkpoint(in);
}

/// `# t re im` header, one sample per line; readable by read_mode_file.
inline void write_mode(std::ostream& out, const ModeFunction& mode) {
  out << "# t re im\n" << std::setprecision(17);
  for (int j = 0; j < mode.grid().size(); ++j) {
    out << mode.grid().time(j) << ' ' << mode[j].real() << ' ' << mode[j].imag() << '\n';
  }
}

/// First row `p\x,x_0,...,x_n`; each following row `p_i,W(x_0,p_i),...`.
inline void write_wigner(std::ostream& out, const WignerGrid& w) {
  std::ostringstream line;
  line << std::setprecision(17) << "p\\x";
  for (double x : w.xs) line << ',' << x;
  out << line.str() << '\n';
  for (std::size_t i = 0; i < w.ps.size(); ++i) {
    line.str("");
    line << w.ps[i];
    for (std::size_t j = 0; j < w.xs.size(); ++j) {
      line << ',' << w.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    out << line.str() << '\n';
  }
}

inline void write_occupations(std::ostream& out, const std::vector<double>& n) {
  out << "index,occupation\n" << std::setprecision(17);
  for (std::size_t i = 0; i < n.size(); ++i) out << i + 1 << ',' << n[i] << '\n';
}

}  // namespace qpulse
