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

// Operators and states on truncated tensor-product Hilbert spaces.
//
// The cascaded model always uses three slots in the fixed order (u, s, v):
// input virtual cavity, scatterer, output virtual cavity. Product-state
// indices follow Kronecker ordering with u most significant. A scatterer with
// internal structure (atom and cavity) is a single slot whose dimension is the
// product of its sub-factors; the sub-factors are only needed for partial
// traces.
//
// Operators are stored sparse (ladder operators and their products have a few
// nonzeros per row) while density matrices are dense.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qpulse/errors.hpp"

namespace qpulse {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Operator = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

inline constexpr cplx kI{0.0, 1.0};

enum class Slot : int { u = 0, s = 1, v = 2 };

inline Operator identity(int dim) {
  if (dim < 1) throw InvalidDimension("identity: dimension must be >= 1");
  Operator id(dim, dim);
  id.setIdentity();
  return id;
}

/// Truncated ladder operator, <n-1|a|n> = sqrt(n).
inline Operator annihilation(int dim) {
  if (dim < 1) throw InvalidDimension("annihilation: dimension must be >= 1, got " + std::to_string(dim));
  std::vector<Eigen::Triplet<cplx>> entries;
  for (int n = 1; n < dim; ++n) entries.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  Operator a(dim, dim);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

inline Operator creation(int dim) { return Operator(annihilation(dim).adjoint()); }

inline Operator number_operator(int dim) { return creation(dim) * annihilation(dim); }

/// |row><col| on a space of dimension `dim`.
inline Operator transition(int dim, int row, int col) {
  if (row < 0 || row >= dim || col < 0 || col >= dim) throw InvalidDimension("transition: level out of range");
  Operator op(dim, dim);
  op.insert(row, col) = 1.0;
  op.makeCompressed();
  return op;
}

inline Operator to_operator(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidDimension("to_operator: matrix is not square");
  return m.sparseView(1.0, 0.0);
}

inline Operator kron(const Operator& a, const Operator& b) {
  std::vector<Eigen::Triplet<cplx>> entries;
  entries.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (int ra = 0; ra < a.outerSize(); ++ra) {
    for (Operator::InnerIterator ia(a, ra); ia; ++ia) {
      for (int rb = 0; rb < b.outerSize(); ++rb) {
        for (Operator::InnerIterator ib(b, rb); ib; ++ib) {
          entries.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                               ia.value() * ib.value());
        }
      }
    }
  }
  Operator out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

inline std::size_t product(std::span<const int> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

/// Dimensions of the three slots plus the optional sub-factorization of the
/// scatterer slot.
class SpaceLayout {
 public:
  static constexpr std::array<std::string_view, 3> kLabels{"u", "s", "v"};

  SpaceLayout(int input_dim, int scatterer_dim, int output_dim, std::vector<int> scatterer_factors = {})
      : dims_{input_dim, scatterer_dim, output_dim}, scatterer_factors_(std::move(scatterer_factors)) {
    for (int d : dims_) {
      if (d < 1) throw InvalidDimension("SpaceLayout: every slot dimension must be >= 1");
    }
    if (scatterer_factors_.empty()) scatterer_factors_ = {scatterer_dim};
    if (product(scatterer_factors_) != static_cast<std::size_t>(scatterer_dim)) {
      throw InvalidDimension("SpaceLayout: scatterer factors do not multiply to the scatterer dimension");
    }
  }

  const std::array<int, 3>& dims() const { return dims_; }
  int dim(Slot slot) const { return dims_[static_cast<int>(slot)]; }
  std::size_t total() const { return product(dims_); }
  const std::vector<int>& scatterer_factors() const { return scatterer_factors_; }

  /// Factor dimensions [u, scatterer factors..., v].
  std::vector<int> factor_dims() const {
    std::vector<int> f{dims_[0]};
    f.insert(f.end(), scatterer_factors_.begin(), scatterer_factors_.end());
    f.push_back(dims_[2]);
    return f;
  }

  /// Factor indices covered by a slot.
  std::vector<int> factors_of(Slot slot) const {
    const int ns = static_cast<int>(scatterer_factors_.size());
    switch (slot) {
      case Slot::u:
        return {0};
      case Slot::s: {
        std::vector<int> f(ns);
        std::iota(f.begin(), f.end(), 1);
        return f;
      }
      case Slot::v:
        return {ns + 1};
    }
    return {};
  }

  std::size_t index(int nu, int s, int nv) const {
    return (static_cast<std::size_t>(nu) * dims_[1] + s) * dims_[2] + nv;
  }

 private:
  std::array<int, 3> dims_;
  std::vector<int> scatterer_factors_;
};

/// op acting on `slot`, identity on the other two slots.
inline Operator embed(const Operator& op, Slot slot, const SpaceLayout& layout) {
  if (op.rows() != op.cols() || op.rows() != layout.dim(slot)) {
    throw InvalidDimension("embed: operator dimension " + std::to_string(op.rows()) + " does not match slot " +
                           std::string(SpaceLayout::kLabels[static_cast<int>(slot)]) + " of dimension " +
                           std::to_string(layout.dim(slot)));
  }
  const auto& d = layout.dims();
  switch (slot) {
    case Slot::u:
      return kron(op, identity(d[1] * d[2]));
    case Slot::s:
      return kron(kron(identity(d[0]), op), identity(d[2]));
    case Slot::v:
      return kron(identity(d[0] * d[1]), op);
  }
  return {};
}

/// A tensor product of factors, optionally restricted to a subset of the
/// product basis (for example all states below an excitation cap).
class TensorSpace {
 public:
  explicit TensorSpace(std::vector<int> dims) : dims_(std::move(dims)) {
    for (int d : dims_) {
      if (d < 1) throw InvalidDimension("TensorSpace: factor dimensions must be >= 1");
    }
    full_dim_ = product(dims_);
  }

  /// `kept` lists retained product-basis indices in ascending order.
  TensorSpace(std::vector<int> dims, std::vector<std::size_t> kept) : TensorSpace(std::move(dims)) {
    if (kept.empty()) throw InvalidArgument("TensorSpace: kept basis is empty");
    if (!std::is_sorted(kept.begin(), kept.end()) ||
        std::adjacent_find(kept.begin(), kept.end()) != kept.end() || kept.back() >= full_dim_) {
      throw InvalidArgument("TensorSpace: kept indices must be strictly increasing and in range");
    }
    if (kept.size() < full_dim_) {
      kept_ = std::move(kept);
      position_.assign(full_dim_, -1);
      for (std::size_t p = 0; p < kept_.size(); ++p) position_[kept_[p]] = static_cast<std::ptrdiff_t>(p);
    }
  }

  const std::vector<int>& dims() const { return dims_; }
  std::size_t full_dimension() const { return full_dim_; }
  std::size_t dimension() const { return kept_.empty() ? full_dim_ : kept_.size(); }
  bool is_full() const { return kept_.empty(); }

  std::size_t full_index(std::size_t pos) const { return kept_.empty() ? pos : kept_[pos]; }
  std::optional<std::size_t> position(std::size_t full) const {
    if (kept_.empty()) return full;
    const auto p = position_[full];
    if (p < 0) return std::nullopt;
    return static_cast<std::size_t>(p);
  }

  /// Digits of a product-basis index, one per factor.
  std::vector<int> digits(std::size_t full) const {
    std::vector<int> out(dims_.size());
    for (std::size_t k = dims_.size(); k-- > 0;) {
      out[k] = static_cast<int>(full % dims_[k]);
      full /= dims_[k];
    }
    return out;
  }

  /// P^T op P where P selects the kept basis states.
  Operator restrict(const Operator& full) const {
    if (static_cast<std::size_t>(full.rows()) != full_dim_ || full.rows() != full.cols()) {
      throw InvalidDimension("TensorSpace::restrict: operator does not act on the full product space");
    }
    if (kept_.empty()) return full;
    std::vector<Eigen::Triplet<cplx>> entries;
    for (std::size_t p = 0; p < kept_.size(); ++p) {
      for (Operator::InnerIterator it(full, static_cast<Eigen::Index>(kept_[p])); it; ++it) {
        const auto q = position_[static_cast<std::size_t>(it.col())];
        if (q >= 0) entries.emplace_back(static_cast<int>(p), static_cast<int>(q), it.value());
      }
    }
    const auto n = static_cast<Eigen::Index>(kept_.size());
    Operator out(n, n);
    out.setFromTriplets(entries.begin(), entries.end());
    return out;
  }

  Vector restrict(const Vector& full) const {
    if (static_cast<std::size_t>(full.size()) != full_dim_) {
      throw InvalidDimension("TensorSpace::restrict: state does not live on the full product space");
    }
    if (kept_.empty()) return full;
    Vector out(static_cast<Eigen::Index>(kept_.size()));
    for (std::size_t p = 0; p < kept_.size(); ++p) out[static_cast<Eigen::Index>(p)] = full[static_cast<Eigen::Index>(kept_[p])];
    return out;
  }

 private:
  std::vector<int> dims_;
  std::size_t full_dim_ = 0;
  std::vector<std::size_t> kept_;
  std::vector<std::ptrdiff_t> position_;
};

/// Linear combination sum_k coeff_k op_k evaluated repeatedly on a fixed
/// sparsity pattern (the union of the terms' patterns).
class OperatorCombination {
 public:
  explicit OperatorCombination(const std::vector<Operator>& terms) {
    if (terms.empty()) throw InvalidArgument("OperatorCombination: no terms");
    pattern_ = Operator(terms.front().rows(), terms.front().cols());
    for (const auto& t : terms) {
      if (t.rows() != pattern_.rows() || t.cols() != pattern_.cols()) {
        throw InvalidDimension("OperatorCombination: terms differ in dimension");
      }
      Operator ones = t;
      for (Eigen::Index k = 0; k < ones.nonZeros(); ++k) ones.valuePtr()[k] = 1.0;
      pattern_ += ones;
    }
    pattern_.makeCompressed();
    const auto nnz = static_cast<std::size_t>(pattern_.nonZeros());
    for (const auto& t : terms) {
      std::vector<cplx> vals(nnz, 0.0);
      for (int r = 0; r < pattern_.outerSize(); ++r) {
        Operator::InnerIterator it(pattern_, r);
        for (Operator::InnerIterator jt(t, r); jt; ++jt) {
          while (it && it.col() < jt.col()) ++it;
          vals[static_cast<std::size_t>(&it.valueRef() - pattern_.valuePtr())] = jt.value();
        }
      }
      values_.push_back(std::move(vals));
    }
  }

  std::size_t terms() const { return values_.size(); }

  /// Writes the combination into `out`, reusing its storage when the pattern matches.
  void evaluate(std::span<const cplx> coeffs, Operator& out) const {
    if (coeffs.size() != values_.size()) throw InvalidArgument("OperatorCombination: coefficient count mismatch");
    if (out.nonZeros() != pattern_.nonZeros() || out.rows() != pattern_.rows() || !out.isCompressed()) out = pattern_;
    cplx* dst = out.valuePtr();
    const auto nnz = static_cast<std::size_t>(pattern_.nonZeros());
    std::fill(dst, dst + nnz, cplx{0.0});
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const cplx c = coeffs[k];
      if (c == cplx{0.0}) continue;
      const cplx* src = values_[k].data();
      for (std::size_t i = 0; i < nnz; ++i) dst[i] += c * src[i];
    }
  }

  Operator evaluate(std::span<const cplx> coeffs) const {
    Operator out = pattern_;
    evaluate(coeffs, out);
    return out;
  }

 private:
  Operator pattern_;
  std::vector<std::vector<cplx>> values_;
};

inline double hermiticity_error(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double min_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrized(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// Dense Hermitian matrix on a TensorSpace.
class DensityMatrix {
 public:
  static constexpr double kHermitianTolerance = 1e-10;

  DensityMatrix(std::shared_ptr<const TensorSpace> space, Matrix rho)
      : space_(std::move(space)), rho_(std::move(rho)) {
    if (!space_) throw InvalidArgument("DensityMatrix: null space");
    const auto n = static_cast<Eigen::Index>(space_->dimension());
    if (rho_.rows() != n || rho_.cols() != n) {
      throw InvalidDimension("DensityMatrix: matrix is " + std::to_string(rho_.rows()) + "x" +
                             std::to_string(rho_.cols()) + ", space has dimension " + std::to_string(n));
    }
    if (hermiticity_error(rho_) > kHermitianTolerance) throw InvalidArgument("DensityMatrix: matrix is not Hermitian");
  }

  static DensityMatrix pure(std::shared_ptr<const TensorSpace> space, const Vector& psi) {
    Matrix rho = psi * psi.adjoint();
    return DensityMatrix(std::move(space), symmetrized(rho));
  }

  const TensorSpace& space() const { return *space_; }
  const std::shared_ptr<const TensorSpace>& space_ptr() const { return space_; }
  const Matrix& matrix() const { return rho_; }
  Eigen::Index dimension() const { return rho_.rows(); }

  double trace() const { return rho_.trace().real(); }
  double purity() const { return (rho_ * rho_).trace().real(); }
  double min_eigenvalue() const { return qpulse::min_eigenvalue(rho_); }

  DensityMatrix normalized() const {
    const double tr = trace();
    if (!(tr > 0.0)) throw NumericalFailure("DensityMatrix::normalized: non-positive trace");
    return DensityMatrix(space_, rho_ / tr);
  }

 private:
  std::shared_ptr<const TensorSpace> space_;
  Matrix rho_;
};

/// Reduced state on the factors listed in `keep` (any order; the result uses
/// ascending factor order).
inline DensityMatrix partial_trace(const DensityMatrix& rho, std::vector<int> keep) {
  const auto& space = rho.space();
  const auto& dims = space.dims();
  if (keep.empty()) throw InvalidArgument("partial_trace: keep set is empty");
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  for (int k : keep) {
    if (k < 0 || k >= static_cast<int>(dims.size())) throw InvalidArgument("partial_trace: factor index out of range");
  }
  std::vector<bool> kept_factor(dims.size(), false);
  for (int k : keep) kept_factor[static_cast<std::size_t>(k)] = true;

  std::vector<int> kept_dims;
  for (int k : keep) kept_dims.push_back(dims[static_cast<std::size_t>(k)]);
  const std::size_t kept_total = product(kept_dims);
  std::size_t traced_total = space.full_dimension() / kept_total;

  // Group basis positions by their traced-out digits; only pairs within a group
  // contribute.
  const std::size_t n = space.dimension();
  std::vector<std::size_t> kept_index(n), traced_index(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto dg = space.digits(space.full_index(p));
    std::size_t ki = 0, ti = 0;
    for (std::size_t f = 0; f < dims.size(); ++f) {
      if (kept_factor[f]) {
        ki = ki * dims[f] + dg[f];
      } else {
        ti = ti * dims[f] + dg[f];
      }
    }
    kept_index[p] = ki;
    traced_index[p] = ti;
  }
  std::vector<std::vector<std::size_t>> groups(traced_total);
  for (std::size_t p = 0; p < n; ++p) groups[traced_index[p]].push_back(p);

  const auto& m = rho.matrix();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(kept_total), static_cast<Eigen::Index>(kept_total));
  for (const auto& group : groups) {
    for (std::size_t i : group) {
      for (std::size_t j : group) {
        out(static_cast<Eigen::Index>(kept_index[i]), static_cast<Eigen::Index>(kept_index[j])) +=
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }
  return DensityMatrix(std::make_shared<const TensorSpace>(std::move(kept_dims)), symmetrized(out));
}

/// Slot-level partial trace for states on a SpaceLayout factorization.
inline DensityMatrix partial_trace(const DensityMatrix& rho, const SpaceLayout& layout, std::vector<Slot> keep) {
  if (keep.empty()) throw InvalidArgument("partial_trace: keep set is empty");
  if (rho.space().dims() != layout.factor_dims()) {
    throw InvalidDimension("partial_trace: state factorization does not match the layout");
  }
  std::vector<int> factors;
  for (Slot s : keep) {
    const auto f = layout.factors_of(s);
    factors.insert(factors.end(), f.begin(), f.end());
  }
  return partial_trace(rho, std::move(factors));
}

}  // namespace qpulse
