#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shapeoed/errors.hpp"

namespace shapeoed::numerics {

using Vector = std::vector<double>;

/// Row-major dense matrix. Used for the small symmetric matrices of the
/// design problem (FIMs, Gramian) and for triangular factors.
class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  explicit DenseMatrix(std::size_t n) : DenseMatrix(n, n) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    DenseMatrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& r : rows) {
      std::size_t j = 0;
      for (double v : r) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return rows_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  DenseMatrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += s * o
  void add_scaled(const DenseMatrix& o, double s) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs_diagonal() const {
    double m = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) m = std::max(m, std::abs((*this)(i, i)));
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  bool is_symmetric(double rel_tol = 1e-12) const {
    if (!square()) return false;
    const double scale = std::max(frobenius_norm(), 1e-300);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        if (std::abs((*this)(i, j) - (*this)(j, i)) > rel_tol * scale) return false;
    return true;
  }

  /// Replace by (A + Aᵀ)/2.
  void symmetrize() {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j) {
        const double avg = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = avg;
        (*this)(j, i) = avg;
      }
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  assert(a.cols() == b.rows());
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Vector operator*(const DenseMatrix& a, std::span<const double> x) {
  assert(a.cols() == x.size());
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
inline DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
inline DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Σ_ij A_ij B_ij, i.e. trace(Aᵀ B).
inline double frobenius_inner(const DenseMatrix& a, const DenseMatrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  return dot(a.data(), b.data());
}

// ---------------------------------------------------------------------------
// Cholesky

/// Relative pivot threshold below which a matrix is treated as rank deficient.
inline constexpr double kPivotTolerance = 1e-14;

/// Lower-triangular L with L Lᵀ = A, or nullopt when a pivot falls to or below
/// kPivotTolerance · max|diag(A)|.
inline std::optional<DenseMatrix> try_cholesky(const DenseMatrix& a) {
  if (!a.square()) throw DimensionMismatch("cholesky: matrix is not square");
  const std::size_t n = a.size();
  const double threshold = kPivotTolerance * a.max_abs_diagonal();
  DenseMatrix l(n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > threshold) || !std::isfinite(d)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

inline DenseMatrix cholesky(const DenseMatrix& a) {
  auto l = try_cholesky(a);
  if (!l) throw NotPositiveDefinite("cholesky: non-positive pivot (matrix not SPD)");
  return std::move(*l);
}

/// Solve L y = b in place.
inline void forward_substitute(const DenseMatrix& l, std::span<double> b) {
  const std::size_t n = l.size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
}

/// Solve Lᵀ x = y in place.
inline void backward_substitute(const DenseMatrix& l, std::span<double> y) {
  const std::size_t n = l.size();
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * y[k];
    y[ii] = s / l(ii, ii);
  }
}

inline Vector cholesky_solve(const DenseMatrix& l, std::span<const double> rhs) {
  Vector x(rhs.begin(), rhs.end());
  forward_substitute(l, x);
  backward_substitute(l, x);
  return x;
}

/// Columns-wise solve with a Cholesky factor: returns A⁻¹ R.
inline DenseMatrix cholesky_solve(const DenseMatrix& l, const DenseMatrix& rhs) {
  const std::size_t n = l.size();
  DenseMatrix x(n, rhs.cols());
  Vector col(n);
  for (std::size_t j = 0; j < rhs.cols(); ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = rhs(i, j);
    forward_substitute(l, col);
    backward_substitute(l, col);
    for (std::size_t i = 0; i < n; ++i) x(i, j) = col[i];
  }
  return x;
}

/// L⁻¹ A L⁻ᵀ for symmetric A and lower-triangular L.
inline DenseMatrix congruence_inverse(const DenseMatrix& l, const DenseMatrix& a) {
  const std::size_t n = a.rows();
  DenseMatrix y(n);
  Vector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = a(i, j);
    forward_substitute(l, col);
    for (std::size_t i = 0; i < n; ++i) y(j, i) = col[i];  // y = (L⁻¹A)ᵀ
  }
  DenseMatrix c(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = y(i, j);
    forward_substitute(l, col);
    for (std::size_t i = 0; i < n; ++i) c(i, j) = col[i];
  }
  c.symmetrize();
  return c;
}

inline Vector solve_spd_dense(const DenseMatrix& a, std::span<const double> rhs) {
  if (a.size() != rhs.size()) throw DimensionMismatch("solve_spd_dense: size mismatch");
  return cholesky_solve(cholesky(a), rhs);
}

inline DenseMatrix inverse_spd(const DenseMatrix& a) {
  return cholesky_solve(cholesky(a), DenseMatrix::identity(a.size()));
}

} // namespace shapeoed::numerics
