#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "shapeoed/errors.hpp"
#include "shapeoed/numerics/dense.hpp"

namespace shapeoed::numerics {

/// Compressed-row sparse matrix. Column indices are strictly increasing
/// within a row.
class SparseMatrix {
public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> offsets,
               std::vector<std::size_t> columns, std::vector<double> values)
      : rows_(rows), cols_(cols), offsets_(std::move(offsets)), columns_(std::move(columns)),
        values_(std::move(values)) {}

  static SparseMatrix identity(std::size_t n) {
    std::vector<std::size_t> off(n + 1), col(n);
    for (std::size_t i = 0; i < n; ++i) {
      off[i + 1] = i + 1;
      col[i] = i;
    }
    return SparseMatrix(n, n, std::move(off), std::move(col), std::vector<double>(n, 1.0));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  std::span<const std::size_t> offsets() const noexcept { return offsets_; }
  std::span<const std::size_t> columns() const noexcept { return columns_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Entry (i, j); zero when not stored.
  double at(std::size_t i, std::size_t j) const {
    const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
    const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - columns_.begin())];
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) s += values_[k] * x[columns_[k]];
      y[i] = s;
    }
  }

  Vector operator*(std::span<const double> x) const {
    Vector y(rows_);
    multiply(x, y);
    return y;
  }

  Vector diagonal() const {
    Vector d(std::min(rows_, cols_), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = at(i, i);
    return d;
  }

  /// xᵀ A y
  double bilinear(std::span<const double> x, std::span<const double> y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      double r = 0.0;
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) r += values_[k] * y[columns_[k]];
      s += x[i] * r;
    }
    return s;
  }

  /// Same sparsity, values a·this + b·other. Patterns must match.
  SparseMatrix combined(double a, const SparseMatrix& other, double b) const {
    SparseMatrix out = *this;
    for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] = a * values_[k] + b * other.values_[k];
    return out;
  }

  bool same_pattern(const SparseMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && offsets_ == o.offsets_ && columns_ == o.columns_;
  }

  /// Rows `row_map` and columns `col_map` (entries −1 dropped) as a new matrix
  /// indexed by the mapped ids.
  SparseMatrix submatrix(std::span<const std::int64_t> row_map, std::size_t new_rows,
                         std::span<const std::int64_t> col_map, std::size_t new_cols) const {
    std::vector<std::size_t> off(new_rows + 1, 0);
    std::vector<std::size_t> col;
    std::vector<double> val;
    std::vector<std::size_t> source_row(new_rows, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      if (row_map[i] >= 0) source_row[static_cast<std::size_t>(row_map[i])] = i;
    std::vector<std::pair<std::size_t, double>> row_entries;
    for (std::size_t r = 0; r < new_rows; ++r) {
      const std::size_t i = source_row[r];
      row_entries.clear();
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
        const std::int64_t c = col_map[columns_[k]];
        if (c >= 0) row_entries.emplace_back(static_cast<std::size_t>(c), values_[k]);
      }
      std::sort(row_entries.begin(), row_entries.end());
      for (const auto& [c, v] : row_entries) {
        col.push_back(c);
        val.push_back(v);
      }
      off[r + 1] = col.size();
    }
    return SparseMatrix(new_rows, new_cols, std::move(off), std::move(col), std::move(val));
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) d(i, columns_[k]) += values_[k];
    return d;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> columns_;
  std::vector<double> values_;
};

/// Accumulates (row, col, value) triplets. Duplicates are summed in insertion
/// order on build.
class TripletBuilder {
public:
  TripletBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  void add(std::size_t i, std::size_t j, double v) { entries_.push_back({i, j, v}); }

  void reserve(std::size_t n) { entries_.reserve(n); }

  SparseMatrix build() const {
    std::vector<Entry> e = entries_;
    std::stable_sort(e.begin(), e.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<std::size_t> off(rows_ + 1, 0);
    std::vector<std::size_t> col;
    std::vector<double> val;
    col.reserve(e.size());
    val.reserve(e.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < rows_; ++i) {
      while (k < e.size() && e[k].row == i) {
        const std::size_t j = e[k].col;
        double s = 0.0;
        while (k < e.size() && e[k].row == i && e[k].col == j) s += e[k++].value;
        col.push_back(j);
        val.push_back(s);
      }
      off[i + 1] = col.size();
    }
    return SparseMatrix(rows_, cols_, std::move(off), std::move(col), std::move(val));
  }

private:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };
  std::size_t rows_;
  std::size_t cols_;
  std::vector<Entry> entries_;
};

struct CgReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. Stops when the true residual
/// satisfies ‖Ax − b‖ ≤ tol·‖b‖; throws NoConvergence after 10·n iterations.
inline Vector cg_solve(const SparseMatrix& a, std::span<const double> rhs, double tol = 1e-10,
                       std::span<const double> initial_guess = {}, CgReport* report = nullptr) {
  const std::size_t n = a.rows();
  if (a.cols() != n || rhs.size() != n) throw DimensionMismatch("cg_solve: size mismatch");
  Vector x(n, 0.0);
  if (!initial_guess.empty()) std::copy(initial_guess.begin(), initial_guess.end(), x.begin());

  const double bnorm = norm2(rhs);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    if (report) *report = {};
    return x;
  }

  Vector inv_diag = a.diagonal();
  for (double& d : inv_diag) d = d > 0.0 ? 1.0 / d : 1.0;

  Vector r(n), z(n), p(n), q(n);
  const std::size_t max_iter = std::max<std::size_t>(10 * n, 10);
  std::size_t total = 0;

  auto true_residual = [&]() {
    a.multiply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    return norm2(r);
  };

  double rnorm = true_residual();
  while (rnorm > tol * bnorm) {
    // (Re)start from the true residual.
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    bool converged_recurrence = false;
    while (total < max_iter) {
      a.multiply(p, q);
      const double pq = dot(p, q);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++total;
      if (norm2(r) <= 0.5 * tol * bnorm) {
        converged_recurrence = true;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    rnorm = true_residual();
    if (rnorm <= tol * bnorm) break;
    if (total >= max_iter || !converged_recurrence)
      throw NoConvergence("cg_solve: relative residual " + std::to_string(rnorm / bnorm) +
                          " after " + std::to_string(total) + " iterations");
  }
  if (report) *report = {total, rnorm / bnorm};
  return x;
}

} // namespace shapeoed::numerics
