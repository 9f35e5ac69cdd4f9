#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/rational.hpp"

namespace starforge {

// Dense matrix over exact rationals.
class RatMatrix {
 public:
  RatMatrix() = default;
  RatMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols)) {}
  RatMatrix(std::initializer_list<std::initializer_list<Rational>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ == 0 ? 0 : static_cast<int>(rows.begin()->size());
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) != cols_) throw DimensionMismatch("ragged matrix literal");
      for (const auto& x : r) data_.push_back(x);
    }
  }

  static RatMatrix identity(int n) {
    RatMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  Rational& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
  const Rational& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

  bool operator==(const RatMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  RatMatrix transpose() const {
    RatMatrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  RatMatrix operator+(const RatMatrix& o) const {
    same_shape(o);
    RatMatrix r = *this;
    for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] += o.data_[k];
    return r;
  }

  RatMatrix operator-(const RatMatrix& o) const {
    same_shape(o);
    RatMatrix r = *this;
    for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] -= o.data_[k];
    return r;
  }

  RatMatrix operator-() const {
    RatMatrix r = *this;
    for (auto& x : r.data_) x = -x;
    return r;
  }

  RatMatrix operator*(const RatMatrix& o) const {
    if (cols_ != o.rows_) throw DimensionMismatch("matrix product shape mismatch");
    RatMatrix r(rows_, o.cols_);
    for (int i = 0; i < rows_; ++i)
      for (int k = 0; k < cols_; ++k) {
        const Rational& a = (*this)(i, k);
        if (a == 0) continue;
        for (int j = 0; j < o.cols_; ++j) r(i, j) += a * o(k, j);
      }
    return r;
  }

  RatMatrix operator*(const Rational& s) const {
    RatMatrix r = *this;
    for (auto& x : r.data_) x *= s;
    return r;
  }

  bool is_zero() const {
    for (const auto& x : data_)
      if (x != 0) return false;
    return true;
  }

  bool is_symmetric() const { return square() && *this == transpose(); }
  bool is_antisymmetric() const { return square() && *this == -transpose(); }

  Rational trace() const {
    Rational t = 0;
    for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  Rational det() const {
    if (!square()) throw DimensionMismatch("determinant of non-square matrix");
    RatMatrix a = *this;
    Rational d = 1;
    for (int c = 0; c < rows_; ++c) {
      int p = c;
      while (p < rows_ && a(p, c) == 0) ++p;
      if (p == rows_) return 0;
      if (p != c) {
        for (int j = 0; j < cols_; ++j) std::swap(a(p, j), a(c, j));
        d = -d;
      }
      d *= a(c, c);
      for (int r = c + 1; r < rows_; ++r) {
        if (a(r, c) == 0) continue;
        Rational f = a(r, c) / a(c, c);
        for (int j = c; j < cols_; ++j) a(r, j) -= f * a(c, j);
      }
    }
    return d;
  }

  // Throws DomainError when singular.
  RatMatrix inverse() const {
    if (!square()) throw DimensionMismatch("inverse of non-square matrix");
    const int n = rows_;
    RatMatrix a = *this;
    RatMatrix inv = identity(n);
    for (int c = 0; c < n; ++c) {
      int p = c;
      while (p < n && a(p, c) == 0) ++p;
      if (p == n) throw DomainError("singular matrix");
      if (p != c)
        for (int j = 0; j < n; ++j) {
          std::swap(a(p, j), a(c, j));
          std::swap(inv(p, j), inv(c, j));
        }
      Rational piv = a(c, c);
      for (int j = 0; j < n; ++j) {
        a(c, j) /= piv;
        inv(c, j) /= piv;
      }
      for (int r = 0; r < n; ++r) {
        if (r == c || a(r, c) == 0) continue;
        Rational f = a(r, c);
        for (int j = 0; j < n; ++j) {
          a(r, j) -= f * a(c, j);
          inv(r, j) -= f * inv(c, j);
        }
      }
    }
    return inv;
  }

  // Solves M x = b with free variables set to zero; false when inconsistent.
  bool solve(const std::vector<Rational>& b, std::vector<Rational>& x) const {
    if (static_cast<int>(b.size()) != rows_) throw DimensionMismatch("right-hand side length mismatch");
    RatMatrix a(rows_, cols_ + 1);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) a(i, j) = (*this)(i, j);
      a(i, cols_) = b[static_cast<std::size_t>(i)];
    }
    std::vector<int> pivot_col;
    int r = 0;
    for (int c = 0; c < cols_ && r < rows_; ++c) {
      int p = r;
      while (p < rows_ && a(p, c) == 0) ++p;
      if (p == rows_) continue;
      if (p != r)
        for (int j = 0; j <= cols_; ++j) std::swap(a(p, j), a(r, j));
      Rational piv = a(r, c);
      for (int j = c; j <= cols_; ++j) a(r, j) /= piv;
      for (int i = 0; i < rows_; ++i) {
        if (i == r || a(i, c) == 0) continue;
        Rational f = a(i, c);
        for (int j = c; j <= cols_; ++j) a(i, j) -= f * a(r, j);
      }
      pivot_col.push_back(c);
      ++r;
    }
    for (int i = r; i < rows_; ++i)
      if (a(i, cols_) != 0) return false;
    x.assign(static_cast<std::size_t>(cols_), Rational(0));
    for (int i = 0; i < r; ++i) x[static_cast<std::size_t>(pivot_col[static_cast<std::size_t>(i)])] = a(i, cols_);
    return true;
  }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rows_; ++i) {
      s += i ? ", [" : "[";
      for (int j = 0; j < cols_; ++j) s += (j ? ", " : "") + (*this)(i, j).get_str();
      s += "]";
    }
    return s + "]";
  }

 private:
  void same_shape(const RatMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionMismatch("matrix shape mismatch");
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Rational> data_;
};

}  // namespace starforge
