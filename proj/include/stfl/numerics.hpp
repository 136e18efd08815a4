#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stfl {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Small by construction (d <= 8 here).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

    /// Builds from nested rows; all rows must have the same length and
    /// every entry must be finite.
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix from_rows(const std::vector<Vector>& rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<const double> data() const noexcept { return data_; }
    Vector row(std::size_t r) const;

    Matrix transpose() const;

    friend Matrix operator+(const Matrix& a, const Matrix& b);
    friend Matrix operator-(const Matrix& a, const Matrix& b);
    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend Matrix operator*(double s, const Matrix& a);
    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Raised when a matrix argument violates a shape or symmetry precondition.
class MatrixError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by cholesky(); carries the index of the first non-positive pivot.
class NotPositiveDefinite : public MatrixError {
public:
    explicit NotPositiveDefinite(std::size_t pivot);
    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

struct EigenResult {
    Vector eigenvalues;  // descending
    Matrix eigenvectors; // column i pairs with eigenvalues[i]
};

// Vector helpers.
double dot(std::span<const double> a, std::span<const double> b);
double norm_sq(std::span<const double> a);
double distance_sq(std::span<const double> a, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
Vector matvec(const Matrix& a, std::span<const double> x);
/// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);
Matrix outer(std::span<const double> a, std::span<const double> b);

double frobenius_norm(const Matrix& a);
double trace(const Matrix& a);
bool is_symmetric(const Matrix& a, double rel_tol = 1e-12);

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Throws MatrixError for non-square or asymmetric input.
EigenResult sym_eigen(const Matrix& a);

/// Lower-triangular L with L * L^T = a. Throws NotPositiveDefinite.
Matrix cholesky(const Matrix& a);

/// max_i |1 - alpha * lambda_i| over the eigenvalues of a symmetric jacobian,
/// i.e. the spectral norm of I - alpha * J.
double spectral_norm_shifted(const Matrix& jacobian, double alpha);

} // namespace stfl
