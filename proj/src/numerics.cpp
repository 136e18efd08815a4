#include "stfl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stfl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
        throw MatrixError("matrix dimensions must be positive");
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<Vector> copy;
    copy.reserve(rows.size());
    for (const auto& r : rows) {
        copy.emplace_back(r);
    }
    return from_rows(copy);
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw MatrixError("matrix must have at least one row and one column");
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols_) {
            throw MatrixError("ragged matrix rows");
        }
        for (std::size_t c = 0; c < m.cols_; ++c) {
            if (!std::isfinite(rows[r][c])) {
                throw MatrixError("matrix entries must be finite");
            }
            m(r, c) = rows[r][c];
        }
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Vector Matrix::row(std::size_t r) const {
    return {data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_)};
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t(c, r) = (*this)(r, c);
        }
    }
    return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) {
        throw MatrixError("shape mismatch in matrix addition");
    }
    Matrix out = a;
    for (std::size_t i = 0; i < out.data_.size(); ++i) {
        out.data_[i] += b.data_[i];
    }
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    return a + (-1.0 * b);
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) {
        throw MatrixError("shape mismatch in matrix product");
    }
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols_; ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (auto& v : out.data_) {
        v *= s;
    }
    return out;
}

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot)
    : MatrixError("matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
      pivot_(pivot) {}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw MatrixError("dimension mismatch in dot product");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm_sq(std::span<const double> a) {
    return dot(a, a);
}

double distance_sq(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw MatrixError("dimension mismatch in distance");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw MatrixError("dimension mismatch in subtraction");
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw MatrixError("dimension mismatch in matrix-vector product");
    }
    Vector y(a.rows(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) {
            s += a(r, c) * x[c];
        }
        y[r] = s;
    }
    return y;
}

void axpy(double s, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw MatrixError("dimension mismatch in axpy");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += s * x[i];
    }
}

Matrix outer(std::span<const double> a, std::span<const double> b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            m(i, j) = a[i] * b[j];
        }
    }
    return m;
}

double frobenius_norm(const Matrix& a) {
    return std::sqrt(norm_sq(a.data()));
}

double trace(const Matrix& a) {
    if (!a.square()) {
        throw MatrixError("trace of a non-square matrix");
    }
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        t += a(i, i);
    }
    return t;
}

bool is_symmetric(const Matrix& a, double rel_tol) {
    if (!a.square()) {
        return false;
    }
    const double scale = std::max(frobenius_norm(a), 1e-300);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale) {
                return false;
            }
        }
    }
    return true;
}

namespace {

void require_symmetric(const Matrix& a, const char* what) {
    if (!a.square()) {
        throw MatrixError(std::string(what) + ": matrix is not square (" + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + ")");
    }
    if (!is_symmetric(a)) {
        throw MatrixError(std::string(what) + ": matrix is not symmetric");
    }
}

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (i != j) {
                s += a(i, j) * a(i, j);
            }
        }
    }
    return std::sqrt(s);
}

double diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        s += a(i, i) * a(i, i);
    }
    return std::sqrt(s);
}

} // namespace

EigenResult sym_eigen(const Matrix& input) {
    require_symmetric(input, "sym_eigen");
    const std::size_t n = input.rows();

    // Work on the exactly symmetrised copy so rotations stay symmetric.
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a(i, j) = 0.5 * (input(i, j) + input(j, i));
        }
    }
    Matrix v = Matrix::identity(n);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        if (off_diagonal_norm(a) <= 1e-14 * diagonal_norm(a)) {
            break;
        }
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) {
                    continue;
                }
                // 2x2 symmetric Schur decomposition.
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenResult out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) {
            out.eigenvectors(r, k) = v(r, order[k]);
        }
    }
    return out;
}

Matrix cholesky(const Matrix& a) {
    require_symmetric(a, "cholesky");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            diag -= l(j, k) * l(j, k);
        }
        if (!(diag > 0.0)) {
            throw NotPositiveDefinite(j);
        }
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

double spectral_norm_shifted(const Matrix& jacobian, double alpha) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("spectral_norm_shifted: alpha must be finite and >= 0");
    }
    const EigenResult eig = sym_eigen(jacobian);
    double sigma = 0.0;
    for (double lambda : eig.eigenvalues) {
        sigma = std::max(sigma, std::abs(1.0 - alpha * lambda));
    }
    return sigma;
}

} // namespace stfl
