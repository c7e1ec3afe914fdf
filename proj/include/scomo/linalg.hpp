#pragma once

// Small dense linear algebra used by the PCA and subspace code. Matrices are
// row-major; loadings and subspace bases are stored one vector per row.

#include <cstddef>
#include <span>
#include <vector>

namespace scomo {

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& a);

/// a * b
Matrix multiply(const Matrix& a, const Matrix& b);

/// a * b^T, i.e. all pairwise row dot products.
Matrix multiply_transposed(const Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);

/// Eigenvalues in descending order; eigenvectors are the rows of `vectors`.
struct SymmetricEigen {
    std::vector<double> values;
    Matrix vectors;
    int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for a symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& s);

/// Thin SVD a = u * diag(sigma) * v^T with k = min(rows, cols) singular
/// values in descending order; u is rows x k, v is cols x k.
struct Svd {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;
};

/// One-sided (Hestenes) Jacobi SVD.
Svd svd(const Matrix& a);

/// Orthonormal rows spanning the row space of `w` (modified Gram-Schmidt
/// with one reorthogonalization pass). Throws when a row is dependent on the
/// previous ones to within `rank_tol` relative to its own norm.
Matrix orthonormalize_rows(const Matrix& w, double rank_tol = 1e-10);

}  // namespace scomo
