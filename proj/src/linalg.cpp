#include "scomo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scomo/error.hpp"
#include "scomo/kernels.hpp"

namespace scomo {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols())
            throw Error(ErrorKind::invalid_argument, "Matrix::from_rows: ragged rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw Error(ErrorKind::invalid_argument, "multiply: shape mismatch");
    const auto& k = kernels::active();
    Matrix out(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t i = 0; i < a.cols(); ++i)
            k.axpy(a(r, i), b.row(i).data(), out.row(r).data(), b.cols());
    return out;
}

Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw Error(ErrorKind::invalid_argument, "multiply_transposed: shape mismatch");
    const auto& k = kernels::active();
    Matrix out(a.rows(), b.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < b.rows(); ++c)
            out(r, c) = k.dot(a.row(r).data(), b.row(c).data(), a.cols());
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i)
        m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
    const std::size_t n = s.rows();
    if (s.cols() != n) throw Error(ErrorKind::invalid_argument, "symmetric_eigen: matrix not square");
    const auto& k = kernels::active();
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr int max_sweeps = 60;

    Matrix a = s;
    Matrix vt = Matrix::identity(n);
    double frob = 0.0;
    for (double v : a.values()) frob += v * v;
    frob = std::sqrt(frob);
    const double floor_tol = 1e-18 * frob;

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                const double app = a(p, p);
                const double aqq = a(q, q);
                if (std::abs(apq) <= std::max(eps * std::sqrt(std::abs(app * aqq)), floor_tol))
                    continue;
                rotated = true;
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;

                k.rotate(a.row(p).data(), a.row(q).data(), n, c, sn);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    a(r, p) = a(p, r);
                    a(r, q) = a(q, r);
                }
                k.rotate(vt.row(p).data(), vt.row(q).data(), n, c, sn);
            }
        }
        if (!rotated) break;
    }
    if (sweep == max_sweeps)
        throw Error(ErrorKind::numerical, "symmetric_eigen: Jacobi sweeps did not converge");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    SymmetricEigen out;
    out.sweeps = sweep + 1;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = a(order[i], order[i]);
        std::copy(vt.row(order[i]).begin(), vt.row(order[i]).end(), out.vectors.row(i).begin());
    }
    return out;
}

namespace {

// Columns of a (rows of g) are orthogonalized in place; vt accumulates the
// right rotations.
void hestenes(Matrix& g, Matrix& vt) {
    const auto& k = kernels::active();
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr int max_sweeps = 60;
    const std::size_t n = g.rows();
    const std::size_t len = g.cols();
    // A column below eps * ||A||_F only holds a negligible singular value;
    // rotating it against the others shrinks it geometrically toward
    // underflow without ever meeting the relative test (rank-deficient input).
    double frob2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) frob2 += k.dot(g.row(i).data(), g.row(i).data(), len);
    const double floor = eps * eps * frob2;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = k.dot(g.row(p).data(), g.row(p).data(), len);
                const double beta = k.dot(g.row(q).data(), g.row(q).data(), len);
                const double gamma = k.dot(g.row(p).data(), g.row(q).data(), len);
                if (alpha <= floor || beta <= floor) continue;
                if (std::abs(gamma) <= eps * std::sqrt(alpha * beta) || gamma == 0.0) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                k.rotate(g.row(p).data(), g.row(q).data(), len, c, s);
                k.rotate(vt.row(p).data(), vt.row(q).data(), n, c, s);
            }
        }
        if (!rotated) return;
    }
    throw Error(ErrorKind::numerical, "svd: Jacobi sweeps did not converge");
}

// Fills rows of `basis` whose `filled` flag is false with unit vectors
// orthogonal to all filled rows.
void complete_orthonormal(Matrix& basis, std::vector<bool>& filled) {
    const auto& k = kernels::active();
    const std::size_t dim = basis.cols();
    std::vector<double> cand(dim);
    std::size_t next_axis = 0;
    for (std::size_t r = 0; r < basis.rows(); ++r) {
        if (filled[r]) continue;
        while (next_axis < dim) {
            std::fill(cand.begin(), cand.end(), 0.0);
            cand[next_axis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t o = 0; o < basis.rows(); ++o)
                    if (filled[o])
                        k.axpy(-k.dot(cand.data(), basis.row(o).data(), dim), basis.row(o).data(),
                               cand.data(), dim);
            const double norm = std::sqrt(k.dot(cand.data(), cand.data(), dim));
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < dim; ++i) basis(r, i) = cand[i] / norm;
                filled[r] = true;
                break;
            }
        }
    }
}

}  // namespace

Svd svd(const Matrix& a) {
    if (a.rows() < a.cols()) {
        Svd t = svd(transpose(a));
        return {std::move(t.v), std::move(t.sigma), std::move(t.u)};
    }
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix g = transpose(a);  // n x m, row i is column i of a
    Matrix vt = Matrix::identity(n);
    hestenes(g, vt);

    std::vector<double> norms(n);
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(k.dot(g.row(i).data(), g.row(i).data(), m));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return norms[i] > norms[j]; });

    const double smax = n > 0 ? norms[order[0]] : 0.0;
    const double tiny = std::max(smax, 1.0) * 1e-14;
    Svd out;
    out.sigma.resize(n);
    Matrix ut(n, m);  // rows are left singular vectors
    out.v = Matrix(n, n);
    std::vector<bool> filled(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[i];
        out.sigma[i] = norms[src];
        for (std::size_t j = 0; j < n; ++j) out.v(j, i) = vt(src, j);
        if (norms[src] > tiny) {
            for (std::size_t j = 0; j < m; ++j) ut(i, j) = g(src, j) / norms[src];
            filled[i] = true;
        }
    }
    complete_orthonormal(ut, filled);
    out.u = transpose(ut);
    return out;
}

Matrix orthonormalize_rows(const Matrix& w, double rank_tol) {
    const auto& k = kernels::active();
    const std::size_t dim = w.cols();
    Matrix q = w;
    for (std::size_t r = 0; r < q.rows(); ++r) {
        double* row = q.row(r).data();
        const double original = std::sqrt(k.dot(row, row, dim));
        if (original == 0.0 || !std::isfinite(original))
            throw Error(ErrorKind::invalid_argument, "orthonormal_basis: rank deficient (zero row)");
        for (int pass = 0; pass < 2; ++pass)
            for (std::size_t o = 0; o < r; ++o)
                k.axpy(-k.dot(q.row(o).data(), row, dim), q.row(o).data(), row, dim);
        const double norm = std::sqrt(k.dot(row, row, dim));
        if (norm <= rank_tol * original)
            throw Error(ErrorKind::invalid_argument, "orthonormal_basis: rank deficient");
        for (std::size_t i = 0; i < dim; ++i) row[i] /= norm;
    }
    return q;
}

}  // namespace scomo
