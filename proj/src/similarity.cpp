#include "scomo/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scomo/error.hpp"
#include "scomo/kernels.hpp"

namespace scomo {

Subspace Subspace::from_orthonormal(Matrix basis) {
    const std::size_t k = basis.rows();
    if (k < 1 || basis.cols() < k)
        throw Error(ErrorKind::invalid_argument, "subspace: need 1 <= k <= ambient dimension");
    const Matrix gram = multiply_transposed(basis, basis);
    if (max_abs_diff(gram, Matrix::identity(k)) > 1e-10)
        throw Error(ErrorKind::invalid_argument, "subspace: basis rows are not orthonormal");
    return Subspace(std::move(basis));
}

Subspace orthonormal_basis(const Matrix& loadings) {
    if (loadings.rows() < 1 || loadings.rows() > loadings.cols())
        throw Error(ErrorKind::invalid_argument, "orthonormal_basis: need 1 <= rows <= cols");
    return Subspace::from_orthonormal(orthonormalize_rows(loadings, 1e-10));
}

PrincipalAngleResult principal_angles(const Subspace& a, const Subspace& b) {
    if (a.ambient_dimension() != b.ambient_dimension())
        throw Error(ErrorKind::invalid_argument, "principal_angles: ambient dimension mismatch (" +
                                                     std::to_string(a.ambient_dimension()) + " vs " +
                                                     std::to_string(b.ambient_dimension()) + ")");
    const Matrix cross = multiply_transposed(a.basis(), b.basis());  // k_a x k_b
    const Svd d = svd(cross);
    const std::size_t m = d.sigma.size();
    const std::size_t dim = a.ambient_dimension();
    const auto& k = kernels::active();

    PrincipalAngleResult r;
    r.sigmas.resize(m);
    r.thetas.resize(m);
    r.left_vectors = Matrix(m, dim);
    r.right_vectors = Matrix(m, dim);
    // arccos loses half the digits near sigma = 1, so angles up to 45 degrees
    // come from the sines instead: the singular values of the smaller basis'
    // residual after projecting out the larger subspace.
    const bool a_small = a.dimension() <= b.dimension();
    const Matrix& qs = a_small ? a.basis() : b.basis();
    const Matrix& ql = a_small ? b.basis() : a.basis();
    Matrix residual = qs;
    const Matrix coeff = multiply_transposed(qs, ql);
    for (std::size_t i = 0; i < qs.rows(); ++i)
        for (std::size_t j = 0; j < ql.rows(); ++j)
            k.axpy(-coeff(i, j), ql.row(j).data(), residual.row(i).data(), dim);
    const std::vector<double> sines = svd(residual).sigma;  // descending, m of them

    for (std::size_t i = 0; i < m; ++i) {
        r.sigmas[i] = std::clamp(d.sigma[i], 0.0, 1.0);
        if (r.sigmas[i] * r.sigmas[i] >= 0.5)
            r.thetas[i] = std::asin(std::clamp(sines[m - 1 - i], 0.0, 1.0));
        else
            r.thetas[i] = std::acos(r.sigmas[i]);
        if (i > 0) r.thetas[i] = std::max(r.thetas[i], r.thetas[i - 1]);
        for (std::size_t j = 0; j < a.dimension(); ++j)
            k.axpy(d.u(j, i), a.basis().row(j).data(), r.left_vectors.row(i).data(), dim);
        for (std::size_t j = 0; j < b.dimension(); ++j)
            k.axpy(d.v(j, i), b.basis().row(j).data(), r.right_vectors.row(i).data(), dim);
    }
    return r;
}

std::string_view to_string(DeviationMode mode) {
    return mode == DeviationMode::sum_angles ? "sum_angles" : "sum_cosines";
}

DeviationMode parse_deviation_mode(std::string_view text) {
    if (text == "sum_angles") return DeviationMode::sum_angles;
    if (text == "sum_cosines") return DeviationMode::sum_cosines;
    throw Error(ErrorKind::invalid_argument, "unknown deviation mode '" + std::string(text) + "'");
}

double gait_deviation(const PrincipalAngleResult& result, DeviationMode mode) {
    double total = 0.0;
    if (mode == DeviationMode::sum_angles) {
        for (double t : result.thetas) total += t;
        return total * 180.0 / std::numbers::pi;
    }
    for (double s : result.sigmas) total += s;
    return total;
}

DeviationValue gait_deviation(const ParticipantModel& participant, const NormativeModel& normative,
                              DeviationMode mode) {
    if (participant.n_components == 0)
        throw Error(ErrorKind::invalid_argument, "gait_deviation: participant model retains no components");
    const auto r = principal_angles(orthonormal_basis(participant.loadings), orthonormal_basis(normative.loadings));
    return {mode, gait_deviation(r, mode), r.m()};
}

}  // namespace scomo
