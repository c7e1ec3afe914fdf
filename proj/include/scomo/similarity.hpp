#pragma once

// Gait deviation from normal walking as principal angles between the
// participant's and the normative PCA loading subspaces.

#include <cstddef>
#include <string_view>
#include <vector>

#include "scomo/gait_model.hpp"
#include "scomo/linalg.hpp"

namespace scomo {

/// Row-orthonormal basis of a k-dimensional subspace.
class Subspace {
public:
    /// Takes `basis` as-is after checking orthonormality to 1e-10.
    static Subspace from_orthonormal(Matrix basis);

    const Matrix& basis() const noexcept { return basis_; }
    std::size_t dimension() const noexcept { return basis_.rows(); }
    std::size_t ambient_dimension() const noexcept { return basis_.cols(); }

private:
    explicit Subspace(Matrix basis) : basis_(std::move(basis)) {}
    Matrix basis_;
};

/// Re-orthonormalizes the rows of `loadings`; rejects rank deficiency
/// beyond 1e-10.
Subspace orthonormal_basis(const Matrix& loadings);

struct PrincipalAngleResult {
    std::vector<double> sigmas;  // descending, clamped to [0, 1]
    std::vector<double> thetas;  // radians, ascending
    Matrix left_vectors;         // m x ambient, principal vectors in A
    Matrix right_vectors;        // m x ambient, principal vectors in B

    std::size_t m() const noexcept { return sigmas.size(); }
};

PrincipalAngleResult principal_angles(const Subspace& a, const Subspace& b);

enum class DeviationMode {
    sum_angles,   // degrees, 0 = identical
    sum_cosines,  // sum of sigma, larger = more similar
};

std::string_view to_string(DeviationMode mode);
DeviationMode parse_deviation_mode(std::string_view text);

double gait_deviation(const PrincipalAngleResult& result, DeviationMode mode = DeviationMode::sum_angles);

struct DeviationValue {
    DeviationMode mode = DeviationMode::sum_angles;
    double value = 0.0;
    std::size_t m = 0;
};

/// Participant's retained loadings against the normative loadings.
DeviationValue gait_deviation(const ParticipantModel& participant, const NormativeModel& normative,
                              DeviationMode mode = DeviationMode::sum_angles);

}  // namespace scomo
