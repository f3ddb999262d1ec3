#pragma once

#include <utility>
#include <vector>

#include "jlssabs/matrix.hpp"

namespace jlssabs::la {

/// Eigenvalues of the symmetrized input (m + m^T)/2, ascending.
/// Throws NonSquareError / NotSymmetricError.
std::vector<double> sym_eigs(const Matrix& m, double tol_sym = tol::sym);

/// Full symmetric eigendecomposition m = V diag(values) V^T (symmetrized input).
struct SymEig {
    Vector values;  // ascending
    Matrix vectors; // columns
};
SymEig sym_eig_full(const Matrix& m, double tol_sym = tol::sym);

/// Largest eigenvalue of X^T W X for symmetric PSD W (0 when X has no columns).
double max_eig_quadratic(const Matrix& w, const Matrix& x);

/// max |lambda| over the (possibly complex) spectrum of a general square matrix.
double spectral_radius(const Matrix& m);

/// Orthonormal basis of the column space; rank decided by singular values
/// >= tol_rank * sigma_max. Column signs are fixed deterministically.
SubspaceBasis image_basis(const Matrix& m, double tol_rank = tol::rank);

/// Orthonormal basis of the null space, same rank rule.
SubspaceBasis kernel_basis(const Matrix& m, double tol_rank = tol::rank);

struct ContainsResult {
    bool contained = false;
    double max_residual = 0.0;
};

/// True iff every column of target lies within distance `tolerance` of
/// span(generators), decided by per-column least-squares residuals.
ContainsResult subspace_contains(const Matrix& target, const Matrix& generators,
                                 double tolerance = tol::eq);

struct LstsqResult {
    Matrix x;
    double residual = 0.0;  // Frobenius norm of a*x - b
};

/// Minimum-norm least-squares solution of a*x = b.
LstsqResult lstsq_solve(const Matrix& a, const Matrix& b);

/// Solve  Abar^T M + M Abar + E^T M E + sum_i lambda_i R_i^T M R_i + kappa_hat M = -W
/// for symmetric M via the n^2 Kronecker vectorization. W must be symmetric PD.
/// The result is symmetrized; positivity is the caller's check.
/// Throws SingularOperatorError when the vectorized operator is rank-deficient
/// or the plug-back residual exceeds 1e-8 * ||W||_F.
Matrix kron_lyap_solve(const Matrix& abar, const Matrix& e,
                       const std::vector<std::pair<double, Matrix>>& jumps,
                       double kappa_hat, const Matrix& w);

}  // namespace jlssabs::la
