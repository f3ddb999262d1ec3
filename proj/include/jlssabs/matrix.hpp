#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "jlssabs/errors.hpp"

namespace jlssabs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Default tolerances used across the library. The paper gives none; these
/// are sized for entry magnitudes up to ~1e2.
namespace tol {
inline constexpr double rank = 1e-9;   // singular value cutoff, relative to sigma_max
inline constexpr double sym = 1e-9;    // symmetry check, relative to max entry
inline constexpr double eq = 1e-7;     // equation residual acceptance
inline constexpr double sg = 1e-9;     // small-gain spectral radius margin
inline constexpr double orth = 1e-10;  // orthonormality of subspace bases
}  // namespace tol

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Orthonormal basis of a subspace of R^ambient_dim; zero columns encode the
/// trivial subspace.
struct SubspaceBasis {
    Index ambient_dim = 0;
    Matrix basis;  // ambient_dim x dim, orthonormal columns

    Index dim() const { return basis.cols(); }

    /// basis^T basis == I within tol::orth.
    bool is_orthonormal(double tolerance = tol::orth) const {
        if (basis.cols() == 0) return true;
        Matrix g = basis.transpose() * basis;
        g -= Matrix::Identity(basis.cols(), basis.cols());
        return max_abs(g) <= tolerance;
    }
};

}  // namespace jlssabs
