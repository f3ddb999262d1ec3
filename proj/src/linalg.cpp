#include "jlssabs/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <sstream>

namespace jlssabs::la {

namespace {

void require_square(const Matrix& m, const char* who) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << who << ": matrix is " << m.rows() << "x" << m.cols() << ", not square";
        throw NonSquareError(os.str());
    }
}

void require_symmetric(const Matrix& m, double tol_sym, const char* who) {
    const double dev = max_abs(m - m.transpose());
    if (dev > tol_sym * (1.0 + max_abs(m))) {
        std::ostringstream os;
        os << who << ": asymmetry " << dev << " exceeds tolerance";
        throw NotSymmetricError(os.str());
    }
}

// Deterministic sign convention: the entry of largest magnitude in each
// column is made positive (first such entry on ties).
void fix_column_signs(Matrix& m) {
    for (Index j = 0; j < m.cols(); ++j) {
        Index imax = 0;
        double best = 0.0;
        for (Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > best) {
                best = std::abs(m(i, j));
                imax = i;
            }
        }
        if (best > 0.0 && m(imax, j) < 0.0) m.col(j) = -m.col(j);
    }
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace

std::vector<double> sym_eigs(const Matrix& m, double tol_sym) {
    SymEig e = sym_eig_full(m, tol_sym);
    return std::vector<double>(e.values.data(), e.values.data() + e.values.size());
}

SymEig sym_eig_full(const Matrix& m, double tol_sym) {
    require_square(m, "sym_eigs");
    require_symmetric(m, tol_sym, "sym_eigs");
    if (m.rows() == 0) return {Vector(0), Matrix(0, 0)};
    Matrix s = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
    if (solver.info() != Eigen::Success)
        throw SingularOperatorError("sym_eigs: eigensolver did not converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

double max_eig_quadratic(const Matrix& w, const Matrix& x) {
    if (x.cols() == 0) return 0.0;
    if (w.rows() != x.rows())
        throw DimensionMismatchError("max_eig_quadratic: incompatible shapes");
    Matrix q = x.transpose() * w * x;
    std::vector<double> ev = sym_eigs(q, 1e-6);
    return ev.back();
}

double spectral_radius(const Matrix& m) {
    require_square(m, "spectral_radius");
    if (m.rows() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw SingularOperatorError("spectral_radius: eigensolver did not converge");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

SubspaceBasis image_basis(const Matrix& m, double tol_rank) {
    if (tol_rank <= 0.0) throw InvalidArgsError("image_basis: tol_rank must be > 0");
    SubspaceBasis out;
    out.ambient_dim = m.rows();
    if (m.rows() == 0 || m.cols() == 0) {
        out.basis = Matrix(m.rows(), 0);
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) >= tol_rank * smax && sv(i) > 0.0) ++rank;
    out.basis = svd.matrixU().leftCols(rank);
    fix_column_signs(out.basis);
    return out;
}

SubspaceBasis kernel_basis(const Matrix& m, double tol_rank) {
    if (tol_rank <= 0.0) throw InvalidArgsError("kernel_basis: tol_rank must be > 0");
    SubspaceBasis out;
    out.ambient_dim = m.cols();
    if (m.cols() == 0) {
        out.basis = Matrix(0, 0);
        return out;
    }
    if (m.rows() == 0) {
        out.basis = Matrix::Identity(m.cols(), m.cols());
        return out;
    }
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) >= tol_rank * smax && sv(i) > 0.0) ++rank;
    out.basis = svd.matrixV().rightCols(m.cols() - rank);
    fix_column_signs(out.basis);
    return out;
}

ContainsResult subspace_contains(const Matrix& target, const Matrix& generators,
                                 double tolerance) {
    if (target.cols() == 0) return {true, 0.0};
    if (target.rows() != generators.rows())
        throw DimensionMismatchError("subspace_contains: row counts differ");
    LstsqResult ls = lstsq_solve(generators, target);
    Matrix resid = generators.cols() == 0 ? target : Matrix(generators * ls.x - target);
    double worst = 0.0;
    for (Index j = 0; j < target.cols(); ++j)
        worst = std::max(worst, resid.col(j).norm());
    return {worst <= tolerance, worst};
}

LstsqResult lstsq_solve(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionMismatchError("lstsq_solve: row counts differ");
    LstsqResult out;
    if (a.cols() == 0) {
        out.x = Matrix(0, b.cols());
        out.residual = b.norm();
        return out;
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    out.x = cod.solve(b);
    out.residual = (a * out.x - b).norm();
    return out;
}

Matrix kron_lyap_solve(const Matrix& abar, const Matrix& e,
                       const std::vector<std::pair<double, Matrix>>& jumps,
                       double kappa_hat, const Matrix& w) {
    require_square(abar, "kron_lyap_solve");
    const Index n = abar.rows();
    if (e.rows() != n || e.cols() != n || w.rows() != n || w.cols() != n)
        throw DimensionMismatchError("kron_lyap_solve: all matrices must be n x n");
    for (const auto& [rate, r] : jumps)
        if (r.rows() != n || r.cols() != n)
            throw DimensionMismatchError("kron_lyap_solve: jump matrix size mismatch");
    require_symmetric(w, tol::sym, "kron_lyap_solve(W)");
    {
        Eigen::LLT<Matrix> llt(0.5 * (w + w.transpose()));
        if (llt.info() != Eigen::Success)
            throw NotPdError("kron_lyap_solve: W is not positive definite");
    }

    // vec(Abar^T M) = (I (x) Abar^T) vec(M); vec(M Abar) = (Abar^T (x) I) vec(M);
    // vec(X^T M X) = (X^T (x) X^T) vec(M), all with column-stacking vec().
    const Matrix id = Matrix::Identity(n, n);
    Matrix op = kron(id, abar.transpose()) + kron(abar.transpose(), id) +
                kron(e.transpose(), e.transpose()) +
                kappa_hat * Matrix::Identity(n * n, n * n);
    for (const auto& [rate, r] : jumps)
        op += rate * kron(r.transpose(), r.transpose());

    Vector rhs(n * n);
    for (Index j = 0; j < n; ++j)
        rhs.segment(j * n, n) = -w.col(j);

    Eigen::FullPivLU<Matrix> lu(op);
    if (!lu.isInvertible())
        throw SingularOperatorError("kron_lyap_solve: vectorized operator is rank-deficient");
    Vector v = lu.solve(rhs);

    Matrix m(n, n);
    for (Index j = 0; j < n; ++j) m.col(j) = v.segment(j * n, n);
    m = 0.5 * (m + m.transpose()).eval();

    Matrix check = abar.transpose() * m + m * abar + e.transpose() * m * e + kappa_hat * m + w;
    for (const auto& [rate, r] : jumps) check += rate * r.transpose() * m * r;
    if (check.norm() > 1e-8 * w.norm())
        throw SingularOperatorError("kron_lyap_solve: plug-back residual too large");
    return m;
}

}  // namespace jlssabs::la
