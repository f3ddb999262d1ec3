#include "jlssabs/ssf.hpp"

#include <omp.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jlssabs/linalg.hpp"
#include "jlssabs/rng.hpp"

namespace jlssabs::ssf {

namespace {

Matrix drift_with_rates(const JlssSystem& sys, const Matrix& k) {
    Matrix abar = sys.A;
    if (sys.m() > 0) abar += sys.B * k;
    for (const auto& j : sys.jumps) abar += j.rate * j.reset;
    return abar;
}

double quad_form(const Matrix& m, const Vector& v) { return v.dot(m * v); }

void require_rate_match(const JlssSystem& sys, const JlssSystem& abs_sys) {
    if (sys.jumps.size() != abs_sys.jumps.size())
        throw DimensionMismatchError("coupled pair: jump kind counts differ");
    for (std::size_t i = 0; i < sys.jumps.size(); ++i)
        if (std::abs(sys.jumps[i].rate - abs_sys.jumps[i].rate) >
            1e-12 * (1.0 + std::abs(sys.jumps[i].rate)))
            throw InvalidArgsError("coupled pair: jump rates differ at kind " +
                                   std::to_string(i));
}

// ---------------------------------------------------------------------------
// LMI feasibility by alternating projections.
//
// Decision vector x = (vech(Mbar), vec(Kbar)) with Mbar = M^{-1}, Kbar = K Mbar.
// Three affine-in-x symmetric blocks must be PSD with a small margin:
//   Z1 = [[Mbar, Mbar C^T], [C Mbar, I_q]]
//   Z2 = arrowhead([Mbar ...], couplings X_t Mbar, corner Qbar)
//        with X in {E, sqrt(l_i) R_i} and
//        Qbar = -kh Mbar - Mbar A0^T - A0 Mbar - Kbar^T B^T - B Kbar,
//        A0 = A + sum_i l_i R_i
//   Z3 = Mbar
// Iterate: project the PSD-clipped targets back onto the affine image.
// ---------------------------------------------------------------------------
class LmiProblem {
  public:
    LmiProblem(const JlssSystem& sys, double kappa_hat)
        : n_(sys.n()), m_(sys.m()), kappa_(kappa_hat) {
        a0_ = sys.A;
        for (const auto& j : sys.jumps) a0_ += j.rate * j.reset;
        b_ = sys.B;
        c_ = sys.C;
        couplings_.push_back(sys.E());
        for (const auto& j : sys.jumps)
            couplings_.push_back(std::sqrt(j.rate) * j.reset);

        nvar_ = n_ * (n_ + 1) / 2 + m_ * n_;
        sizes_ = {n_ + c_.rows(),
                  static_cast<Index>(couplings_.size() + 1) * n_, n_};
        total_ = 0;
        for (Index s : sizes_) total_ += s * s;

        base_ = stack(Vector::Zero(nvar_));
        gram_ = Matrix(total_, nvar_);
        for (Index k = 0; k < nvar_; ++k) {
            Vector e = Vector::Zero(nvar_);
            e(k) = 1.0;
            gram_.col(k) = stack(e) - base_;
        }
        solver_.compute(gram_);
    }

    Index nvar() const { return nvar_; }
    const std::vector<Index>& sizes() const { return sizes_; }

    Vector stack(const Vector& x) const {
        auto [mbar, kbar] = unpack(x);
        Vector out(total_);
        Index off = 0;
        auto put = [&out, &off](const Matrix& z) {
            for (Index j = 0; j < z.cols(); ++j)
                out.segment(off + j * z.rows(), z.rows()) = z.col(j);
            off += z.rows() * z.cols();
        };
        put(block1(mbar));
        put(block2(mbar, kbar));
        put(mbar);
        return out;
    }

    Vector project_affine(const Vector& target) const { return solver_.solve(target - base_); }

    std::pair<Matrix, Matrix> unpack(const Vector& x) const {
        Matrix mbar(n_, n_);
        Index k = 0;
        for (Index i = 0; i < n_; ++i)
            for (Index j = i; j < n_; ++j) {
                mbar(i, j) = x(k);
                mbar(j, i) = x(k);
                ++k;
            }
        Matrix kbar(m_, n_);
        for (Index i = 0; i < m_; ++i)
            for (Index j = 0; j < n_; ++j) kbar(i, j) = x(k++);
        return {mbar, kbar};
    }

    Matrix block1(const Matrix& mbar) const {
        const Index q = c_.rows();
        Matrix z(n_ + q, n_ + q);
        z.topLeftCorner(n_, n_) = mbar;
        z.topRightCorner(n_, q) = mbar * c_.transpose();
        z.bottomLeftCorner(q, n_) = c_ * mbar;
        z.bottomRightCorner(q, q) = Matrix::Identity(q, q);
        return z;
    }

    Matrix block2(const Matrix& mbar, const Matrix& kbar) const {
        const Index nc = static_cast<Index>(couplings_.size());
        const Index size = (nc + 1) * n_;
        Matrix z = Matrix::Zero(size, size);
        for (Index t = 0; t < nc; ++t) {
            z.block(t * n_, t * n_, n_, n_) = mbar;
            Matrix cm = couplings_[t] * mbar;
            z.block(t * n_, nc * n_, n_, n_) = cm;
            z.block(nc * n_, t * n_, n_, n_) = cm.transpose();
        }
        Matrix qbar = -kappa_ * mbar - mbar * a0_.transpose() - a0_ * mbar;
        if (m_ > 0) qbar -= kbar.transpose() * b_.transpose() + b_ * kbar;
        z.block(nc * n_, nc * n_, n_, n_) = qbar;
        return z;
    }

  private:
    Index n_, m_;
    double kappa_;
    Matrix a0_, b_, c_;
    std::vector<Matrix> couplings_;
    Index nvar_ = 0, total_ = 0;
    std::vector<Index> sizes_;
    Vector base_;
    Matrix gram_;
    Eigen::CompleteOrthogonalDecomposition<Matrix> solver_;
};

Vector clip_psd_stack(const LmiProblem& prob, const Vector& stacked,
                      const std::vector<double>& floors) {
    Vector out(stacked.size());
    Index off = 0;
    for (std::size_t bi = 0; bi < prob.sizes().size(); ++bi) {
        const Index s = prob.sizes()[bi];
        Matrix z(s, s);
        for (Index j = 0; j < s; ++j) z.col(j) = stacked.segment(off + j * s, s);
        z = 0.5 * (z + z.transpose()).eval();
        la::SymEig eig = la::sym_eig_full(z, 1.0);
        Vector vals = eig.values.cwiseMax(floors[bi]);
        Matrix clipped = eig.vectors * vals.asDiagonal() * eig.vectors.transpose();
        for (Index j = 0; j < s; ++j) out.segment(off + j * s, s) = clipped.col(j);
        off += s * s;
    }
    return out;
}

double min_block_eig(const LmiProblem& prob, const Vector& stacked) {
    double worst = std::numeric_limits<double>::infinity();
    Index off = 0;
    for (Index s : prob.sizes()) {
        Matrix z(s, s);
        for (Index j = 0; j < s; ++j) z.col(j) = stacked.segment(off + j * s, s);
        z = 0.5 * (z + z.transpose()).eval();
        worst = std::min(worst, la::sym_eigs(z, 1.0).front());
        off += s * s;
    }
    return worst;
}

// Both design inequalities are homogeneous in M, so a feasible M can be
// shrunk until con1 is tight; this shrinks V and the rho slopes by the same
// factor and keeps the margins nonnegative. A tiny headroom guards roundoff.
Matrix normalize_con1_tight(const JlssSystem& sys, const Matrix& m, const Matrix& k,
                            double kappa_hat) {
    if (sys.C.rows() == 0 || max_abs(sys.C) == 0.0) return m;
    la::SymEig em = la::sym_eig_full(m);
    if (em.values.minCoeff() <= 0.0) return m;
    Vector inv_sqrt = em.values.cwiseInverse().cwiseSqrt();
    Matrix msqrt_inv = em.vectors * inv_sqrt.asDiagonal() * em.vectors.transpose();
    Matrix g = msqrt_inv * sys.C.transpose() * sys.C * msqrt_inv;
    const double gamma = la::sym_eigs(g, 1e-6).back();
    if (!(gamma > 0.0) || gamma >= 1.0) return m;
    Matrix scaled = gamma * (1.0 + 1e-9) * m;
    DesignMargins dm = check_design_inequalities(sys, scaled, k, kappa_hat);
    return (dm.con1 >= 0.0 && dm.con11 >= 0.0) ? scaled : m;
}

struct LmiOutcome {
    bool found = false;
    Matrix M, K;
    int iterations = 0;
    double final_margin = 0.0;
};

LmiOutcome solve_lmi(const JlssSystem& sys, double kappa_hat, int budget) {
    LmiOutcome out;
    if (sys.n() > 24) return out;  // dense POCS not worth it; fallback covers
    LmiProblem prob(sys, kappa_hat);
    const double scale = 1.0 + max_abs(sys.A);
    const std::vector<double> floors = {1e-7 * scale, 1e-7 * scale, 1e-5};

    Vector x = Vector::Zero(prob.nvar());
    {   // start from Mbar = I, Kbar = 0
        auto [mbar, kbar] = prob.unpack(x);
        mbar.setIdentity();
        Index k = 0;
        for (Index i = 0; i < mbar.rows(); ++i)
            for (Index j = i; j < mbar.cols(); ++j) x(k++) = mbar(i, j);
    }

    auto certify = [&](const Vector& xc) -> bool {
        auto [mbar, kbar] = prob.unpack(xc);
        Eigen::LLT<Matrix> llt(mbar);
        if (llt.info() != Eigen::Success) return false;
        Matrix m = mbar.inverse();
        m = 0.5 * (m + m.transpose()).eval();
        Matrix k = sys.m() > 0 ? Matrix(kbar * m) : Matrix(sys.m(), sys.n());
        DesignMargins dm = check_design_inequalities(sys, m, k, kappa_hat);
        if (dm.con1 < 0.0) {
            m = scale_for_con1(m, sys.C) * (1.0 + 1e-9);
            dm = check_design_inequalities(sys, m, k, kappa_hat);
        }
        if (!(dm.con1 >= 0.0 && dm.con11 >= 0.0)) return false;
        out.M = normalize_con1_tight(sys, m, k, kappa_hat);
        out.K = k;
        out.found = true;
        return true;
    };

    Vector z = clip_psd_stack(prob, prob.stack(x), floors);
    for (int it = 0; it < budget; ++it) {
        x = prob.project_affine(z);
        Vector y = prob.stack(x);
        out.iterations = it + 1;
        if (it % 25 == 24 || it == budget - 1) {
            out.final_margin = min_block_eig(prob, y);
            if (out.final_margin >= 0.0 && certify(x)) return out;
        }
        z = clip_psd_stack(prob, y, floors);
    }
    out.final_margin = min_block_eig(prob, prob.stack(x));
    certify(x);
    out.iterations = budget;
    return out;
}

// Single-input pole placement (Ackermann). Returns empty on uncontrollability.
std::optional<Matrix> ackermann(const Matrix& a, const Matrix& b,
                                const std::vector<double>& poles) {
    const Index n = a.rows();
    Matrix ctrb(n, n);
    Vector col = b.col(0);
    for (Index i = 0; i < n; ++i) {
        ctrb.col(i) = col;
        col = a * col;
    }
    Eigen::FullPivLU<Matrix> lu(ctrb);
    if (!lu.isInvertible()) return std::nullopt;
    Matrix phi = Matrix::Identity(n, n);
    for (double p : poles) phi = phi * (a - p * Matrix::Identity(n, n));
    Matrix en = Matrix::Zero(1, n);
    en(0, n - 1) = 1.0;
    return Matrix(-en * lu.inverse() * phi);
}

struct FallbackOutcome {
    bool found = false;
    Matrix M, K;
    double last_margin = -std::numeric_limits<double>::infinity();
};

FallbackOutcome solve_fallback(const JlssSystem& sys, double kappa_hat,
                               const std::optional<Matrix>& user_k) {
    FallbackOutcome out;
    const Index n = sys.n(), m = sys.m();
    double eps = 1e-3 * sys.A.norm();
    if (eps <= 0.0) eps = 1e-3;
    const Matrix w = eps * Matrix::Identity(n, n);

    std::vector<Matrix> candidates;
    if (user_k) {
        candidates.push_back(*user_k);
    } else if (m == 0) {
        candidates.push_back(Matrix(0, n));
    } else {
        Matrix a0 = sys.A;
        for (const auto& j : sys.jumps) a0 += j.rate * j.reset;
        candidates.push_back(Matrix::Zero(m, n));
        for (double shift : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
            if (m == 1) {
                std::vector<double> poles(n);
                for (Index i = 0; i < n; ++i)
                    poles[i] = -(kappa_hat / 2.0 + shift * (1.0 + 0.25 * i));
                if (auto k = ackermann(a0, sys.B, poles)) candidates.push_back(*k);
            } else {
                candidates.push_back(Matrix(-shift * sys.B.transpose()));
            }
        }
    }

    for (const Matrix& k : candidates) {
        if (k.rows() != m || k.cols() != n) continue;
        Matrix abar = drift_with_rates(sys, k);
        std::vector<std::pair<double, Matrix>> jumps;
        for (const auto& j : sys.jumps) jumps.emplace_back(j.rate, j.reset);
        Matrix mm;
        try {
            mm = la::kron_lyap_solve(abar, sys.E(), jumps, kappa_hat, w);
        } catch (const Error&) {
            continue;
        }
        if (la::sym_eigs(mm).front() <= 0.0) continue;  // indefinite: reject
        mm = scale_for_con1(mm, sys.C) * (1.0 + 1e-9);
        DesignMargins dm = check_design_inequalities(sys, mm, k, kappa_hat);
        out.last_margin = std::max(out.last_margin, std::min(dm.con1, dm.con11));
        if (dm.con1 >= 0.0 && dm.con11 >= 0.0) {
            out.found = true;
            out.M = mm;
            out.K = k;
            return out;
        }
    }
    return out;
}

}  // namespace

DesignMargins check_design_inequalities(const JlssSystem& sys, const Matrix& m,
                                        const Matrix& k, double kappa_hat) {
    const Index n = sys.n();
    if (m.rows() != n || m.cols() != n)
        throw DimensionMismatchError("check_design_inequalities: M must be n x n");
    if (k.rows() != sys.m() || k.cols() != n)
        throw DimensionMismatchError("check_design_inequalities: K must be m x n");
    DesignMargins out;
    Matrix lhs1 = m - sys.C.transpose() * sys.C;
    out.con1 = la::sym_eigs(lhs1, 1e-6).front();

    Matrix abar = drift_with_rates(sys, k);
    Matrix lhs2 = abar.transpose() * m + m * abar + sys.E().transpose() * m * sys.E() +
                  kappa_hat * m;
    for (const auto& j : sys.jumps) lhs2 += j.rate * j.reset.transpose() * m * j.reset;
    out.con11 = -la::sym_eigs(lhs2, 1e-6).back();
    return out;
}

MkResult synthesize_mk(const JlssSystem& sys, double kappa_hat, const MkOptions& opts) {
    sys.validate();
    if (kappa_hat <= 0.0) throw InvalidArgsError("synthesize_mk: kappa_hat must be > 0");

    if (opts.user_mk) {
        MkResult res;
        res.M = opts.user_mk->first;
        res.K = opts.user_mk->second;
        res.margins = check_design_inequalities(sys, res.M, res.K, kappa_hat);
        res.path_used = "user";
        if (!(res.margins.con1 >= 0.0 && res.margins.con11 >= 0.0))
            throw InfeasibleError("synthesize_mk: user (M,K) fails the design inequalities",
                                  std::min(res.margins.con1, res.margins.con11));
        return res;
    }

    double lmi_margin = 0.0;
    if (opts.path != MkPath::Fallback) {
        LmiOutcome lmi = solve_lmi(sys, kappa_hat, opts.budget);
        if (lmi.found) {
            MkResult res;
            res.M = lmi.M;
            res.K = lmi.K;
            res.margins = check_design_inequalities(sys, res.M, res.K, kappa_hat);
            res.path_used = "lmi";
            res.iterations = lmi.iterations;
            return res;
        }
        lmi_margin = lmi.final_margin;
        if (opts.path == MkPath::Lmi) {
            if (lmi_margin < 0.0)
                throw InfeasibleError("synthesize_mk: LMI infeasible within budget, margin " +
                                          std::to_string(lmi_margin),
                                      lmi_margin);
            throw NotConvergedError("synthesize_mk: LMI budget exhausted");
        }
    }

    FallbackOutcome fb = solve_fallback(sys, kappa_hat, opts.user_k);
    if (fb.found) {
        MkResult res;
        res.M = fb.M;
        res.K = fb.K;
        res.margins = check_design_inequalities(sys, res.M, res.K, kappa_hat);
        res.path_used = "fallback";
        return res;
    }
    std::ostringstream os;
    os << "synthesize_mk: no certificate found (lmi margin " << lmi_margin
       << ", fallback margin " << fb.last_margin << ")";
    throw InfeasibleError(os.str(), std::min(lmi_margin, fb.last_margin));
}

Matrix scale_for_con1(const Matrix& m, const Matrix& c) {
    Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success)
        throw NotPdError("scale_for_con1: M is not positive definite");
    if (c.rows() == 0 || max_abs(c) == 0.0) return m;
    // generalized eigenvalue lmax(C^T C, M) via M^{-1/2} C^T C M^{-1/2}
    la::SymEig em = la::sym_eig_full(m);
    Vector inv_sqrt = em.values.cwiseInverse().cwiseSqrt();
    Matrix msqrt_inv = em.vectors * inv_sqrt.asDiagonal() * em.vectors.transpose();
    Matrix g = msqrt_inv * c.transpose() * c * msqrt_inv;
    double lmax = la::sym_eigs(g, 1e-6).back();
    double scale = std::max(1.0, lmax);
    return scale * m;
}

double generator_quadratic(const QuadraticSsf& ssf, const JlssSystem& sys,
                           const JlssSystem& abs_sys, const Vector& x,
                           const Vector& xhat, const Vector& u, const Vector& uhat,
                           const Vector& w, const Vector& what) {
    const Index n = sys.n(), nh = abs_sys.n();
    if (x.size() != n || xhat.size() != nh || u.size() != sys.m() ||
        uhat.size() != abs_sys.m() || w.size() != sys.p() || what.size() != abs_sys.p())
        throw DimensionMismatchError("generator_quadratic: argument size mismatch");
    if (ssf.M.rows() != n || ssf.P.rows() != n || ssf.P.cols() != nh)
        throw DimensionMismatchError("generator_quadratic: certificate size mismatch");
    require_rate_match(sys, abs_sys);

    const Vector v = x - ssf.P * xhat;
    const Vector f = sys.A * x + sys.B * u + sys.D * w;
    const Vector fh = abs_sys.A * xhat + abs_sys.B * uhat + abs_sys.D * what;
    double lv = 2.0 * v.dot(ssf.M * (f - ssf.P * fh));

    // Shared scalar Brownian motion: the mixed second-order term is the full
    // square of (E x - P Eh xh).
    const Vector dvec = sys.E() * x - ssf.P * (abs_sys.E() * xhat);
    lv += quad_form(ssf.M, dvec);

    const double v0 = quad_form(ssf.M, v);
    for (std::size_t i = 0; i < sys.jumps.size(); ++i) {
        const Vector xj = x + sys.jumps[i].reset * x;
        const Vector xhj = xhat + abs_sys.jumps[i].reset * xhat;
        const Vector vj = xj - ssf.P * xhj;
        lv += sys.jumps[i].rate * (quad_form(ssf.M, vj) - v0);
    }
    return lv;
}

Vector interface_u(const QuadraticSsf& ssf, const Vector& x, const Vector& xhat,
                   const Vector& uhat, const Vector& what) {
    if (x.size() != ssf.P.rows() || xhat.size() != ssf.P.cols() ||
        uhat.size() != ssf.R_tilde.cols() || what.size() != ssf.S.cols())
        throw DimensionMismatchError("interface_u: argument size mismatch");
    return ssf.K * (x - ssf.P * xhat) + ssf.Q * xhat + ssf.R_tilde * uhat + ssf.S * what;
}

Matrix compute_r_tilde(const Matrix& m, const Matrix& b, const Matrix& p,
                       const Matrix& bhat) {
    if (b.rows() != m.rows() || p.rows() != m.rows() || p.cols() != bhat.rows())
        throw DimensionMismatchError("compute_r_tilde: shape mismatch");
    if (b.cols() == 0) return Matrix(0, bhat.cols());
    Matrix gram = b.transpose() * m * b;
    Eigen::FullPivLU<Matrix> lu(gram);
    if (!lu.isInvertible())
        throw SingularGramError("compute_r_tilde: B^T M B is singular");
    return lu.solve(b.transpose() * m * p * bhat);
}

LinearGains extract_gains(const QuadraticSsf& ssf, const JlssSystem& sys,
                          const JlssSystem& abs_sys, double tol_eq) {
    DesignMargins dm = check_design_inequalities(sys, ssf.M, ssf.K, ssf.kappa_hat);
    if (!dm.satisfied(tol_eq))
        throw CertificateInvalidError("extract_gains: design inequalities violated");
    if (!(ssf.pi > 0.0 && ssf.pi < ssf.kappa_hat))
        throw CertificateInvalidError("extract_gains: pi outside (0, kappa_hat)");
    LinearGains g;
    g.alpha_slope = 1.0;
    g.eta_slope = ssf.kappa_hat - ssf.pi;
    Matrix mismatch = sys.B * ssf.R_tilde - ssf.P * abs_sys.B;
    g.rho_ext_slope = 2.0 * la::max_eig_quadratic(ssf.M, mismatch) / ssf.pi;
    g.rho_int_slope = 2.0 * la::max_eig_quadratic(ssf.M, sys.D) / ssf.pi;
    return g;
}

VerifyReport verify_ssf(const QuadraticSsf& ssf, const JlssSystem& sys,
                        const JlssSystem& abs_sys, std::uint64_t trials,
                        std::uint64_t seed, double tol_eq, bool parallel) {
    VerifyReport rep;
    rep.trials = trials;
    rep.margins = check_design_inequalities(sys, ssf.M, ssf.K, ssf.kappa_hat);

    auto fro = [](const Matrix& m) { return m.size() == 0 ? 0.0 : m.norm(); };
    rep.con2_residuals["con2a"] = fro(sys.A * ssf.P - (ssf.P * abs_sys.A - sys.B * ssf.Q));
    rep.con2_residuals["con2b"] = fro(sys.D - (ssf.P * abs_sys.D - sys.B * ssf.S));
    rep.con2_residuals["con2c"] = fro(sys.C * ssf.P - abs_sys.C);
    rep.con2_residuals["con2g"] = fro(sys.E() * ssf.P - ssf.P * abs_sys.E());
    double rh = 0.0;
    require_rate_match(sys, abs_sys);
    for (std::size_t i = 0; i < sys.jumps.size(); ++i)
        rh = std::max(rh, fro(sys.jumps[i].reset * ssf.P - ssf.P * abs_sys.jumps[i].reset));
    rep.con2_residuals["con2h"] = rh;

    rep.algebraic_ok = rep.margins.satisfied(tol_eq);
    for (const auto& [name, r] : rep.con2_residuals)
        rep.algebraic_ok = rep.algebraic_ok && r <= tol_eq;

    LinearGains g;
    g.eta_slope = ssf.kappa_hat - ssf.pi;
    g.rho_ext_slope =
        2.0 * la::max_eig_quadratic(ssf.M, sys.B * ssf.R_tilde - ssf.P * abs_sys.B) / ssf.pi;
    g.rho_int_slope = 2.0 * la::max_eig_quadratic(ssf.M, sys.D) / ssf.pi;

    const Index n = sys.n(), nh = abs_sys.n(), mh = abs_sys.m(), p = sys.p();
    const auto sample_slack = [&](std::uint64_t t) {
        rng::Stream st(seed, t, rng::Role::Verify);
        auto draw = [&st](Index len) {
            Vector v(len);
            for (Index i = 0; i < len; ++i) v(i) = 20.0 * st.uniform01() - 10.0;
            return v;
        };
        Vector x = draw(n), xh = draw(nh), uh = draw(mh), wh = draw(p), w = draw(p);
        Vector u = interface_u(ssf, x, xh, uh, wh);
        double lv = generator_quadratic(ssf, sys, abs_sys, x, xh, u, uh, w, wh);
        double v = quad_form(ssf.M, Vector(x - ssf.P * xh));
        double rhs = -g.eta_slope * v + g.rho_ext_slope * uh.squaredNorm() +
                     g.rho_int_slope * (w - wh).squaredNorm();
        return rhs - lv;
    };

    double worst = std::numeric_limits<double>::infinity();
    if (trials > 0) worst = sample_slack(0);  // serial probe: surface dimension errors
    if (parallel) {
#pragma omp parallel for reduction(min : worst) schedule(static)
        for (std::int64_t t = 1; t < static_cast<std::int64_t>(trials); ++t)
            worst = std::min(worst, sample_slack(static_cast<std::uint64_t>(t)));
    } else {
        for (std::uint64_t t = 1; t < trials; ++t)
            worst = std::min(worst, sample_slack(t));
    }
    rep.worst_slack = trials == 0 ? 0.0 : worst;
    rep.dissipation_ok = rep.worst_slack >= -tol_eq;
    return rep;
}

}  // namespace jlssabs::ssf
