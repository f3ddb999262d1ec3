#include "jlssabs/abstraction.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jlssabs/linalg.hpp"

namespace jlssabs::abstraction {

namespace {

double fro(const Matrix& m) { return m.size() == 0 ? 0.0 : m.norm(); }

Matrix hcat(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

bool full_column_rank(const Matrix& m, double tol_rank = tol::rank) {
    if (m.cols() == 0) return true;
    return la::image_basis(m, tol_rank).dim() == m.cols();
}

}  // namespace

std::map<std::string, double> con3_residuals(const JlssSystem& sys, const Matrix& chat,
                                             const Matrix& p,
                                             const BehaviorPreservingData& bp) {
    const Index n = sys.n();
    std::map<std::string, double> r;
    r["con3a"] = fro(sys.C - chat * bp.P_hat);
    r["con3b"] = fro(Matrix::Identity(n, n) - (p * bp.P_hat + bp.G * bp.F));
    r["con3c"] = fro(Matrix::Identity(p.cols(), p.cols()) - bp.P_hat * p);
    r["con3d"] = fro(bp.P_hat * sys.E() * bp.G * bp.F);
    double worst = 0.0;
    for (const auto& j : sys.jumps)
        worst = std::max(worst, fro(bp.P_hat * j.reset * bp.G * bp.F));
    r["con3e"] = worst;
    return r;
}

bool PConditionReport::all_ok() const {
    if (!p_injective) return false;
    return std::all_of(items.begin(), items.end(),
                       [](const PConditionItem& it) { return it.ok; });
}

PConditionReport check_p_conditions(const JlssSystem& sys, const Matrix& p,
                                    double tolerance) {
    if (p.rows() != sys.n())
        throw DimensionMismatchError("check_p_conditions: P row count != n");
    PConditionReport rep;
    rep.p_injective = full_column_rank(p);

    const Matrix pb = hcat(p, sys.B);
    auto add = [&rep](const std::string& name, const la::ContainsResult& cr) {
        rep.items.push_back({name, cr.contained, cr.max_residual});
    };
    add("im_AP_in_imP_imB", la::subspace_contains(sys.A * p, pb, tolerance));
    add("im_D_in_imP_imB", la::subspace_contains(sys.D, pb, tolerance));
    add("im_EP_in_imP", la::subspace_contains(sys.E() * p, p, tolerance));
    for (std::size_t i = 0; i < sys.jumps.size(); ++i)
        add("im_R" + std::to_string(i + 1) + "P_in_imP",
            la::subspace_contains(sys.jumps[i].reset * p, p, tolerance));

    // im P + ker C = R^n, decided by the rank of [P | basis(ker C)].
    SubspaceBasis kc = la::kernel_basis(sys.C);
    Matrix span = hcat(p, kc.basis);
    const Index rank = la::image_basis(span).dim();
    rep.items.push_back({"imP_plus_kerC_full",
                         rank == sys.n(),
                         static_cast<double>(sys.n() - rank)});
    return rep;
}

Con2Solution solve_con2(const JlssSystem& sys, const Matrix& p, double tolerance) {
    const Index n = sys.n(), m = sys.m(), nh = p.cols();
    Con2Solution sol;

    // [P | -B] [Ah; Q] = AP and [P | -B] [Dh; S] = D, columnwise least squares.
    // When the stacked system is underdetermined, move nullspace freedom out
    // of the input channel so the identity projection yields Q = 0, S = 0.
    const Matrix pnb = hcat(p, Matrix(-sys.B));
    const SubspaceBasis null_pnb = la::kernel_basis(pnb);
    auto solve_prefer_top = [&](const Matrix& rhs) -> la::LstsqResult {
        la::LstsqResult ls = la::lstsq_solve(pnb, rhs);
        if (null_pnb.dim() > 0 && m > 0) {
            Matrix nb = null_pnb.basis.bottomRows(m);
            Matrix coef = la::lstsq_solve(nb, Matrix(-ls.x.bottomRows(m))).x;
            ls.x += null_pnb.basis * coef;
        }
        return ls;
    };
    {
        la::LstsqResult ls = solve_prefer_top(sys.A * p);
        sol.Ahat = ls.x.topRows(nh);
        sol.Q = ls.x.bottomRows(m);
        sol.residuals["con2a"] = ls.residual;
    }
    {
        la::LstsqResult ls = solve_prefer_top(sys.D);
        sol.Dhat = ls.x.topRows(nh);
        sol.S = ls.x.bottomRows(m);
        sol.residuals["con2b"] = ls.residual;
    }
    sol.Chat = sys.C * p;
    sol.residuals["con2c"] = 0.0;
    {
        la::LstsqResult ls = la::lstsq_solve(p, sys.E() * p);
        sol.Ehat = ls.x;
        sol.residuals["con2g"] = ls.residual;
    }
    double worst = 0.0;
    for (const auto& j : sys.jumps) {
        la::LstsqResult ls = la::lstsq_solve(p, j.reset * p);
        sol.Rhat.push_back(ls.x);
        worst = std::max(worst, ls.residual);
    }
    sol.residuals["con2h"] = worst;

    for (const auto& [name, r] : sol.residuals)
        if (r > tolerance) {
            std::ostringstream os;
            os << "solve_con2: " << name << " residual " << r << " exceeds tolerance "
               << tolerance;
            throw ConditionViolatedError(os.str());
        }
    return sol;
}

void zero_redundant_dhat(const JlssSystem& sys, Matrix& dhat, Matrix& s,
                         const Matrix& p, double tolerance) {
    if (sys.m() == 0) return;
    for (Index j = 0; j < sys.D.cols(); ++j) {
        la::ContainsResult cr = la::subspace_contains(sys.D.col(j), sys.B, tolerance);
        if (!cr.contained) continue;
        // d_j in im B: pick dh_j = 0 and recompute s_j from B s_j = -d_j.
        la::LstsqResult ls = la::lstsq_solve(sys.B, Matrix(-sys.D.col(j)));
        dhat.col(j).setZero();
        s.col(j) = ls.x;
    }
}

BhatResult choose_bhat(const JlssSystem& sys, const Matrix& p, BhatMode mode,
                       const std::optional<Matrix>& user_bhat, double tolerance) {
    const Index n = sys.n(), nh = p.cols();
    BhatResult out;
    if (mode == BhatMode::Identity) {
        out.Bhat = Matrix::Identity(nh, nh);
        return out;
    }
    if (mode == BhatMode::UserProvided) {
        if (!user_bhat) throw InvalidArgsError("choose_bhat: no user Bhat supplied");
        if (user_bhat->rows() != nh)
            throw DimensionMismatchError("choose_bhat: user Bhat row count != nhat");
        out.Bhat = *user_bhat;
        return out;
    }

    if (!full_column_rank(p))
        throw Con3UnsatisfiableError("choose_bhat: P is not injective");

    SubspaceBasis kc = la::kernel_basis(sys.C);
    if (la::image_basis(hcat(p, kc.basis)).dim() < n)
        throw Con3UnsatisfiableError("choose_bhat: im P + ker C != R^n");

    // Complete im P with directions from ker C: standard basis vectors with a
    // zero C column first (by index), then general kernel basis columns.
    Matrix span = p;
    Matrix g(n, n - nh);
    Index got = 0;
    auto try_direction = [&](const Vector& dir) {
        if (got == n - nh) return;
        Matrix cand = hcat(span, Matrix(dir));
        if (la::image_basis(cand).dim() == span.cols() + 1) {
            g.col(got++) = dir;
            span = cand;
        }
    };
    for (Index j = 0; j < n && got < n - nh; ++j) {
        if (sys.C.rows() > 0 && sys.C.col(j).norm() > tolerance) continue;
        try_direction(Vector::Unit(n, j));
    }
    for (Index j = 0; j < kc.basis.cols() && got < n - nh; ++j)
        try_direction(kc.basis.col(j));
    if (got < n - nh)
        throw Con3UnsatisfiableError("choose_bhat: could not complete im P inside ker C");

    // Phat = [I 0] [P G]^{-1}; F from G F = I - P Phat (G has full column rank).
    Matrix pg = hcat(p, g);
    Eigen::FullPivLU<Matrix> lu(pg);
    if (!lu.isInvertible())
        throw Con3UnsatisfiableError("choose_bhat: [P G] is singular");
    Matrix inv = lu.inverse();
    BehaviorPreservingData bp;
    bp.P_hat = inv.topRows(nh);
    Matrix proj = Matrix::Identity(n, n) - p * bp.P_hat;
    bp.F = la::lstsq_solve(g, proj).x;
    bp.G = g;

    Matrix chat = sys.C * p;
    auto res = con3_residuals(sys, chat, p, bp);
    if (res["con3a"] > tolerance || res["con3b"] > tolerance || res["con3c"] > tolerance)
        throw Con3UnsatisfiableError("choose_bhat: con3a-c residuals exceed tolerance");
    if (res["con3d"] > tolerance || res["con3e"] > tolerance) {
        std::ostringstream os;
        os << "choose_bhat: con3d/e violated (d = " << res["con3d"]
           << ", e = " << res["con3e"] << ")";
        throw Con3deViolatedError(os.str());
    }

    out.Bhat = hcat(bp.P_hat * sys.B, bp.P_hat * sys.A * g);
    out.bp = std::move(bp);
    return out;
}

AbstractionResult build_abstraction(const JlssSystem& sys, const Matrix& p,
                                    const AbstractionOptions& opts) {
    sys.validate();
    if (p.rows() != sys.n())
        throw DimensionMismatchError("build_abstraction: P row count != n");
    const double pi = opts.pi.value_or(opts.kappa_hat / 2.0);
    if (!(pi > 0.0 && pi < opts.kappa_hat))
        throw InvalidArgsError("build_abstraction: pi must lie in (0, kappa_hat)");

    auto step = [](int num, const std::string& what) {
        return "table-1 step " + std::to_string(num) + " (" + what + ")";
    };
    AbstractionResult out;

    // 1. (M, K)
    ssf::MkResult mk;
    try {
        mk = ssf::synthesize_mk(sys, opts.kappa_hat, opts.mk);
    } catch (const Error& e) {
        throw ConditionViolatedError(step(1, "M,K synthesis") + ": " + e.what());
    }
    out.mk_path = mk.path_used;
    out.residuals["con1_margin"] = mk.margins.con1;
    out.residuals["con11_margin"] = mk.margins.con11;

    // 2. P admissibility
    PConditionReport pc = check_p_conditions(sys, p, opts.tol_eq);
    if (!pc.all_ok()) {
        std::ostringstream os;
        os << step(2, "P conditions") << " failed:";
        if (!pc.p_injective) os << " P not injective;";
        for (const auto& it : pc.items)
            if (!it.ok) os << " " << it.name << " (residual " << it.residual << ");";
        throw ConditionViolatedError(os.str());
    }

    // 3.-5., 8.-9. matching equations
    Con2Solution con2;
    try {
        con2 = solve_con2(sys, p, opts.tol_eq);
    } catch (const Error& e) {
        throw ConditionViolatedError(step(3, "matching equations") + ": " + e.what());
    }
    zero_redundant_dhat(sys, con2.Dhat, con2.S, p, opts.tol_eq);
    for (const auto& [name, r] : con2.residuals) out.residuals[name] = r;

    // 6. abstract input matrix
    BhatResult bh;
    try {
        bh = choose_bhat(sys, p, opts.bhat_mode, opts.user_bhat, opts.tol_eq);
    } catch (const Error& e) {
        throw ConditionViolatedError(step(6, "Bhat selection") + ": " + e.what());
    }
    if (bh.bp) {
        auto c3 = con3_residuals(sys, con2.Chat, p, *bh.bp);
        for (const auto& [name, r] : c3) out.residuals[name] = r;
    }

    out.abs_sys.A = con2.Ahat;
    out.abs_sys.B = bh.Bhat;
    out.abs_sys.C = con2.Chat;
    out.abs_sys.D = con2.Dhat;
    out.abs_sys.diffusion = {con2.Ehat};
    for (std::size_t i = 0; i < sys.jumps.size(); ++i)
        out.abs_sys.jumps.push_back({sys.jumps[i].rate, con2.Rhat[i]});
    out.abs_sys.validate();
    out.bp = bh.bp;

    // 7. interface matrix R~
    Matrix rtilde;
    try {
        rtilde = ssf::compute_r_tilde(mk.M, sys.B, p, bh.Bhat);
    } catch (const Error& e) {
        throw ConditionViolatedError(step(7, "R~ computation") + ": " + e.what());
    }

    out.cert = {mk.M, mk.K, p, con2.Q, con2.S, rtilde, opts.kappa_hat, pi};
    out.gains = ssf::extract_gains(out.cert, sys, out.abs_sys, opts.tol_eq);
    out.verify = ssf::verify_ssf(out.cert, sys, out.abs_sys, opts.verify_trials,
                                 opts.verify_seed, opts.tol_eq);
    if (!out.verify.ok())
        throw CertificateInvalidError(
            "build_abstraction: verification failed (worst slack " +
            std::to_string(out.verify.worst_slack) + ")");
    return out;
}

std::vector<Matrix> candidate_projections(const JlssSystem& sys, Index nhat,
                                          double tolerance) {
    const Index n = sys.n();
    if (nhat <= 0 || nhat > n) return {};
    Eigen::EigenSolver<Matrix> es(sys.A);
    std::vector<Vector> real_vecs;
    for (Index i = 0; i < n; ++i) {
        if (std::abs(es.eigenvalues()(i).imag()) > 1e-10) continue;
        Vector v = es.eigenvectors().col(i).real();
        if (v.norm() < 1e-12) continue;
        v /= v.norm();
        // deterministic sign
        Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0) v = -v;
        real_vecs.push_back(v);
    }
    std::vector<Matrix> out;
    std::vector<Index> idx(nhat);
    // enumerate nhat-subsets in lexicographic order
    std::vector<bool> mask(real_vecs.size(), false);
    std::fill(mask.begin(), mask.begin() + std::min<std::size_t>(nhat, mask.size()), true);
    if (real_vecs.size() < static_cast<std::size_t>(nhat)) return {};
    do {
        Matrix p(n, nhat);
        Index c = 0;
        for (std::size_t i = 0; i < real_vecs.size(); ++i)
            if (mask[i]) p.col(c++) = real_vecs[i];
        if (!la::image_basis(p).dim()) continue;
        if (la::image_basis(p).dim() != nhat) continue;
        if (check_p_conditions(sys, p, tolerance).all_ok()) out.push_back(p);
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return out;
}

}  // namespace jlssabs::abstraction
