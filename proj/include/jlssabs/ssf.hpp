#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jlssabs/model.hpp"

namespace jlssabs::ssf {

/// Quadratic simulation-function certificate for a (concrete, abstract) pair:
///   V(x, xh) = (x - P xh)^T M (x - P xh)
/// with interface u = K (x - P xh) + Q xh + R_tilde uh + S wh.
struct QuadraticSsf {
    Matrix M;        // n x n symmetric PD
    Matrix K;        // m x n
    Matrix P;        // n x nh
    Matrix Q;        // m x nh
    Matrix S;        // m x p
    Matrix R_tilde;  // m x mh
    double kappa_hat = 0.0;
    double pi = 0.0;  // in (0, kappa_hat)
};

/// Slopes of the (linear) K-infinity functions of the certificate:
///   alpha(s) = a s, eta(s) = h s, rho_ext(s) = r_e s, rho_int(s) = r_i s,
/// with a = 1, h = kappa_hat - pi, r_e = 2 lmax (B R~ - P Bh)^T M (.)/pi,
/// r_i = 2 lmax D^T M D / pi.
struct LinearGains {
    double alpha_slope = 1.0;
    double eta_slope = 0.0;
    double rho_ext_slope = 0.0;
    double rho_int_slope = 0.0;
};

struct DesignMargins {
    double con1 = 0.0;   // lmin(M - C^T C)
    double con11 = 0.0;  // -lmax(Abar^T M + M Abar + E^T M E + sum l R^T M R + kh M)
    bool satisfied(double tol_eq = tol::eq) const {
        return con1 >= -tol_eq && con11 >= -tol_eq;
    }
};

/// Margins of the two design inequalities, with Abar = A + B K + sum_i l_i R_i.
DesignMargins check_design_inequalities(const JlssSystem& sys, const Matrix& m,
                                        const Matrix& k, double kappa_hat);

enum class MkPath { Auto, Lmi, Fallback };

struct MkOptions {
    MkPath path = MkPath::Auto;
    std::optional<Matrix> user_k;                 // fallback uses this K if given
    std::optional<std::pair<Matrix, Matrix>> user_mk;  // accept (M, K) verbatim, re-certified
    int budget = 10000;                           // LMI iteration budget
};

struct MkResult {
    Matrix M;
    Matrix K;
    DesignMargins margins;
    std::string path_used;  // "lmi" | "fallback" | "user"
    int iterations = 0;
};

/// Find (M, K) passing check_design_inequalities with margins >= 0. Two routes:
/// (i) feasibility of the lifted LMIs in (M^-1, K M^-1) by alternating
/// projections, (ii) fallback pole-placement K plus the Kronecker Lyapunov
/// solve, then con1 scaling. The solver is untrusted: results are always
/// re-certified before return. Throws InfeasibleError / NotConvergedError.
MkResult synthesize_mk(const JlssSystem& sys, double kappa_hat,
                       const MkOptions& opts = {});

/// Smallest c >= 1 with c M - C^T C PSD; returns c * M. con11 satisfaction is
/// invariant under this scaling (the inequality is homogeneous in M).
Matrix scale_for_con1(const Matrix& m, const Matrix& c);

/// Exact infinitesimal generator of V along the coupled pair at the given
/// point, with shared Brownian and Poisson drivers:
///   L V = 2 (x-P xh)^T M [(A x + B u + D w) - P (Ah xh + Bh uh + Dh wh)]
///       + (E x - P Eh xh)^T M (E x - P Eh xh)
///       + sum_i l_i [ V(x + R_i x, xh + Rh_i xh) - V(x, xh) ].
double generator_quadratic(const QuadraticSsf& ssf, const JlssSystem& sys,
                           const JlssSystem& abs_sys, const Vector& x,
                           const Vector& xhat, const Vector& u, const Vector& uhat,
                           const Vector& w, const Vector& what);

/// u = K (x - P xh) + Q xh + R_tilde uh + S wh.
Vector interface_u(const QuadraticSsf& ssf, const Vector& x, const Vector& xhat,
                   const Vector& uhat, const Vector& what);

/// R_tilde = (B^T M B)^{-1} B^T M P Bh, the rho_ext-minimizing choice.
/// Empty when B has no columns. Throws SingularGramError.
Matrix compute_r_tilde(const Matrix& m, const Matrix& b, const Matrix& p,
                       const Matrix& bhat);

/// Gains of a verified certificate. Throws CertificateInvalidError when the
/// design margins are violated.
LinearGains extract_gains(const QuadraticSsf& ssf, const JlssSystem& sys,
                          const JlssSystem& abs_sys, double tol_eq = tol::eq);

struct VerifyReport {
    DesignMargins margins;
    std::map<std::string, double> con2_residuals;  // con2a, con2b, con2c, con2g, con2h
    double worst_slack = 0.0;  // min over samples of RHS - LV; >= -tol means pass
    std::uint64_t trials = 0;
    bool algebraic_ok = false;
    bool dissipation_ok = false;
    bool ok() const { return algebraic_ok && dissipation_ok; }
};

/// (i) residuals of the algebraic conditions; (ii) randomized check of
///   L V <= -h V + r_e ||uh||^2 + r_i ||w - wh||^2 + tol_eq
/// over `trials` samples with entries in [-10, 10], u from the interface.
/// Sampling runs on per-trial derived streams; `parallel` selects the OpenMP
/// path, the serial path is the reference (identical result either way).
VerifyReport verify_ssf(const QuadraticSsf& ssf, const JlssSystem& sys,
                        const JlssSystem& abs_sys, std::uint64_t trials,
                        std::uint64_t seed = 0, double tol_eq = tol::eq,
                        bool parallel = true);

}  // namespace jlssabs::ssf
