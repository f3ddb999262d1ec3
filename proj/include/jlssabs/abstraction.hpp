#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jlssabs/model.hpp"
#include "jlssabs/ssf.hpp"

namespace jlssabs::abstraction {

/// Matrices certifying that every concrete output trajectory is matched by an
/// abstract one: C = Ch Phat, I = P Phat + G F, I = Phat P, Phat E G F = 0,
/// Phat R_i G F = 0.
struct BehaviorPreservingData {
    Matrix P_hat;  // nh x n
    Matrix G;      // n x (n - nh)
    Matrix F;      // (n - nh) x n
};

/// Residuals of the five behavior-preservation equations for a given triple.
std::map<std::string, double> con3_residuals(const JlssSystem& sys, const Matrix& chat,
                                             const Matrix& p,
                                             const BehaviorPreservingData& bp);

struct PConditionItem {
    std::string name;
    bool ok = false;
    double residual = 0.0;
};

struct PConditionReport {
    bool p_injective = false;
    std::vector<PConditionItem> items;
    bool all_ok() const;
};

/// Geometric admissibility of a candidate P: im AP in im P + im B,
/// im D in im P + im B, im EP in im P, im R_i P in im P, im P + ker C = R^n.
PConditionReport check_p_conditions(const JlssSystem& sys, const Matrix& p,
                                    double tolerance = tol::eq);

struct Con2Solution {
    Matrix Ahat, Q, Dhat, S, Chat, Ehat;
    std::vector<Matrix> Rhat;
    std::map<std::string, double> residuals;
};

/// Least-squares solve of the matching equations
///   AP = P Ah - B Q, D = P Dh - B S, Ch = C P, EP = P Eh, R_i P = P Rh_i.
/// Throws ConditionViolatedError when any residual exceeds the tolerance.
Con2Solution solve_con2(const JlssSystem& sys, const Matrix& p,
                        double tolerance = tol::eq);

/// For each column of D lying in im B, zero the matching Dh column and move
/// the contribution into S (simplifies the abstract interconnection topology).
void zero_redundant_dhat(const JlssSystem& sys, Matrix& dhat, Matrix& s,
                         const Matrix& p, double tolerance = tol::eq);

enum class BhatMode { Identity, BehaviorPreserving, UserProvided };

struct BhatResult {
    Matrix Bhat;
    std::optional<BehaviorPreservingData> bp;
};

/// Select the abstract input matrix. Identity: Bh = I. BehaviorPreserving:
/// complete im P to R^n with directions chosen inside ker C (standard basis
/// vectors first, by index, then general ker C basis columns), set
/// Phat = [I 0] [P G]^{-1} and F from G F = I - P Phat, then
/// Bh = [Phat B, Phat A G]. Choosing G inside ker C makes C = Ch Phat hold
/// automatically. Throws Con3UnsatisfiableError / Con3deViolatedError.
BhatResult choose_bhat(const JlssSystem& sys, const Matrix& p, BhatMode mode,
                       const std::optional<Matrix>& user_bhat = std::nullopt,
                       double tolerance = tol::eq);

struct AbstractionOptions {
    double kappa_hat = 1.0;
    std::optional<double> pi;  // default kappa_hat / 2
    BhatMode bhat_mode = BhatMode::Identity;
    std::optional<Matrix> user_bhat;
    ssf::MkOptions mk;
    std::uint64_t verify_trials = 10000;
    std::uint64_t verify_seed = 0;
    double tol_eq = tol::eq;
};

struct AbstractionResult {
    JlssSystem abs_sys;
    ssf::QuadraticSsf cert;
    ssf::LinearGains gains;
    std::optional<BehaviorPreservingData> bp;
    ssf::VerifyReport verify;
    std::map<std::string, double> residuals;  // per-step residual log
    std::string mk_path;
};

/// Full construction pipeline, in order: (M,K) synthesis, P admissibility,
/// matching-equation solves, redundant-Dh zeroing, Bh selection, R~, gains,
/// verification. Errors are annotated with the step number that failed.
AbstractionResult build_abstraction(const JlssSystem& sys, const Matrix& p,
                                    const AbstractionOptions& opts);

/// Candidate injective P matrices assembled from real eigenvectors of A
/// (all nh-subsets that pass check_p_conditions). A search helper, not a
/// minimal-order oracle.
std::vector<Matrix> candidate_projections(const JlssSystem& sys, Index nhat,
                                          double tolerance = tol::eq);

}  // namespace jlssabs::abstraction
