#pragma once

#include <functional>

#include "jlssabs/matrix.hpp"

namespace jlssabs::bounds {

/// Linear gain slopes of a verified certificate plus the moment order.
struct GainSlopes {
    double a = 1.0;    // alpha slope, > 0
    double h = 0.0;    // eta slope, > 0
    double r_e = 0.0;  // rho_ext slope, >= 0
    double r_i = 0.0;  // rho_int slope, >= 0
    int k = 2;

    void validate() const {
        if (!(a > 0.0) || !(h > 0.0) || r_e < 0.0 || r_i < 0.0 || k < 1)
            throw InvalidArgsError("GainSlopes: invalid values");
    }
};

/// Closed-form k-th moment bound at time t (exact Groenwall integration for
/// linear eta):
///   (1/a) (EV0 e^{-h t} + (r_e Eu_hat + r_i Ew_mismatch) / h).
double moment_bound(const GainSlopes& g, double ev0, double eu_hat,
                    double ew_mismatch, double t);

/// Bound on P{ sup_{0<=t<=T} ||gap|| >= eps | initial condition } with
/// theta = h and alpha(eps^k) = a eps^k; eps_const must upper-bound
/// rho_ext(||uh||^k_inf) + rho_int(||w - wh||^k_inf). Clamped to [0, 1].
double sup_probability_bound(const GainSlopes& g, double v0, double eps, double T,
                             double eps_const);

/// Markov bound on P{ ||gap(t)|| >= eps }: min(1, moment_bound^{1/k} / eps).
double pointwise_probability_bound(const GainSlopes& g, double ev0, double eu_hat,
                                   double ew_mismatch, double eps, double t);

/// Infinite-horizon bound min(1, V0 / (a eps^k)), valid for uh identically 0.
double infinite_horizon_bound(const GainSlopes& g, double v0, double eps);

using BoundCurve = std::function<double(double)>;

/// Pointwise (sqrt(b1) + sqrt(b2))^2, the squared-distance form of the
/// triangle inequality between bound curves.
BoundCurve triangle_bound(BoundCurve b1, BoundCurve b2);

}  // namespace jlssabs::bounds
