#include "jlssabs/bounds.hpp"

#include <algorithm>
#include <cmath>

namespace jlssabs::bounds {

namespace {
double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }
}  // namespace

double moment_bound(const GainSlopes& g, double ev0, double eu_hat,
                    double ew_mismatch, double t) {
    g.validate();
    if (ev0 < 0.0 || eu_hat < 0.0 || ew_mismatch < 0.0 || t < 0.0)
        throw NegativeInputError("moment_bound: inputs must be nonnegative");
    return (ev0 * std::exp(-g.h * t) + (g.r_e * eu_hat + g.r_i * ew_mismatch) / g.h) / g.a;
}

double sup_probability_bound(const GainSlopes& g, double v0, double eps, double T,
                             double eps_const) {
    g.validate();
    if (!(eps > 0.0) || !(T > 0.0) || eps_const < 0.0 || v0 < 0.0)
        throw InvalidArgsError("sup_probability_bound: invalid arguments");
    const double theta = g.h;
    const double aek = g.a * std::pow(eps, g.k);
    double bound;
    if (aek >= eps_const / theta) {
        bound = 1.0 - (1.0 - v0 / aek) * std::exp(-eps_const * T / aek);
    } else {
        bound = (theta * v0 + (std::exp(T * theta) - 1.0) * eps_const) /
                (theta * aek * std::exp(T * theta));
    }
    return clamp01(bound);
}

double pointwise_probability_bound(const GainSlopes& g, double ev0, double eu_hat,
                                   double ew_mismatch, double eps, double t) {
    if (!(eps > 0.0))
        throw InvalidArgsError("pointwise_probability_bound: eps must be > 0");
    const double numer = moment_bound(g, ev0, eu_hat, ew_mismatch, t);
    return clamp01(std::pow(numer, 1.0 / g.k) / eps);
}

double infinite_horizon_bound(const GainSlopes& g, double v0, double eps) {
    g.validate();
    if (!(eps > 0.0) || v0 < 0.0)
        throw InvalidArgsError("infinite_horizon_bound: invalid arguments");
    return clamp01(v0 / (g.a * std::pow(eps, g.k)));
}

BoundCurve triangle_bound(BoundCurve b1, BoundCurve b2) {
    return [b1 = std::move(b1), b2 = std::move(b2)](double t) {
        const double s = std::sqrt(b1(t)) + std::sqrt(b2(t));
        return s * s;
    };
}

}  // namespace jlssabs::bounds
