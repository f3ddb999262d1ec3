#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "jlssabs/abstraction.hpp"
#include "jlssabs/model.hpp"

namespace jlssabs::sim {

/// Sample-and-hold signal: value(t) is the row of the latest breakpoint <= t,
/// zero before the first breakpoint (or when empty).
struct PiecewiseConstant {
    Vector times;   // ascending breakpoints
    Matrix values;  // one row per breakpoint

    Index dim() const { return values.cols(); }
    Vector value(double t) const;
    /// sup_t ||value(t)||^2 over all breakpoints.
    double sup_norm_sq() const;
};

/// Axis-aligned box; squared Euclidean distance of a point to it.
struct Box {
    Vector lo, hi;
    double dist_sq(const Vector& x) const;
};

struct SimConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    std::uint64_t trials = 100;
    std::uint64_t master_seed = 0;
    PiecewiseConstant input;  // abstract external input, all m_hat columns
    Vector a;                 // concrete initial state (stacked)
    Vector ahat;              // abstract initial state (stacked)
    Index record_stride = 0;  // 0: pick ~1500 grid points automatically
    bool store_paths = false;
    std::optional<Box> safe_box;
    int threads = 0;           // 0: JLSSABS_THREADS env or OpenMP default
    bool shared_drivers = true;  // abstract system reuses the concrete noise

    void validate(double max_rate, Index mhat_total) const;
};

/// Monte Carlo results on the record grid. Per-trial rows make the final
/// reduction independent of the parallel schedule (bit-exact reproducibility).
struct Ensemble {
    Vector tgrid;        // record times, starting at 0
    Matrix gap_sq;       // trials x G, ||zeta - zeta_hat||^2 at grid points
    Matrix sup_gap;      // trials x G, running sup of ||zeta - zeta_hat||
    Matrix set_dist_sq;  // trials x G, squared distance of zeta to the box (0 without box)
    std::vector<Matrix> zeta_paths;      // per trial q x G, only when store_paths
    std::vector<Matrix> zeta_hat_paths;  // per trial q_hat x G

    std::uint64_t trials() const { return static_cast<std::uint64_t>(gap_sq.rows()); }
};

/// One Euler-Maruyama step with Poisson increments:
///   x' = x + (A x + B u + D w) dt + sum_c E_c x dW_c + sum_i R_i x dN_i.
Vector step_jlss(const JlssSystem& sys, const Vector& x, const Vector& u,
                 const Vector& w, double dt, const Vector& dW,
                 const std::vector<std::uint32_t>& dN);

/// Coupled simulation of the interconnected network and its abstraction.
/// Per trial, one Brownian increment stream per subsystem and one Poisson
/// stream per jump kind are drawn and shared between the concrete and the
/// abstract system; concrete inputs come from the per-subsystem interface.
/// OpenMP-parallel over trials; identical output to run_coupled_serial.
Ensemble run_coupled(const Network& net,
                     const std::vector<abstraction::AbstractionResult>& abstractions,
                     const SimConfig& cfg);

/// Reference implementation: same semantics, plain trial loop.
Ensemble run_coupled_serial(const Network& net,
                            const std::vector<abstraction::AbstractionResult>& abstractions,
                            const SimConfig& cfg);

struct MomentCurve {
    Vector mean;  // per grid point
    Vector se;    // standard error of the mean
};

/// Unbiased mean and standard error of the squared output gap per grid point.
/// Throws TooFewTrialsError for fewer than 2 trials.
MomentCurve estimate_moment_gap(const Ensemble& ens);

struct ExceedanceEstimate {
    double fraction = 0.0;
    double wilson_low = 0.0;
    double wilson_high = 0.0;
    std::uint64_t exceed_count = 0;
};

/// Fraction of trials whose sup-gap over [0, T] reaches eps, with a Wilson
/// 95% score interval.
ExceedanceEstimate estimate_sup_exceedance(const Ensemble& ens, double eps, double T);

/// Mean squared distance of the concrete output to the safe box per grid point.
Vector estimate_set_distance(const Ensemble& ens);

struct BehaviorGap {
    double sup_gap = 0.0;   // sup_t ||zeta - zeta_hat||
    double sup_zeta = 0.0;  // sup_t ||zeta||
};

/// Shared-noise refinement run for one subsystem pair: the abstraction starts
/// at xh = Phat x0 and is driven by nu_hat = [nu - Q Phat xi - S omega; F xi],
/// with omega common to both. Requires behavior-preserving data.
BehaviorGap behavior_preservation_gap(const JlssSystem& sys,
                                      const abstraction::AbstractionResult& res,
                                      const PiecewiseConstant& nu,
                                      const PiecewiseConstant& omega, const Vector& x0,
                                      double dt, double horizon, std::uint64_t seed,
                                      std::uint64_t trial);

/// Number of OpenMP threads the engine will use for a config.
int resolve_threads(int requested);

}  // namespace jlssabs::sim
