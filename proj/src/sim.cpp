#include "jlssabs/sim.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "jlssabs/rng.hpp"

namespace jlssabs::sim {

Vector PiecewiseConstant::value(double t) const {
    if (times.size() == 0) return Vector::Zero(values.cols());
    // latest breakpoint <= t
    Index lo = -1;
    for (Index i = 0; i < times.size(); ++i) {
        if (times(i) <= t + 1e-12) lo = i;
        else break;
    }
    if (lo < 0) return Vector::Zero(values.cols());
    return values.row(lo).transpose();
}

double PiecewiseConstant::sup_norm_sq() const {
    double best = 0.0;
    for (Index i = 0; i < values.rows(); ++i)
        best = std::max(best, values.row(i).squaredNorm());
    return best;
}

double Box::dist_sq(const Vector& x) const {
    if (x.size() != lo.size() || x.size() != hi.size())
        throw DimensionMismatchError("Box::dist_sq: dimension mismatch");
    double d2 = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        double d = 0.0;
        if (x(i) < lo(i)) d = lo(i) - x(i);
        else if (x(i) > hi(i)) d = x(i) - hi(i);
        d2 += d * d;
    }
    return d2;
}

void SimConfig::validate(double max_rate, Index mhat_total) const {
    if (!(dt > 0.0)) throw ConfigInvalidError("SimConfig: dt must be > 0");
    if (dt * max_rate > 0.1 + 1e-12)
        throw ConfigInvalidError("SimConfig: dt * max jump rate exceeds 0.1");
    const double steps = horizon / dt;
    if (std::abs(steps - std::llround(steps)) > 1e-9)
        throw ConfigInvalidError("SimConfig: horizon must be a multiple of dt");
    if (trials == 0) throw ConfigInvalidError("SimConfig: trials must be >= 1");
    if (input.times.size() > 0 && input.dim() != mhat_total)
        throw ConfigInvalidError("SimConfig: input columns != total abstract input dim");
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("JLSSABS_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return omp_get_max_threads();
}

Vector step_jlss(const JlssSystem& sys, const Vector& x, const Vector& u,
                 const Vector& w, double dt, const Vector& dW,
                 const std::vector<std::uint32_t>& dN) {
    if (x.size() != sys.n() || u.size() != sys.m() || w.size() != sys.p())
        throw DimensionMismatchError("step_jlss: state/input size mismatch");
    if (dW.size() != static_cast<Index>(sys.diffusion.size()))
        throw DimensionMismatchError("step_jlss: dW size != diffusion channels");
    if (dN.size() != sys.jumps.size())
        throw DimensionMismatchError("step_jlss: dN size != jump kinds");
    Vector next = x + (sys.A * x + sys.B * u + sys.D * w) * dt;
    for (std::size_t c = 0; c < sys.diffusion.size(); ++c)
        next += sys.diffusion[c] * x * dW(static_cast<Index>(c));
    for (std::size_t i = 0; i < sys.jumps.size(); ++i)
        next += sys.jumps[i].reset * x * static_cast<double>(dN[i]);
    return next;
}

namespace {

// Per-subsystem wiring resolved once per run.
struct SubsystemPlan {
    const JlssSystem* sys = nullptr;
    const abstraction::AbstractionResult* res = nullptr;
    Index xoff = 0, xhoff = 0, uhoff = 0;
    // internal input blocks: source subsystem index + output rows
    struct Feed {
        std::size_t src = 0;
        Matrix c;      // rows of source C for this block
        Matrix c_hat;  // rows of source C_hat = C P
    };
    std::vector<Feed> feeds;
    Matrix c_ext, c_ext_hat;  // external output rows
};

struct RunPlan {
    std::vector<SubsystemPlan> subs;
    Index n = 0, nh = 0, mh = 0, q = 0;
    double max_rate = 0.0;
    std::size_t jump_kinds = 0;
};

RunPlan make_plan(const Network& net,
                  const std::vector<abstraction::AbstractionResult>& abstractions) {
    if (abstractions.size() != net.subsystems.size())
        throw ConfigInvalidError("run_coupled: one abstraction per subsystem required");
    std::vector<std::string> bad = validate_network(net);
    if (!bad.empty()) throw InvalidNetworkError("run_coupled: " + bad.front());

    RunPlan plan;
    for (std::size_t i = 0; i < net.subsystems.size(); ++i) {
        const SubsystemSpec& s = net.subsystems[i];
        const abstraction::AbstractionResult& r = abstractions[i];
        if (r.cert.P.rows() != s.sys.n())
            throw ConfigInvalidError("run_coupled: abstraction does not match subsystem " +
                                     std::to_string(s.id));
        SubsystemPlan sp;
        sp.sys = &s.sys;
        sp.res = &r;
        sp.xoff = plan.n;
        sp.xhoff = plan.nh;
        sp.uhoff = plan.mh;
        plan.n += s.sys.n();
        plan.nh += r.abs_sys.n();
        plan.mh += r.abs_sys.m();
        for (const auto& ib : s.inputs) {
            const Index j = net.index_of(ib.from);
            SubsystemPlan::Feed f;
            f.src = static_cast<std::size_t>(j);
            f.c = net.subsystems[j].c_block(s.id);
            f.c_hat = f.c * abstractions[j].cert.P;
            sp.feeds.push_back(std::move(f));
        }
        sp.c_ext = s.c_block(OutputBlock::kExternal);
        sp.c_ext_hat = sp.c_ext * r.cert.P;
        plan.q += sp.c_ext.rows();
        for (const auto& jmp : s.sys.jumps) {
            plan.max_rate = std::max(plan.max_rate, jmp.rate);
            ++plan.jump_kinds;
        }
        plan.subs.push_back(std::move(sp));
    }
    return plan;
}

Ensemble run_impl(const Network& net,
                  const std::vector<abstraction::AbstractionResult>& abstractions,
                  const SimConfig& cfg, bool parallel) {
    RunPlan plan = make_plan(net, abstractions);
    cfg.validate(plan.max_rate, plan.mh);
    if (cfg.a.size() != plan.n || cfg.ahat.size() != plan.nh)
        throw ConfigInvalidError("run_coupled: initial state sizes mismatch");

    const Index nsteps = static_cast<Index>(std::llround(cfg.horizon / cfg.dt));
    Index stride = cfg.record_stride;
    if (stride <= 0) stride = std::max<Index>(1, nsteps / 1500);
    while (nsteps % stride != 0) --stride;  // keep the endpoint on the grid
    const Index ngrid = nsteps / stride + 1;

    Ensemble ens;
    ens.tgrid = Vector::LinSpaced(ngrid, 0.0, cfg.horizon);
    for (Index gidx = 0; gidx < ngrid; ++gidx)
        ens.tgrid(gidx) = static_cast<double>(gidx * stride) * cfg.dt;
    ens.gap_sq = Matrix::Zero(cfg.trials, ngrid);
    ens.sup_gap = Matrix::Zero(cfg.trials, ngrid);
    ens.set_dist_sq = Matrix::Zero(cfg.trials, ngrid);
    if (cfg.store_paths) {
        ens.zeta_paths.resize(cfg.trials);
        ens.zeta_hat_paths.resize(cfg.trials);
    }

    const std::size_t nsub = plan.subs.size();
    const double sqdt = std::sqrt(cfg.dt);

    auto run_trial = [&](std::uint64_t trial) {
        std::vector<rng::Stream> brown, jumps_rng, brown_h, jumps_h;
        for (std::size_t i = 0; i < nsub; ++i)
            brown.emplace_back(cfg.master_seed, trial, rng::Role::Brownian, i);
        for (std::size_t j = 0; j < plan.jump_kinds; ++j)
            jumps_rng.emplace_back(cfg.master_seed, trial, rng::Role::Poisson, j);
        if (!cfg.shared_drivers) {
            for (std::size_t i = 0; i < nsub; ++i)
                brown_h.emplace_back(cfg.master_seed, trial, rng::Role::AbstractBrownian, i);
            for (std::size_t j = 0; j < plan.jump_kinds; ++j)
                jumps_h.emplace_back(cfg.master_seed, trial, rng::Role::AbstractPoisson, j);
        }

        std::vector<Vector> x(nsub), xh(nsub);
        std::vector<Vector> xnew(nsub), xhnew(nsub);
        for (std::size_t i = 0; i < nsub; ++i) {
            x[i] = cfg.a.segment(plan.subs[i].xoff, plan.subs[i].sys->n());
            xh[i] = cfg.ahat.segment(plan.subs[i].xhoff, plan.subs[i].res->abs_sys.n());
        }

        Matrix* zp = cfg.store_paths ? &ens.zeta_paths[trial] : nullptr;
        Matrix* zhp = cfg.store_paths ? &ens.zeta_hat_paths[trial] : nullptr;
        if (zp) *zp = Matrix::Zero(plan.q, ngrid);
        if (zhp) *zhp = Matrix::Zero(plan.q, ngrid);

        double running_sup = 0.0;
        Vector gap(plan.q), zeta(plan.q);

        auto record = [&](Index gidx) {
            Index row = 0;
            for (std::size_t i2 = 0; i2 < nsub; ++i2) {
                const auto& sp = plan.subs[i2];
                if (sp.c_ext.rows() == 0) continue;
                zeta.segment(row, sp.c_ext.rows()) = sp.c_ext * x[i2];
                gap.segment(row, sp.c_ext.rows()) =
                    sp.c_ext * x[i2] - sp.c_ext_hat * xh[i2];
                row += sp.c_ext.rows();
            }
            const double g = gap.norm();
            running_sup = std::max(running_sup, g);
            ens.gap_sq(trial, gidx) = g * g;
            ens.sup_gap(trial, gidx) = running_sup;
            if (cfg.safe_box) ens.set_dist_sq(trial, gidx) = cfg.safe_box->dist_sq(zeta);
            if (zp) zp->col(gidx) = zeta;
            if (zhp)
                for (Index r2 = 0, orow = 0; r2 < static_cast<Index>(nsub); ++r2) {
                    const auto& sp = plan.subs[r2];
                    if (sp.c_ext.rows() == 0) continue;
                    zhp->col(gidx).segment(orow, sp.c_ext.rows()) = sp.c_ext_hat * xh[r2];
                    orow += sp.c_ext.rows();
                }
        };
        record(0);

        for (Index k = 0; k < nsteps; ++k) {
            const double t = static_cast<double>(k) * cfg.dt;
            const Vector uh_all = cfg.input.value(t);

            // draw this step's increments (fixed order: subsystem, then jump kind)
            std::vector<double> dw(nsub), dwh(nsub);
            std::vector<std::uint32_t> dn(plan.jump_kinds), dnh(plan.jump_kinds);
            for (std::size_t i = 0; i < nsub; ++i) dw[i] = brown[i].normal() * sqdt;
            {
                std::size_t j = 0;
                for (const auto& sp : plan.subs)
                    for (const auto& jmp : sp.sys->jumps)
                        dn[j] = jumps_rng[j].poisson(jmp.rate * cfg.dt), ++j;
            }
            if (cfg.shared_drivers) {
                dwh = dw;
                dnh = dn;
            } else {
                for (std::size_t i = 0; i < nsub; ++i) dwh[i] = brown_h[i].normal() * sqdt;
                std::size_t j = 0;
                for (const auto& sp : plan.subs)
                    for (const auto& jmp : sp.sys->jumps)
                        dnh[j] = jumps_h[j].poisson(jmp.rate * cfg.dt), ++j;
            }

            std::size_t jump_base = 0;
            for (std::size_t i = 0; i < nsub; ++i) {
                const SubsystemPlan& sp = plan.subs[i];
                const JlssSystem& cs = *sp.sys;
                const JlssSystem& as = sp.res->abs_sys;
                const ssf::QuadraticSsf& cert = sp.res->cert;

                Vector w(cs.p()), wh(cs.p());
                Index off = 0;
                for (const auto& f : sp.feeds) {
                    w.segment(off, f.c.rows()) = f.c * x[f.src];
                    wh.segment(off, f.c.rows()) = f.c_hat * xh[f.src];
                    off += f.c.rows();
                }
                const Vector uh = uh_all.segment(sp.uhoff, as.m());

                xnew[i] = x[i] + cs.A * x[i] * cfg.dt + cs.D * w * cfg.dt;
                xhnew[i] = xh[i] + as.A * xh[i] * cfg.dt + as.B * uh * cfg.dt +
                           as.D * wh * cfg.dt;
                if (cs.m() > 0) {
                    const Vector u = cert.K * (x[i] - cert.P * xh[i]) + cert.Q * xh[i] +
                                     cert.R_tilde * uh + cert.S * wh;
                    xnew[i] += cs.B * u * cfg.dt;
                }
                xnew[i] += cs.E() * x[i] * dw[i];
                xhnew[i] += as.E() * xh[i] * dwh[i];
                for (std::size_t jj = 0; jj < cs.jumps.size(); ++jj) {
                    xnew[i] += cs.jumps[jj].reset * x[i] *
                               static_cast<double>(dn[jump_base + jj]);
                    xhnew[i] += as.jumps[jj].reset * xh[i] *
                                static_cast<double>(dnh[jump_base + jj]);
                }
                jump_base += cs.jumps.size();
            }
            x.swap(xnew);
            xh.swap(xhnew);

            if ((k + 1) % stride == 0) record((k + 1) / stride);
            else {
                // keep the running sup at full resolution
                Index row = 0;
                for (std::size_t i2 = 0; i2 < nsub; ++i2) {
                    const auto& sp = plan.subs[i2];
                    if (sp.c_ext.rows() == 0) continue;
                    gap.segment(row, sp.c_ext.rows()) =
                        sp.c_ext * x[i2] - sp.c_ext_hat * xh[i2];
                    row += sp.c_ext.rows();
                }
                running_sup = std::max(running_sup, gap.norm());
            }
        }
    };

    if (parallel) {
        const int nt = resolve_threads(cfg.threads);
#pragma omp parallel for schedule(dynamic) num_threads(nt)
        for (std::int64_t trial = 0; trial < static_cast<std::int64_t>(cfg.trials); ++trial)
            run_trial(static_cast<std::uint64_t>(trial));
    } else {
        for (std::uint64_t trial = 0; trial < cfg.trials; ++trial) run_trial(trial);
    }
    return ens;
}

}  // namespace

Ensemble run_coupled(const Network& net,
                     const std::vector<abstraction::AbstractionResult>& abstractions,
                     const SimConfig& cfg) {
    return run_impl(net, abstractions, cfg, /*parallel=*/true);
}

Ensemble run_coupled_serial(const Network& net,
                            const std::vector<abstraction::AbstractionResult>& abstractions,
                            const SimConfig& cfg) {
    return run_impl(net, abstractions, cfg, /*parallel=*/false);
}

MomentCurve estimate_moment_gap(const Ensemble& ens) {
    const Index trials = ens.gap_sq.rows();
    if (trials < 2) throw TooFewTrialsError("estimate_moment_gap: need >= 2 trials");
    MomentCurve out;
    const Index g = ens.gap_sq.cols();
    out.mean = Vector::Zero(g);
    out.se = Vector::Zero(g);
    for (Index j = 0; j < g; ++j) {
        double sum = 0.0;
        for (Index i = 0; i < trials; ++i) sum += ens.gap_sq(i, j);
        const double mean = sum / static_cast<double>(trials);
        double ss = 0.0;
        for (Index i = 0; i < trials; ++i) {
            const double d = ens.gap_sq(i, j) - mean;
            ss += d * d;
        }
        out.mean(j) = mean;
        out.se(j) = std::sqrt(ss / static_cast<double>(trials - 1)) /
                    std::sqrt(static_cast<double>(trials));
    }
    return out;
}

ExceedanceEstimate estimate_sup_exceedance(const Ensemble& ens, double eps, double T) {
    if (eps < 0.0) throw InvalidArgsError("estimate_sup_exceedance: eps must be >= 0");
    if (T > ens.tgrid(ens.tgrid.size() - 1) + 1e-9)
        throw InvalidArgsError("estimate_sup_exceedance: T exceeds the horizon");
    Index idx = 0;
    for (Index j = 0; j < ens.tgrid.size(); ++j)
        if (ens.tgrid(j) <= T + 1e-9) idx = j;
    ExceedanceEstimate out;
    const Index trials = ens.sup_gap.rows();
    for (Index i = 0; i < trials; ++i)
        if (ens.sup_gap(i, idx) >= eps) ++out.exceed_count;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(out.exceed_count) / n;
    out.fraction = p;
    const double z = 1.959963984540054;  // 95%
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    out.wilson_low = std::max(0.0, center - half);
    out.wilson_high = std::min(1.0, center + half);
    return out;
}

Vector estimate_set_distance(const Ensemble& ens) {
    const Index trials = ens.set_dist_sq.rows();
    Vector mean = Vector::Zero(ens.set_dist_sq.cols());
    for (Index j = 0; j < ens.set_dist_sq.cols(); ++j) {
        double sum = 0.0;
        for (Index i = 0; i < trials; ++i) sum += ens.set_dist_sq(i, j);
        mean(j) = sum / static_cast<double>(trials);
    }
    return mean;
}

BehaviorGap behavior_preservation_gap(const JlssSystem& sys,
                                      const abstraction::AbstractionResult& res,
                                      const PiecewiseConstant& nu,
                                      const PiecewiseConstant& omega, const Vector& x0,
                                      double dt, double horizon, std::uint64_t seed,
                                      std::uint64_t trial) {
    if (!res.bp)
        throw InvalidArgsError("behavior_preservation_gap: behavior-preserving data missing");
    const auto& bp = *res.bp;
    const JlssSystem& as = res.abs_sys;
    const Index nsteps = static_cast<Index>(std::llround(horizon / dt));

    rng::Stream brown(seed, trial, rng::Role::Brownian, 0);
    std::vector<rng::Stream> jrng;
    for (std::size_t j = 0; j < sys.jumps.size(); ++j)
        jrng.emplace_back(seed, trial, rng::Role::Poisson, j);

    Vector x = x0;
    Vector xh = bp.P_hat * x0;
    const double sqdt = std::sqrt(dt);
    BehaviorGap out;

    auto measure = [&]() {
        const Vector z = sys.C * x;
        const Vector zh = as.C * xh;
        out.sup_gap = std::max(out.sup_gap, (z - zh).norm());
        out.sup_zeta = std::max(out.sup_zeta, z.norm());
    };
    measure();

    std::vector<std::uint32_t> dn(sys.jumps.size());
    for (Index k = 0; k < nsteps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Vector u = sys.m() > 0 ? nu.value(t) : Vector(0);
        const Vector w = sys.p() > 0 ? omega.value(t) : Vector(0);
        const double dW = brown.normal() * sqdt;
        for (std::size_t j = 0; j < sys.jumps.size(); ++j)
            dn[j] = jrng[j].poisson(sys.jumps[j].rate * dt);

        // nu_hat = [nu - Q Phat x - S w; F x], computed from the concrete state
        Vector uh(as.m());
        uh.head(sys.m()) = u - res.cert.Q * (bp.P_hat * x) - res.cert.S * w;
        uh.tail(as.m() - sys.m()) = bp.F * x;

        Vector xn = x + (sys.A * x + sys.B * u + sys.D * w) * dt + sys.E() * x * dW;
        Vector xhn = xh + (as.A * xh + as.B * uh + as.D * w) * dt + as.E() * xh * dW;
        for (std::size_t j = 0; j < sys.jumps.size(); ++j) {
            xn += sys.jumps[j].reset * x * static_cast<double>(dn[j]);
            xhn += as.jumps[j].reset * xh * static_cast<double>(dn[j]);
        }
        x = xn;
        xh = xhn;
        measure();
    }
    return out;
}

}  // namespace jlssabs::sim
