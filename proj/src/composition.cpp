#include "jlssabs/composition.hpp"

#include <omp.h>

#include <Eigen/LU>

#include <cmath>
#include <sstream>

#include "jlssabs/linalg.hpp"
#include "jlssabs/rng.hpp"

namespace jlssabs::composition {

std::pair<Matrix, Matrix> build_gain_matrices(
    const Network& net, const std::vector<abstraction::AbstractionResult>& abstractions,
    bool triangle_mode) {
    const std::size_t nsub = net.subsystems.size();
    if (abstractions.size() != nsub)
        throw MissingGainsError("build_gain_matrices: one abstraction per subsystem required");

    const double expo = std::max(net.k / 2.0, 1.0) - (triangle_mode ? 1.0 : 0.0);
    const double factor = std::pow(static_cast<double>(nsub > 1 ? nsub - 1 : 1), expo);

    Matrix lambda = Matrix::Zero(nsub, nsub);
    Matrix delta = Matrix::Zero(nsub, nsub);
    for (std::size_t i = 0; i < nsub; ++i) {
        lambda(i, i) = abstractions[i].gains.eta_slope;
        for (std::size_t j = 0; j < nsub; ++j) {
            if (i == j) continue;
            // delta_ij > 0 only when subsystem j feeds subsystem i
            if (!net.subsystems[j].has_output_to(net.subsystems[i].id)) continue;
            delta(i, j) = abstractions[i].gains.rho_int_slope * factor /
                          abstractions[j].gains.alpha_slope;
        }
    }
    return {lambda, delta};
}

Vector find_mu(const Matrix& lambda, const Matrix& delta, double tol_sg) {
    const Index n = lambda.rows();
    if (lambda.cols() != n || delta.rows() != n || delta.cols() != n)
        throw DimensionMismatchError("find_mu: Lambda and Delta must be square and equal");
    for (Index i = 0; i < n; ++i)
        if (!(lambda(i, i) > 0.0))
            throw InvalidArgsError("find_mu: Lambda diagonal must be positive");

    Matrix linv_delta = lambda.inverse() * delta;
    const double radius = la::spectral_radius(linv_delta);
    if (!(radius < 1.0 - tol_sg)) {
        std::ostringstream os;
        os << "find_mu: small-gain condition fails, spectral radius " << radius;
        throw InfeasibleError(os.str(), radius);
    }

    // (I - Lambda^{-1} Delta^T) mu = 1 has a positive solution when the
    // radius is below one (Neumann series of a nonnegative matrix).
    Matrix op = Matrix::Identity(n, n) - lambda.inverse() * delta.transpose();
    Vector mu = op.fullPivLu().solve(Vector::Ones(n));

    Vector check = (-lambda + delta).transpose() * mu;
    for (Index i = 0; i < n; ++i)
        if (!(mu(i) > 0.0) || !(check(i) < 0.0))
            throw InfeasibleError("find_mu: certificate re-check failed", radius);
    return mu;
}

CompositionCertificate compose(const Network& net,
                               const std::vector<abstraction::AbstractionResult>& abstractions,
                               const Vector& mu, const ComposeOptions& opts) {
    const std::size_t nsub = net.subsystems.size();
    if (mu.size() != static_cast<Index>(nsub))
        throw DimensionMismatchError("compose: mu length != subsystem count");
    if (net.k != 2)
        throw InvalidArgsError("compose: synthesis path requires moment order k = 2");

    CompositionCertificate cert;
    cert.k = net.k;
    cert.triangle_mode = opts.triangle_mode;
    cert.zero_ext_ids = opts.zero_ext_ids;
    cert.mu = mu;
    for (std::size_t i = 0; i < nsub; ++i) {
        ssf::LinearGains g = abstractions[i].gains;
        if (opts.zero_ext_ids.count(net.subsystems[i].id)) g.rho_ext_slope = 0.0;
        cert.subsystem_gains.push_back(g);
    }
    auto [lambda, delta] = build_gain_matrices(net, abstractions, opts.triangle_mode);
    cert.Lambda = lambda;
    cert.Delta = delta;
    cert.spectral_radius = la::spectral_radius(Matrix(lambda.inverse() * delta));

    Vector slack = (lambda - delta).transpose() * mu;  // mu^T(Lambda - Delta), columnwise
    for (Index i = 0; i < mu.size(); ++i) {
        if (!(mu(i) > 0.0)) throw CertificateInvalidError("compose: mu must be positive");
        if (!(slack(i) > 0.0))
            throw CertificateInvalidError("compose: mu^T(-Lambda + Delta) not negative");
    }

    const double nfac =
        std::pow(static_cast<double>(nsub), std::max(net.k / 2.0, 1.0) - 1.0);

    double alpha_lit = std::numeric_limits<double>::infinity();
    double eta_lit = std::numeric_limits<double>::infinity();
    double eta_paper = std::numeric_limits<double>::infinity();
    double rho_lit_sq = 0.0;
    double rho_paper = 0.0;
    for (std::size_t i = 0; i < nsub; ++i) {
        const auto& g = cert.subsystem_gains[i];
        alpha_lit = std::min(alpha_lit, g.alpha_slope * mu(i));
        eta_lit = std::min(eta_lit, slack(i) / mu(i));
        eta_paper = std::min(eta_paper, slack(i));
        rho_lit_sq += (mu(i) * g.rho_ext_slope) * (mu(i) * g.rho_ext_slope);
        rho_paper = std::max(rho_paper, g.rho_ext_slope);
    }
    cert.literal = {alpha_lit / nfac, eta_lit, std::sqrt(rho_lit_sq)};
    cert.paper_example = {alpha_lit / nfac, eta_paper, rho_paper};
    return cert;
}

double composite_V(const CompositionCertificate& cert,
                   const std::vector<abstraction::AbstractionResult>& abstractions,
                   const Vector& x, const Vector& xhat) {
    if (cert.mu.size() != static_cast<Index>(abstractions.size()))
        throw DimensionMismatchError("composite_V: certificate/abstraction count mismatch");
    double v = 0.0;
    Index xo = 0, xho = 0;
    for (std::size_t i = 0; i < abstractions.size(); ++i) {
        const auto& c = abstractions[i].cert;
        const Index ni = c.P.rows(), nhi = c.P.cols();
        if (xo + ni > x.size() || xho + nhi > xhat.size())
            throw DimensionMismatchError("composite_V: state vectors too short");
        Vector vi = x.segment(xo, ni) - c.P * xhat.segment(xho, nhi);
        v += cert.mu(i) * vi.dot(c.M * vi);
        xo += ni;
        xho += nhi;
    }
    if (xo != x.size() || xho != xhat.size())
        throw DimensionMismatchError("composite_V: state vectors too long");
    return v;
}

DissipationCheck check_composite_dissipation(
    const Network& net, const std::vector<abstraction::AbstractionResult>& abstractions,
    const CompositionCertificate& cert, std::uint64_t samples, std::uint64_t seed,
    bool parallel) {
    const std::size_t nsub = net.subsystems.size();
    if (abstractions.size() != nsub || cert.mu.size() != static_cast<Index>(nsub))
        throw DimensionMismatchError("check_composite_dissipation: size mismatch");

    Index n = 0, nh = 0, mh = 0;
    std::vector<Index> xoff(nsub), xhoff(nsub), uhoff(nsub);
    for (std::size_t i = 0; i < nsub; ++i) {
        xoff[i] = n;
        xhoff[i] = nh;
        uhoff[i] = mh;
        n += net.subsystems[i].sys.n();
        nh += abstractions[i].abs_sys.n();
        mh += abstractions[i].abs_sys.m();
    }

    struct Sampled {
        double slack;
        double sandwich;
    };
    auto one = [&](std::uint64_t t) -> Sampled {
        rng::Stream st(seed, t, rng::Role::Verify, 1);
        auto draw = [&st](Index len) {
            Vector v(len);
            for (Index i = 0; i < len; ++i) v(i) = 20.0 * st.uniform01() - 10.0;
            return v;
        };
        Vector x = draw(n), xh = draw(nh), uh = draw(mh);
        for (std::size_t i = 0; i < nsub; ++i)
            if (cert.zero_ext_ids.count(net.subsystems[i].id))
                uh.segment(uhoff[i], abstractions[i].abs_sys.m()).setZero();

        double lv = 0.0, gap_sq = 0.0;
        for (std::size_t i = 0; i < nsub; ++i) {
            const SubsystemSpec& s = net.subsystems[i];
            const auto& res = abstractions[i];
            const Vector xi = x.segment(xoff[i], s.sys.n());
            const Vector xhi = xh.segment(xhoff[i], res.abs_sys.n());
            const Vector uhi = uh.segment(uhoff[i], res.abs_sys.m());

            Vector w(s.sys.p()), wh(s.sys.p());
            Index off = 0;
            for (const auto& ib : s.inputs) {
                const Index j = net.index_of(ib.from);
                Matrix cji = net.subsystems[j].c_block(s.id);
                w.segment(off, cji.rows()) =
                    cji * x.segment(xoff[j], net.subsystems[j].sys.n());
                wh.segment(off, cji.rows()) =
                    cji * abstractions[j].cert.P *
                    xh.segment(xhoff[j], abstractions[j].abs_sys.n());
                off += cji.rows();
            }
            Vector u = ssf::interface_u(res.cert, xi, xhi, uhi, wh);
            lv += cert.mu(static_cast<Index>(i)) *
                  ssf::generator_quadratic(res.cert, s.sys, res.abs_sys, xi, xhi, u, uhi,
                                           w, wh);

            Matrix cext = s.c_block(OutputBlock::kExternal);
            if (cext.rows() > 0)
                gap_sq += (cext * xi - cext * res.cert.P * xhi).squaredNorm();
        }
        const double v = composite_V(cert, abstractions, x, xh);
        Sampled out;
        out.slack = -cert.literal.eta_slope * v +
                    cert.literal.rho_ext_slope * uh.squaredNorm() - lv;
        out.sandwich = v - cert.literal.alpha_slope * gap_sq;
        return out;
    };

    double worst_slack = std::numeric_limits<double>::infinity();
    double worst_sandwich = std::numeric_limits<double>::infinity();
    if (samples > 0) {  // serial probe: surface dimension errors before the omp region
        Sampled s = one(0);
        worst_slack = s.slack;
        worst_sandwich = s.sandwich;
    }
    if (parallel) {
#pragma omp parallel for reduction(min : worst_slack, worst_sandwich) schedule(static)
        for (std::int64_t t = 1; t < static_cast<std::int64_t>(samples); ++t) {
            Sampled s = one(static_cast<std::uint64_t>(t));
            worst_slack = std::min(worst_slack, s.slack);
            worst_sandwich = std::min(worst_sandwich, s.sandwich);
        }
    } else {
        for (std::uint64_t t = 1; t < samples; ++t) {
            Sampled s = one(t);
            worst_slack = std::min(worst_slack, s.slack);
            worst_sandwich = std::min(worst_sandwich, s.sandwich);
        }
    }
    DissipationCheck out;
    out.samples = samples;
    out.worst_slack = samples ? worst_slack : 0.0;
    out.worst_sandwich = samples ? worst_sandwich : 0.0;
    return out;
}

}  // namespace jlssabs::composition
