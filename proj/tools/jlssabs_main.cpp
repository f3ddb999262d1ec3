// Pipeline front end: abstract | compose | bounds | simulate | verify.
//
// Exit codes: 0 success, 1 parse/validation error, 2 construction condition
// violation, 3 small-gain failure, 4 bound-dominance failure, 5 verify failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

#include "jlssabs/bounds.hpp"
#include "jlssabs/composition.hpp"
#include "jlssabs/io.hpp"
#include "jlssabs/linalg.hpp"
#include "jlssabs/sim.hpp"

using namespace jlssabs;
using nlohmann::json;

namespace {

struct CommonParams {
    double d = 0.5;
    std::vector<std::string> extra;  // name=value

    io::Params resolve() const {
        io::Params p;
        p["d"] = d;
        for (const auto& kv : extra) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ParseError("--param expects name=value, got '" + kv + "'");
            p[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        }
        return p;
    }
};

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i];
    return out;
}

sim::Box parse_box(const std::string& s) {
    sim::Box box;
    std::vector<double> lo, hi;
    std::stringstream ss(s);
    std::string dim;
    while (std::getline(ss, dim, ',')) {
        auto colon = dim.find(':');
        if (colon == std::string::npos)
            throw ParseError("--safe-box expects lo:hi per dimension");
        lo.push_back(std::stod(dim.substr(0, colon)));
        hi.push_back(std::stod(dim.substr(colon + 1)));
    }
    box.lo = to_vector(lo);
    box.hi = to_vector(hi);
    return box;
}

int cmd_abstract(const std::string& system_path, const std::string& p_path,
                 double kappa_hat, double pi_opt, bool pi_given,
                 const std::string& bhat, const std::string& mk,
                 std::uint64_t verify_trials, std::uint64_t seed,
                 const CommonParams& params, const std::string& out_path) {
    SubsystemSpec spec = io::load_subsystem(system_path, params.resolve());
    Matrix p = io::load_matrix_csv(p_path);

    abstraction::AbstractionOptions opts;
    opts.kappa_hat = kappa_hat;
    if (pi_given) opts.pi = pi_opt;
    opts.verify_trials = verify_trials;
    opts.verify_seed = seed;
    if (bhat == "identity") opts.bhat_mode = abstraction::BhatMode::Identity;
    else if (bhat == "behavior") opts.bhat_mode = abstraction::BhatMode::BehaviorPreserving;
    else if (bhat.rfind("file:", 0) == 0) {
        opts.bhat_mode = abstraction::BhatMode::UserProvided;
        opts.user_bhat = io::load_matrix_csv(bhat.substr(5));
    } else {
        throw ParseError("--bhat must be identity, behavior, or file:PATH");
    }
    if (mk == "auto") opts.mk.path = ssf::MkPath::Auto;
    else if (mk == "lmi") opts.mk.path = ssf::MkPath::Lmi;
    else if (mk == "fallback") opts.mk.path = ssf::MkPath::Fallback;
    else if (mk.rfind("file:", 0) == 0) {
        Matrix mkmat = io::load_matrix_csv(mk.substr(5));
        // first n rows M, remaining rows K
        const Index n = spec.sys.n();
        opts.mk.user_mk = std::make_pair(Matrix(mkmat.topRows(n)),
                                         Matrix(mkmat.bottomRows(mkmat.rows() - n)));
    } else {
        throw ParseError("--mk must be auto, lmi, fallback, or file:PATH");
    }

    auto res = abstraction::build_abstraction(spec.sys, p, opts);
    io::save_json(out_path, io::abstraction_json(spec.id, res));
    std::cout << "abstraction of subsystem " << spec.id << ": nhat = " << res.abs_sys.n()
              << ", mk path = " << res.mk_path
              << ", worst dissipation slack = " << res.verify.worst_slack << "\n";
    for (const auto& [name, r] : res.residuals)
        std::cout << "  " << name << " = " << io::format_double(r) << "\n";
    return 0;
}

int cmd_compose(const std::string& network_path, const std::vector<std::string>& abs_paths,
                bool triangle_mode, const std::string& zero_ext, const std::string& mu_arg,
                const CommonParams& params, const std::string& out_path) {
    Network net = io::load_network(network_path, params.resolve());
    std::vector<abstraction::AbstractionResult> abstractions(net.subsystems.size());
    std::vector<int> ids(net.subsystems.size());
    std::vector<bool> seen(net.subsystems.size(), false);
    for (const auto& path : abs_paths) {
        int id = 0;
        auto res = io::load_abstraction(path, &id);
        const Index pos = net.index_of(id);
        if (pos < 0) throw ParseError(path + ": subsystem id " + std::to_string(id) +
                                      " not in the network");
        abstractions[pos] = std::move(res);
        ids[pos] = id;
        seen[pos] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw ParseError("missing abstraction for subsystem " +
                             std::to_string(net.subsystems[i].id));

    composition::ComposeOptions copts;
    copts.triangle_mode = triangle_mode;
    if (!zero_ext.empty())
        for (double v : parse_list(zero_ext)) copts.zero_ext_ids.insert(static_cast<int>(v));

    auto [lambda, delta] = composition::build_gain_matrices(net, abstractions, triangle_mode);
    Vector mu;
    try {
        mu = mu_arg.empty() ? composition::find_mu(lambda, delta)
                            : to_vector(parse_list(mu_arg));
    } catch (const InfeasibleError& e) {
        std::cerr << "small-gain condition fails: spectral radius " << e.value << "\n";
        return 3;
    }
    composition::CompositionCertificate cert;
    try {
        cert = composition::compose(net, abstractions, mu, copts);
    } catch (const CertificateInvalidError& e) {
        std::cerr << "composition rejected: " << e.what() << "\n";
        return 3;
    }
    io::save_json(out_path, io::certificate_json(cert, ids, abstractions));
    std::cout << "composite certificate: spectral radius " << cert.spectral_radius
              << ", eta = " << cert.literal.eta_slope
              << ", rho_ext = " << cert.literal.rho_ext_slope
              << ", alpha = " << cert.literal.alpha_slope << "\n";
    return 0;
}

int cmd_bounds(const std::string& cert_path, double ev0, double eu_hat, double ew,
               double epsilon, double eps_const, bool eps_const_given, bool paper_mode,
               const std::string& grid, const std::string& out_path) {
    io::LoadedCertificate lc = io::load_certificate(cert_path);
    const auto& slopes = paper_mode ? lc.cert.paper_example : lc.cert.literal;
    bounds::GainSlopes g{slopes.alpha_slope, slopes.eta_slope, slopes.rho_ext_slope, 0.0,
                         lc.cert.k};

    auto parts = parse_list(grid == "" ? "0:1:0.1" : grid);
    std::vector<double> spec;
    {
        std::stringstream ss(grid);
        std::string cell;
        while (std::getline(ss, cell, ':')) spec.push_back(std::stod(cell));
    }
    if (spec.size() != 3 || spec[2] <= 0.0)
        throw InvalidArgsError("--grid expects t0:t1:dt");
    const double ec = eps_const_given ? eps_const : g.r_e * eu_hat;

    std::ostringstream os;
    os << "t,moment_bound,pointwise_prob,sup_prob_T,inf_horizon\n";
    for (double t = spec[0]; t <= spec[1] + 1e-12; t += spec[2]) {
        const double mb = bounds::moment_bound(g, ev0, eu_hat, ew, t);
        const double pw = bounds::pointwise_probability_bound(g, ev0, eu_hat, ew, epsilon, t);
        const double sp = t > 0.0 ? bounds::sup_probability_bound(g, ev0, epsilon, t, ec)
                                  : 0.0;
        const double ih = bounds::infinite_horizon_bound(g, ev0, epsilon);
        os << io::format_double(t) << ',' << io::format_double(mb) << ','
           << io::format_double(pw) << ',' << io::format_double(sp) << ','
           << io::format_double(ih) << "\n";
    }
    io::write_text_file(out_path, os.str());
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_simulate(const std::string& network_path, const std::string& cert_path,
                 const std::string& inputs_path, std::uint64_t trials, double dt,
                 double horizon, std::uint64_t seed, const std::string& eps_list,
                 const std::string& t_list, const std::string& a_arg,
                 const std::string& ahat_arg, const std::string& box_arg,
                 Index record_stride, int threads, bool independent_drivers,
                 bool store_paths, const CommonParams& params,
                 const std::string& out_prefix) {
    Network net = io::load_network(network_path, params.resolve());
    io::LoadedCertificate lc = io::load_certificate(cert_path);
    if (lc.abstractions.size() != net.subsystems.size())
        throw ConfigInvalidError("certificate does not match the network");
    // reorder certificate subsystems to network order
    std::vector<abstraction::AbstractionResult> abstractions(net.subsystems.size());
    for (std::size_t i = 0; i < lc.ids.size(); ++i) {
        const Index pos = net.index_of(lc.ids[i]);
        if (pos < 0) throw ConfigInvalidError("certificate subsystem id mismatch");
        abstractions[pos] = lc.abstractions[i];
    }

    sim::SimConfig cfg;
    cfg.dt = dt;
    cfg.horizon = horizon;
    cfg.trials = trials;
    cfg.master_seed = seed;
    cfg.a = to_vector(parse_list(a_arg));
    cfg.ahat = to_vector(parse_list(ahat_arg));
    cfg.record_stride = record_stride;
    cfg.threads = threads;
    cfg.shared_drivers = !independent_drivers;
    cfg.store_paths = store_paths;
    if (!inputs_path.empty()) cfg.input = io::load_input_csv(inputs_path);
    if (!box_arg.empty()) cfg.safe_box = parse_box(box_arg);

    // certificate constraint: pinned-to-zero external inputs must be zero
    if (cfg.input.times.size() > 0) {
        Index uhoff = 0;
        for (std::size_t i = 0; i < net.subsystems.size(); ++i) {
            const Index mh = abstractions[i].abs_sys.m();
            if (lc.cert.zero_ext_ids.count(net.subsystems[i].id) &&
                cfg.input.values.middleCols(uhoff, mh).cwiseAbs().maxCoeff() > 0.0)
                throw ConfigInvalidError(
                    "input file drives subsystem " +
                    std::to_string(net.subsystems[i].id) +
                    " whose external input is pinned to zero by the certificate");
            uhoff += mh;
        }
    }

    sim::Ensemble ens = sim::run_coupled(net, abstractions, cfg);
    sim::MomentCurve mc = sim::estimate_moment_gap(ens);
    Vector setd = sim::estimate_set_distance(ens);

    const double ev0 = composition::composite_V(lc.cert, abstractions, cfg.a, cfg.ahat);
    const double eu_sup_sq = cfg.input.sup_norm_sq();
    bounds::GainSlopes g{lc.cert.literal.alpha_slope, lc.cert.literal.eta_slope,
                         lc.cert.literal.rho_ext_slope, 0.0, lc.cert.k};

    std::ostringstream os;
    os << "t,mean_gap_sq,se,bound,mean_set_dist_sq\n";
    bool moment_ok = true;
    double worst_sigmas = 0.0, worst_t = 0.0;
    for (Index j = 0; j < ens.tgrid.size(); ++j) {
        const double b = bounds::moment_bound(g, ev0, eu_sup_sq, 0.0, ens.tgrid(j));
        os << io::format_double(ens.tgrid(j)) << ',' << io::format_double(mc.mean(j))
           << ',' << io::format_double(mc.se(j)) << ',' << io::format_double(b) << ','
           << io::format_double(setd(j)) << "\n";
        if (mc.mean(j) > b + 3.0 * mc.se(j)) {
            moment_ok = false;
            const double sig = mc.se(j) > 0 ? (mc.mean(j) - b) / mc.se(j) : 1e99;
            if (sig > worst_sigmas) {
                worst_sigmas = sig;
                worst_t = ens.tgrid(j);
            }
        }
    }
    io::write_text_file(out_prefix + ".summary.csv", os.str());

    json report;
    report["config"] = {{"trials", trials},      {"dt", dt},
                        {"horizon", horizon},    {"seed", seed},
                        {"network", network_path}, {"certificate", cert_path},
                        {"inputs", inputs_path}};
    report["ev0"] = ev0;
    report["eu_sup_sq"] = eu_sup_sq;
    report["moment_dominance"] = {{"ok", moment_ok},
                                  {"worst_violation_sigmas", worst_sigmas},
                                  {"worst_t", worst_t}};
    bool exceed_ok = true;
    report["exceedance"] = json::array();
    const double eps_const = g.r_e * eu_sup_sq;
    for (double eps : parse_list(eps_list.empty() ? "1" : eps_list)) {
        for (double T : parse_list(t_list.empty() ? io::format_double(horizon) : t_list)) {
            auto est = sim::estimate_sup_exceedance(ens, eps, T);
            const double bound =
                bounds::sup_probability_bound(g, ev0, eps, T, eps_const);
            const double halfwidth = 0.5 * (est.wilson_high - est.wilson_low);
            const bool ok = est.fraction <= bound + halfwidth;
            exceed_ok = exceed_ok && ok;
            report["exceedance"].push_back({{"epsilon", eps},
                                            {"T", T},
                                            {"fraction", est.fraction},
                                            {"wilson_low", est.wilson_low},
                                            {"wilson_high", est.wilson_high},
                                            {"bound", bound},
                                            {"dominated", ok}});
        }
    }
    io::save_json(out_prefix + ".report.json", report);

    std::cout << "ensemble: " << trials << " trials, " << ens.tgrid.size()
              << " grid points; EV0 = " << ev0 << ", sup ||uhat||^2 = " << eu_sup_sq
              << "\n";
    std::cout << "moment dominance: " << (moment_ok ? "ok" : "VIOLATED") << "\n";
    std::cout << "exceedance dominance: " << (exceed_ok ? "ok" : "VIOLATED") << "\n";
    if (!moment_ok || !exceed_ok) {
        std::cerr << "bound dominance failed beyond 3 SE (worst at t = " << worst_t
                  << ", " << worst_sigmas << " sigmas)\n";
        return 4;
    }
    return 0;
}

int cmd_verify(const std::string& network_path, const std::string& cert_path,
               std::uint64_t trials, std::uint64_t seed, const CommonParams& params) {
    Network net = io::load_network(network_path, params.resolve());
    io::LoadedCertificate lc = io::load_certificate(cert_path);
    std::vector<abstraction::AbstractionResult> abstractions(net.subsystems.size());
    for (std::size_t i = 0; i < lc.ids.size(); ++i) {
        const Index pos = net.index_of(lc.ids[i]);
        if (pos < 0) throw ConfigInvalidError("certificate subsystem id mismatch");
        abstractions[pos] = lc.abstractions[i];
    }

    bool ok = true;
    for (std::size_t i = 0; i < net.subsystems.size(); ++i) {
        const auto& s = net.subsystems[i];
        const auto& res = abstractions[i];
        auto rep = ssf::verify_ssf(res.cert, s.sys, res.abs_sys, trials, seed);
        std::cout << "subsystem " << s.id << ": con1 margin " << rep.margins.con1
                  << ", con11 margin " << rep.margins.con11 << ", worst slack "
                  << rep.worst_slack << (rep.ok() ? "  [ok]" : "  [FAIL]") << "\n";
        for (const auto& [name, r] : rep.con2_residuals)
            if (r > tol::eq) std::cout << "    " << name << " residual " << r << "\n";
        ok = ok && rep.ok();
        if (res.bp) {
            auto c3 = abstraction::con3_residuals(s.sys, res.abs_sys.C, res.cert.P, *res.bp);
            for (const auto& [name, r] : c3) {
                if (r > tol::eq) {
                    std::cout << "    " << name << " residual " << r << "  [FAIL]\n";
                    ok = false;
                }
            }
        }
    }

    const double radius =
        la::spectral_radius(Matrix(lc.cert.Lambda.inverse() * lc.cert.Delta));
    Vector slack = (lc.cert.Lambda - lc.cert.Delta).transpose() * lc.cert.mu;
    bool sg_ok = radius < 1.0 - tol::sg && slack.minCoeff() > 0.0;
    std::cout << "small gain: spectral radius " << radius
              << (sg_ok ? "  [ok]" : "  [FAIL]") << "\n";
    ok = ok && sg_ok;

    auto comp = composition::check_composite_dissipation(net, abstractions, lc.cert,
                                                         trials, seed);
    std::cout << "composite dissipation: worst slack " << comp.worst_slack
              << ", worst sandwich " << comp.worst_sandwich
              << (comp.ok() ? "  [ok]" : "  [FAIL]") << "\n";
    ok = ok && comp.ok();

    return ok ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compositional abstractions of interconnected jump linear stochastic systems"};
    app.require_subcommand(1);

    CommonParams params;

    // ---- abstract ----
    auto* ab = app.add_subcommand("abstract", "build one subsystem abstraction");
    std::string ab_system, ab_p, ab_out = "abstraction.json";
    std::string ab_bhat = "identity", ab_mk = "auto";
    double ab_kappa = 1.0, ab_pi = 0.0;
    std::uint64_t ab_trials = 10000, ab_seed = 0;
    ab->add_option("--system", ab_system, "subsystem JSON")->required();
    ab->add_option("--p", ab_p, "projection matrix CSV")->required();
    ab->add_option("--kappa-hat", ab_kappa, "decay rate of the design inequality")->required();
    auto* ab_pi_opt = ab->add_option("--pi", ab_pi, "Young split (default kappa/2)");
    ab->add_option("--bhat", ab_bhat, "identity | behavior | file:PATH");
    ab->add_option("--mk", ab_mk, "auto | lmi | fallback | file:PATH ([M; K] stacked)");
    ab->add_option("--verify-trials", ab_trials, "randomized verification samples");
    ab->add_option("--seed", ab_seed, "verification seed");
    ab->add_option("--d", params.d, "coupling parameter d");
    ab->add_option("--param", params.extra, "extra name=value parameters");
    ab->add_option("--out", ab_out, "output JSON");

    // ---- compose ----
    auto* co = app.add_subcommand("compose", "small-gain composition of abstractions");
    std::string co_net, co_zero, co_mu, co_out = "certificate.json";
    std::vector<std::string> co_abs;
    bool co_triangle = true;
    co->add_option("--network", co_net, "network JSON")->required();
    co->add_option("--abstractions", co_abs, "abstraction JSON files")
        ->required()
        ->delimiter(',');
    co->add_flag("--triangle-mode,!--no-triangle-mode", co_triangle,
                 "linear rho satisfies the triangle inequality (default on)");
    co->add_option("--zero-ext", co_zero, "ids whose external input is pinned to zero");
    co->add_option("--mu", co_mu, "explicit mu vector (default: computed)");
    co->add_option("--d", params.d, "coupling parameter d");
    co->add_option("--param", params.extra, "extra name=value parameters");
    co->add_option("--out", co_out, "output JSON");

    // ---- bounds ----
    auto* bo = app.add_subcommand("bounds", "closed-form error/probability bounds");
    std::string bo_cert, bo_grid = "0:10:0.01", bo_out = "bounds.csv";
    double bo_ev0 = 0.0, bo_eu = 0.0, bo_ew = 0.0, bo_eps = 1.0, bo_ec = 0.0;
    bool bo_paper = false;
    bo->add_option("--certificate", bo_cert, "certificate JSON")->required();
    bo->add_option("--ev0", bo_ev0, "E[V(a, ahat)]");
    bo->add_option("--eu-hat", bo_eu, "E[sup ||uhat||^k]");
    bo->add_option("--ew", bo_ew, "E[sup ||w - what||^k]");
    bo->add_option("--epsilon", bo_eps, "threshold for probability bounds");
    auto* bo_ec_opt = bo->add_option("--eps-const", bo_ec,
                                     "constant upper-bounding rho terms (default r_e*eu)");
    bo->add_flag("--paper-example-mode", bo_paper, "use the example-variant slopes");
    bo->add_option("--grid", bo_grid, "t0:t1:dt");
    bo->add_option("--out", bo_out, "output CSV");

    // ---- simulate ----
    auto* si = app.add_subcommand("simulate", "Monte Carlo validation of a certificate");
    std::string si_net, si_cert, si_in, si_eps = "1", si_T, si_a, si_ahat, si_box,
                si_out = "run";
    std::uint64_t si_trials = 1000, si_seed = 0;
    double si_dt = 1e-3, si_horizon = 15.0;
    Index si_stride = 0;
    int si_threads = 0;
    bool si_indep = false, si_paths = false;
    si->add_option("--network", si_net, "network JSON")->required();
    si->add_option("--certificate", si_cert, "certificate JSON")->required();
    si->add_option("--inputs", si_in, "abstract input CSV (sample-and-hold)");
    si->add_option("--trials", si_trials, "Monte Carlo trials");
    si->add_option("--dt", si_dt, "integration step");
    si->add_option("--horizon", si_horizon, "time horizon");
    si->add_option("--seed", si_seed, "master seed");
    si->add_option("--epsilon", si_eps, "exceedance thresholds, comma separated");
    si->add_option("--T", si_T, "exceedance horizons, comma separated");
    si->add_option("--a", si_a, "concrete initial state, comma separated")->required();
    si->add_option("--ahat", si_ahat, "abstract initial state, comma separated")->required();
    si->add_option("--safe-box", si_box, "safe set, lo:hi per output dimension");
    si->add_option("--record-stride", si_stride, "grid decimation (0 = auto)");
    si->add_option("--threads", si_threads, "thread cap (0 = JLSSABS_THREADS or OpenMP)");
    si->add_flag("--independent-drivers", si_indep,
                 "abstract system gets its own noise (sensitivity studies)");
    si->add_flag("--store-paths", si_paths, "keep per-trial output paths in memory");
    si->add_option("--d", params.d, "coupling parameter d");
    si->add_option("--param", params.extra, "extra name=value parameters");
    si->add_option("--out", si_out, "output prefix (.summary.csv, .report.json)");

    // ---- verify ----
    auto* ve = app.add_subcommand("verify", "re-run all checks on stored artifacts");
    std::string ve_net, ve_cert;
    std::uint64_t ve_trials = 100000, ve_seed = 0;
    ve->add_option("--network", ve_net, "network JSON")->required();
    ve->add_option("--certificate", ve_cert, "certificate JSON")->required();
    ve->add_option("--trials", ve_trials, "randomized check samples");
    ve->add_option("--seed", ve_seed, "sampling seed");
    ve->add_option("--d", params.d, "coupling parameter d");
    ve->add_option("--param", params.extra, "extra name=value parameters");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ab->parsed())
            return cmd_abstract(ab_system, ab_p, ab_kappa, ab_pi, ab_pi_opt->count() > 0,
                                ab_bhat, ab_mk, ab_trials, ab_seed, params, ab_out);
        if (co->parsed())
            return cmd_compose(co_net, co_abs, co_triangle, co_zero, co_mu, params, co_out);
        if (bo->parsed())
            return cmd_bounds(bo_cert, bo_ev0, bo_eu, bo_ew, bo_eps, bo_ec,
                              bo_ec_opt->count() > 0, bo_paper, bo_grid, bo_out);
        if (si->parsed())
            return cmd_simulate(si_net, si_cert, si_in, si_trials, si_dt, si_horizon,
                                si_seed, si_eps, si_T, si_a, si_ahat, si_box, si_stride,
                                si_threads, si_indep, si_paths, params, si_out);
        if (ve->parsed()) return cmd_verify(ve_net, ve_cert, ve_trials, ve_seed, params);
    } catch (const ConditionViolatedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
