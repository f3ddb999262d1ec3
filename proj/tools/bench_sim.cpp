// Benchmark: OpenMP-parallel ensemble engine against the serial reference.
// Builds the four-subsystem benchmark network in memory, runs both paths on
// identical configs, checks bit-equality, and reports timing.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "jlssabs/abstraction.hpp"
#include "jlssabs/sim.hpp"

using namespace jlssabs;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Index>(rows.size()),
             static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

JlssSystem double_integrator(double d) {
    JlssSystem sys;
    sys.A = mat({{0, 1}, {2, 0}});
    sys.B = mat({{0}, {1}});
    sys.C = mat({{1, 0}});
    sys.D = d * mat({{0}, {1}});
    sys.diffusion = {0.4 * Matrix::Identity(2, 2)};
    sys.jumps = {{4.2, 0.1 * Matrix::Identity(2, 2)}};
    return sys;
}

JlssSystem triple_integrator(double d) {
    JlssSystem sys;
    sys.A = mat({{0, 1, 0}, {0, 0, 1}, {-24, -26, -9}});
    sys.B = Matrix::Zero(3, 0);
    sys.C = mat({{1, 0, 0}, {1, 0, 0}});
    sys.D = d * mat({{0}, {-1}, {5}});
    sys.diffusion = {0.4 * Matrix::Identity(3, 3)};
    sys.jumps = {{4.2, 0.1 * Matrix::Identity(3, 3)}};
    return sys;
}

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace

int main(int argc, char** argv) {
    const double d = 0.5;
    std::uint64_t trials = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 200;
    const double horizon = argc > 2 ? std::strtod(argv[2], nullptr) : 5.0;

    Network net;
    net.subsystems = {{1, double_integrator(d), {{3, 1}}, {{4, 1}}},
                      {2, double_integrator(d), {{4, 1}}, {{3, 1}}},
                      {3, triple_integrator(d), {{2, 1}}, {{1, 1}, {OutputBlock::kExternal, 1}}},
                      {4, triple_integrator(d), {{1, 1}}, {{2, 1}, {OutputBlock::kExternal, 1}}}};

    abstraction::AbstractionOptions o12;
    o12.kappa_hat = 3.0;
    o12.pi = 1.0;
    o12.bhat_mode = abstraction::BhatMode::Identity;
    o12.verify_trials = 1000;
    abstraction::AbstractionOptions o34 = o12;
    o34.kappa_hat = 2.5;
    o34.bhat_mode = abstraction::BhatMode::BehaviorPreserving;

    std::vector<abstraction::AbstractionResult> abs;
    abs.push_back(abstraction::build_abstraction(double_integrator(d), mat({{1}, {-2}}), o12));
    abs.push_back(abstraction::build_abstraction(double_integrator(d), mat({{1}, {-2}}), o12));
    abs.push_back(abstraction::build_abstraction(triple_integrator(d),
                                                 mat({{1, 1}, {-2, -3}, {4, 9}}), o34));
    abs.push_back(abstraction::build_abstraction(triple_integrator(d),
                                                 mat({{1, 1}, {-2, -3}, {4, 9}}), o34));

    sim::SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.horizon = horizon;
    cfg.trials = trials;
    cfg.master_seed = 42;
    cfg.a = Vector(10);
    cfg.a << 1, -1, -5, 1, -1, -5, 1, -2, 1, -2;
    cfg.ahat = Vector(6);
    cfg.ahat << 1.44, -0.69, 1.44, -0.69, 1, 1;
    cfg.input.times = Vector::LinSpaced(2, 0.0, horizon / 2.0);
    cfg.input.values = mat({{0.5, -0.5, 0, 0}, {-0.25, 0.75, 0, 0}});

    std::printf("coupled ensemble: %llu trials, horizon %.1f s, dt %.0e\n",
                static_cast<unsigned long long>(trials), horizon, cfg.dt);

    auto t0 = std::chrono::steady_clock::now();
    sim::Ensemble serial = sim::run_coupled_serial(net, abs, cfg);
    auto t1 = std::chrono::steady_clock::now();
    const double ts = seconds(t0, t1);
    std::printf("serial reference : %8.3f s\n", ts);

    const int maxt = sim::resolve_threads(0);
    for (int nt = 1; nt <= maxt; nt *= 2) {
        cfg.threads = nt;
        auto t2 = std::chrono::steady_clock::now();
        sim::Ensemble par = sim::run_coupled(net, abs, cfg);
        auto t3 = std::chrono::steady_clock::now();
        const double tp = seconds(t2, t3);
        const bool same = (par.gap_sq - serial.gap_sq).norm() == 0.0 &&
                          (par.sup_gap - serial.sup_gap).norm() == 0.0;
        std::printf("openmp %2d thread%s: %8.3f s  speedup %5.2fx  bit-equal: %s\n", nt,
                    nt == 1 ? " " : "s", tp, ts / tp, same ? "yes" : "NO");
        if (!same) return 1;
    }
    return 0;
}
