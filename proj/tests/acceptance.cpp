// acceptance.cpp — one pass/fail line per acceptance criterion
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "xychain/xychain.hpp"

using namespace xychain;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& details) {
    std::printf("[%s] %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, details.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

template <class... T>
std::string fmt(const char* f, T... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

void guarded(int id, const char* name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("threw: ") + e.what());
    }
}

const double kGammas[] = {0.0, 0.5, 1.0};
const double kFields[] = {2.0, 5.0};

std::vector<double> seeded_times(std::uint64_t seed, std::size_t n, double t_max) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, t_max);
    std::vector<double> t(n);
    for (auto& x : t) x = U(rng);
    std::sort(t.begin(), t.end());
    return t;
}

// 1. closed form vs configuration sum vs dense oracle
void oracle_triangle() {
    double worst_ed = 0.0, worst_cs = 0.0;
    int cases = 0;
    std::uint64_t seed = 20;
    for (int N : {4, 6, 8}) {
        for (double g : kGammas) {
            for (double h : kFields) {
                const ChainParams p(N, 1.0, g, h);
                const std::vector<double> times = seeded_times(seed++, 20, 4.0 * N);
                const Trajectory ed = ed::oracle_trajectory(p, Bath::InfiniteT, {0.0, 0.0, 1.0}, times);
                const ClosedFormEvaluator cf(p);
                for (std::size_t i = 0; i < times.size(); ++i) {
                    const double v = cf(1.0, times[i]);
                    worst_ed = std::max(worst_ed, std::abs(v - ed.pz[i]));
                    worst_cs = std::max(worst_cs, std::abs(v - pz_config_sum(p, 1.0, times[i])));
                }
                ++cases;
            }
        }
    }
    report(1, "closed form = configuration sum = dense oracle", worst_ed < 1e-9 && worst_cs < 1e-9,
           fmt("%d parameter sets x 20 times, max|cf-ed| = %.3g, max|cf-cs| = %.3g (tol 1e-9)", cases, worst_ed, worst_cs));
}

// 2. dense spectrum = free-fermion levels
void spectrum() {
    double worst = 0.0;
    for (double g : kGammas) {
        for (double h : kFields) worst = std::max(worst, ed::spectrum_equivalence(ChainParams(8, 1.0, g, h)).max_mismatch);
    }
    report(2, "spectrum equivalence at N=8", worst < 1e-9, fmt("max level mismatch %.3g over 6 parameter sets (tol 1e-9)", worst));
}

// 3. sigma^z_1 matrix elements between free-fermion eigenstates
void matrix_elements() {
    double d_diag = 0.0, d_swap = 0.0, d_pair = 0.0, forbidden = 0.0;
    long counted = 0;
    for (int N : {4, 6}) {
        for (double g : kGammas) {
            for (double h : kFields) {
                const ChainParams p(N, 1.0, g, h);
                const ed::FermionOperators ops(p);
                struct State {
                    FermionConfig config;
                    Eigen::VectorXcd vec;
                };
                std::vector<State> states;
                for (Parity par : {Parity::Odd, Parity::Even}) {
                    for (std::uint64_t m = 0; m < (std::uint64_t{1} << N); ++m) {
                        if ((std::popcount(m) % 2 == 1) != (par == Parity::Odd)) continue;
                        FermionConfig c(ops.table(par).sector(), m);
                        states.push_back({c, ops.eigenstate(c)});
                    }
                }
                for (const auto& ket : states) {
                    const Eigen::VectorXcd zk = ed::apply_pauli(N, 1, ed::Pauli::Z, ket.vec);
                    for (const auto& bra : states) {
                        const std::complex<double> el = bra.vec.dot(zk);
                        ++counted;
                        if (bra.config.parity() != ket.config.parity()) {
                            forbidden = std::max(forbidden, std::abs(el));
                            continue;
                        }
                        const SpectralTable& tab = ops.table(ket.config.parity());
                        const std::uint64_t a = ket.config.mask(), b = bra.config.mask();
                        const std::uint64_t gone = a & ~b, added = b & ~a;
                        const int ng = std::popcount(gone), na = std::popcount(added);
                        auto mom = [&](std::uint64_t bits, int k) {
                            for (std::size_t i = 0; i < tab.size(); ++i) {
                                if ((bits >> i) & 1u) {
                                    if (k-- == 0) return tab[i].q;
                                }
                            }
                            return Momentum{};
                        };
                        if (ng == 0 && na == 0) {
                            d_diag = std::max(d_diag, std::abs(matelem_diagonal(ket.config, tab) - el.real()) + std::abs(el.imag()));
                        } else if (ng == 1 && na == 1) {
                            const double m = matelem_offdiag(OffDiagonalKind::Swap, mom(gone, 0), mom(added, 0), tab);
                            d_swap = std::max(d_swap, std::abs(m - std::abs(el)));
                        } else if (ng == 0 && na == 2) {
                            const double m = matelem_offdiag(OffDiagonalKind::PairCreate, mom(added, 0), mom(added, 1), tab);
                            d_pair = std::max(d_pair, std::abs(m - std::abs(el)));
                        } else if (ng == 2 && na == 0) {
                            const double m = matelem_offdiag(OffDiagonalKind::PairCreate, mom(gone, 0), mom(gone, 1), tab);
                            d_pair = std::max(d_pair, std::abs(m - std::abs(el)));
                        } else {
                            forbidden = std::max(forbidden, std::abs(el));
                        }
                    }
                }
            }
        }
    }
    const bool pass = d_diag < 1e-10 && d_swap < 1e-10 && d_pair < 1e-10 && forbidden < 1e-12;
    report(3, "matrix elements vs dense eigenstates (N=4,6)", pass,
           fmt("%ld elements; diag %.3g, swap %.3g, pair %.3g (tol 1e-10); forbidden max %.3g (tol 1e-12)",
               counted, d_diag, d_swap, d_pair, forbidden));
}

// 4. regular stage, its end, the first revival and the N scaling
void regular_stage() {
    const ChainParams p100(100, 1.0, 0.0, 5.0), p50(50, 1.0, 0.0, 5.0);
    const Trajectory t100 = pz_trajectory(p100, 1.0, uniform_grid(400.0, 8001));
    const Trajectory t50 = pz_trajectory(p50, 1.0, uniform_grid(200.0, 4001));
    double dev = 0.0;
    for (std::size_t i = 0; i < t100.size() && t100.grid[i] <= 50.0; ++i) {
        dev = std::max(dev, std::abs(t100.pz[i] - regular_stage_pz(1.0, 1.0, t100.grid[i])));
    }
    const StageReport s100 = detect_stages(t100, p100, 1.0);
    const StageReport s50 = detect_stages(t50, p50, 1.0);
    const double end100 = s100.t_regular_end.value_or(NAN), end50 = s50.t_regular_end.value_or(NAN);
    double revival = NAN;
    for (const auto& r : s100.revivals) {
        if (r.time >= 100.0 && r.time <= 200.0) {
            revival = r.time;
            break;
        }
    }
    const double ratio = end100 / end50;
    const bool pass = dev <= 0.02 && end100 >= 80.0 && end100 <= 120.0 && !std::isnan(revival) && ratio >= 1.7 && ratio <= 2.3;
    report(4, "regular stage, revival and N scaling", pass,
           fmt("max|pz-J0^2| on [0,50] = %.3g (<= 0.02); t_end(100) = %.2f in [80,120]; revival at %.2f in [100,200]; "
               "t_end(100)/t_end(50) = %.3f in [1.7,2.3]",
               dev, end100, revival, ratio));
}

// 5. long-time average and the quiet-cold window
void long_time() {
    const ChainParams p(100, 1.0, 0.0, 5.0);
    const Trajectory tr = pz_trajectory(p, 1.0, uniform_grid(2000.0, 40001));
    const double mean = trapezoid_mean(tr.grid, tr.pz, 1000.0, 2000.0);
    const double target = long_time_average(1.0, 100);
    const QuietColdReport q = quiet_cold(tr, p, 1.0);
    const double rel = std::abs(mean - target) / target;
    const bool pass = rel <= 0.25 && q.is_cold && q.mean_pz_in_window < target;
    report(5, "long-time average and quiet-cold window", pass,
           fmt("mean pz on [1000,2000] = %.5f vs 2p0z/N = %.3f (rel %.3f <= 0.25); window [%.2f,%.1f] mean %.5f < %.3f; is_cold=%s",
               mean, target, rel, q.t_lo, q.t_hi, q.mean_pz_in_window, target, q.is_cold ? "true" : "false"));
}

// 6. dense oracle against the Niemeijer law, and the timescale ratio
void niemeijer() {
    const ChainParams p(12, 1.0, 0.0, 10.0);
    const Polarization3 p0{0.6, 0.0, 0.8};
    const std::vector<double> grid = uniform_grid(6.0, 601);
    const Trajectory ed = ed::oracle_trajectory(p, Bath::ZeroT, p0, grid);
    const Trajectory nm = niemeijer_trajectory(p, p0, grid);
    double dev = 0.0;
    for (std::size_t i = 0; i < grid.size() && grid[i] <= 4.0; ++i) {
        dev = std::max({dev, std::abs(ed.px[i] - nm.px[i]), std::abs(ed.py[i] - nm.py[i]), std::abs(ed.pz[i] - nm.pz[i])});
    }
    const TimescaleReport ts = timescales(ed);
    const double analytic = niemeijer_timescale_ratio();
    const bool pass = dev <= 0.05 && ts.ratio > 0.3 && ts.ratio < 3.0 && analytic > 1.1 && analytic < 1.4;
    report(6, "dense oracle vs Niemeijer law (N=12, zero T)", pass,
           fmt("max component deviation on [0,4] = %.3g (<= 0.05); ED tau_dec/tau_th = %.4f in (0.3,3); "
               "analytic ratio = %.4f in (1.1,1.4)",
               dev, ts.ratio, analytic));
}

// 7. conservation laws of the dense evolution
void conservation() {
    double worst = 0.0;
    int states = 0;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> G;
    for (int N : {4, 6}) {
        const Eigen::Index d = ed::dimension(N);
        for (double g : kGammas) {
            for (double h : kFields) {
                const ChainParams p(N, 1.0, g, h);
                const ed::EigenDecomposition eig = ed::diagonalize(p);
                const Eigen::MatrixXcd H = ed::build_hamiltonian(p).cast<std::complex<double>>();
                const ed::SparseOperator Pi = ed::parity_operator(N);
                for (int k = 0; k < 10; ++k) {
                    const bool pure = k % 2 == 0;
                    Eigen::MatrixXcd A(d, pure ? 1 : d);
                    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = {G(rng), G(rng)};
                    ed::DenseState s0 = pure ? ed::DenseState::pure(A.col(0).normalized())
                                             : ed::DenseState::mixed((A * A.adjoint()) / (A * A.adjoint()).trace());
                    const double tr0 = s0.trace().real(), pu0 = s0.purity();
                    const double e0 = s0.expectation(H).real(), pi0 = s0.expectation(Pi).real();
                    for (double t : {0.37, 4.1, 29.5}) {
                        const ed::DenseState st = ed::evolve(s0, eig, t);
                        worst = std::max({worst, std::abs(st.trace().real() - tr0), std::abs(st.purity() - pu0),
                                          std::abs(st.expectation(H).real() - e0), std::abs(st.expectation(Pi).real() - pi0)});
                    }
                    ++states;
                }
            }
        }
    }
    report(7, "conservation of trace, purity, energy and parity", worst < 1e-10,
           fmt("%d random states (pure and mixed) x 3 times, max drift %.3g (tol 1e-10)", states, worst));
}

// 8. late-time oscillation amplitude against anisotropy and field
void scan() {
    const std::vector<ScanRow> rows = anisotropy_field_scan(100, 1.0, {0.0, 1.0}, {2.0, 5.0, 10.0});
    auto rms = [&](double g, double h) {
        for (const auto& r : rows) {
            if (r.gamma == g && r.h == h) return r.late.rms;
        }
        return static_cast<double>(NAN);
    };
    const double g0 = rms(0.0, 5.0), g1 = rms(1.0, 5.0);
    const double h2 = rms(0.0, 2.0), h10 = rms(0.0, 10.0);
    const bool damped = g1 < g0;
    const double rel = (h10 - h2) / h2;
    const bool grows = rel > 1e-9;
    report(8, "late-time rms: anisotropy damps, field enhances", damped && grows,
           fmt("h=5: rms(gamma=0) = %.6f, rms(gamma=1) = %.6f (decrease %s); gamma=0: rms(h=2) = %.15f, rms(h=10) = %.15f, "
               "relative change %.3g (need > 1e-9: %s)",
               g0, g1, damped ? "yes" : "no", h2, h10, rel, grows ? "yes" : "no"));
}

}  // namespace

int main() {
    guarded(1, "closed form = configuration sum = dense oracle", oracle_triangle);
    guarded(2, "spectrum equivalence at N=8", spectrum);
    guarded(3, "matrix elements vs dense eigenstates (N=4,6)", matrix_elements);
    guarded(4, "regular stage, revival and N scaling", regular_stage);
    guarded(5, "long-time average and quiet-cold window", long_time);
    guarded(6, "dense oracle vs Niemeijer law (N=12, zero T)", niemeijer);
    guarded(7, "conservation of trace, purity, energy and parity", conservation);
    guarded(8, "late-time rms: anisotropy damps, field enhances", scan);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
