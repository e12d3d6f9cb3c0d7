// exact_dynamics.hpp — exact p^z(t) of the first spin for an infinite-temperature bath
//
// Two routes are provided:
//   * the closed form  p^z(t) = p0z/2 (A_odd^2 + A_ev^2 + B_odd^2 + B_ev^2)
//     with A = N^{-1} sum_q cos(E_q t) and B = N^{-1} sum_q cos(theta_q) sin(E_q t);
//   * the eigenstate sum 2^{-N} p0z sum_{Q,Q'} |<Q'|sigma_1^z|Q>|^2 exp(-i (E(Q) - E(Q')) t)
//     over free-fermion configurations, using the three non-vanishing
//     matrix-element families (diagonal, single swap, pair creation).
//
// The factorized closed form reproduces the exact dynamics for N >= 4. At N = 2
// it does not (exact: cos^2(kappa t) at gamma = 0; closed form: (1 + cos^2(kappa t))/2),
// while the eigenstate sum still does; such trajectories carry valid_regime = false.

#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "xychain/chain_model.hpp"
#include "xychain/error.hpp"
#include "xychain/summation.hpp"
#include "xychain/trajectory.hpp"

namespace xychain {

struct ABSums {
    double t{0.0};
    double A_odd{0.0};
    double A_ev{0.0};
    double B_odd{0.0};
    double B_ev{0.0};
};

namespace detail {

inline void check_table_pair(const SpectralTable& odd, const SpectralTable& even) {
    if (odd.parity() != Parity::Odd || even.parity() != Parity::Even) {
        throw ConfigError("ab_sums: expected (odd, even) spectral tables");
    }
    if (!(odd.params() == even.params())) throw ConfigError("ab_sums: tables built from different parameters");
}

// cos(theta_q) with the E_q = 0 mode contributing nothing (its sin(E_q t) vanishes).
inline double safe_cos_theta(const ModeData& m) { return m.E == 0.0 ? 0.0 : m.epsilon / m.E; }

inline std::pair<double, double> sector_sums(const SpectralTable& table, double t) {
    const auto& modes = table.modes();
    const double inv_n = 1.0 / static_cast<double>(table.N());
    const double a = pairwise_sum(0, modes.size(), [&](std::size_t i) { return std::cos(modes[i].E * t); });
    const double b = pairwise_sum(0, modes.size(), [&](std::size_t i) {
        return safe_cos_theta(modes[i]) * std::sin(modes[i].E * t);
    });
    return {a * inv_n, b * inv_n};
}

}  // namespace detail

inline ABSums ab_sums(const SpectralTable& odd, const SpectralTable& even, double t) {
    detail::check_table_pair(odd, even);
    if (!std::isfinite(t)) throw ConfigError("ab_sums: t must be finite");
    ABSums s;
    s.t = t;
    std::tie(s.A_odd, s.B_odd) = detail::sector_sums(odd, t);
    std::tie(s.A_ev, s.B_ev) = detail::sector_sums(even, t);
    return s;
}

// Holds both spectral tables so repeated evaluations skip the setup.
class ClosedFormEvaluator {
public:
    explicit ClosedFormEvaluator(const ChainParams& params)
        : odd_(params, make_sector(params.N(), Parity::Odd)),
          even_(params, make_sector(params.N(), Parity::Even)) {}

    const SpectralTable& odd() const noexcept { return odd_; }
    const SpectralTable& even() const noexcept { return even_; }
    const ChainParams& params() const noexcept { return odd_.params(); }

    // p^z(t) / p0z
    double response(double t) const {
        const ABSums s = ab_sums(odd_, even_, t);
        return 0.5 * (s.A_odd * s.A_odd + s.A_ev * s.A_ev + s.B_odd * s.B_odd + s.B_ev * s.B_ev);
    }

    double operator()(double p0z, double t) const { return p0z * response(t); }

private:
    SpectralTable odd_;
    SpectralTable even_;
};

inline double pz_closed_form(const ChainParams& params, double p0z, double t) {
    if (!(std::abs(p0z) <= 1.0)) throw ConfigError("pz_closed_form: |p0z| must not exceed 1");
    return ClosedFormEvaluator(params)(p0z, t);
}

inline Trajectory pz_trajectory(const ChainParams& params, double p0z, const std::vector<double>& grid) {
    if (!(std::abs(p0z) <= 1.0)) throw ConfigError("pz_trajectory: |p0z| must not exceed 1");
    check_time_grid(grid);
    Trajectory traj{.grid = grid,
                    .px = {},
                    .py = {},
                    .pz = {},
                    .meta = TrajectoryMeta{.params = params,
                                           .method = Method::ClosedForm,
                                           .bath = Bath::InfiniteT,
                                           .p0 = {0.0, 0.0, p0z},
                                           .valid_regime = params.weak_coupling() && params.N() >= 4},
                    .audit = std::nullopt};
    const ClosedFormEvaluator eval(params);
    traj.pz.reserve(grid.size());
    for (double t : grid) traj.pz.push_back(eval(p0z, t));
    return traj;
}

// ---------------------------------------------------------------------------
// Free-fermion configurations and sigma_1^z matrix elements

// Occupied momenta of one parity sector, encoded as a bitmask over the sector grid
// (bit i <-> i-th momentum in ascending order).
class FermionConfig {
public:
    FermionConfig(const MomentumSector& sector, std::uint64_t mask) : sector_(sector), mask_(mask) {
        if (sector.N > 62) throw ConfigError("FermionConfig: N > 62 not representable");
        if (sector.N < 64 && (mask >> sector.N) != 0) throw ConfigError("FermionConfig: mask outside the sector");
        const bool odd_count = std::popcount(mask) % 2 == 1;
        if (odd_count != (sector.parity == Parity::Odd)) {
            throw ConfigError("FermionConfig: occupation count parity must match the sector (odd count <-> odd sector)");
        }
    }

    FermionConfig(const MomentumSector& sector, const std::vector<Momentum>& occupied)
        : FermionConfig(sector, mask_of(sector, occupied)) {}

    const MomentumSector& sector() const noexcept { return sector_; }
    Parity parity() const noexcept { return sector_.parity; }
    std::uint64_t mask() const noexcept { return mask_; }
    int count() const noexcept { return std::popcount(mask_); }
    bool occupies(std::size_t index) const noexcept { return (mask_ >> index) & 1u; }

    std::vector<Momentum> occupied() const {
        std::vector<Momentum> out;
        for (std::size_t i = 0; i < sector_.size(); ++i) {
            if (occupies(i)) out.push_back(sector_.momenta[i]);
        }
        return out;
    }

    std::string to_string() const {
        std::string s = std::string(xychain::to_string(parity())) + "{";
        bool first = true;
        for (Momentum q : occupied()) {
            if (!first) s += ", ";
            s += xychain::to_string(q);
            first = false;
        }
        return s + "}";
    }

    bool operator==(const FermionConfig& o) const noexcept {
        return mask_ == o.mask_ && sector_.parity == o.sector_.parity && sector_.N == o.sector_.N;
    }

private:
    static std::uint64_t mask_of(const MomentumSector& sector, const std::vector<Momentum>& occupied) {
        std::uint64_t m = 0;
        for (Momentum q : occupied) {
            const std::size_t i = sector.index_of(q);
            if (i >= sector.size()) throw ConfigError("FermionConfig: momentum " + xychain::to_string(q) + " not in sector");
            if ((m >> i) & 1u) throw ConfigError("FermionConfig: repeated momentum " + xychain::to_string(q));
            m |= std::uint64_t{1} << i;
        }
        return m;
    }

    MomentumSector sector_;
    std::uint64_t mask_;
};

// <Q|sigma_1^z|Q> = N^{-1} sum_p eta(Q, p) cos(theta_p), eta = +1 if p in Q else -1.
inline double matelem_diagonal(const FermionConfig& config, const SpectralTable& table) {
    if (config.parity() != table.parity() || config.sector().N != table.N()) {
        throw ConfigError("matelem_diagonal: configuration and table belong to different sectors");
    }
    const auto& modes = table.modes();
    const double sum = pairwise_sum(0, modes.size(), [&](std::size_t i) {
        const double c = detail::safe_cos_theta(modes[i]);
        return config.occupies(i) ? c : -c;
    });
    return sum / static_cast<double>(table.N());
}

enum class OffDiagonalKind {
    Swap,        // Q = K + {q}, Q' = K + {q'}
    PairCreate,  // Q = Q' + {q, q'}
};

namespace detail {
inline double swap_magnitude(double theta_a, double theta_b, int N) {
    return 2.0 / N * std::abs(std::cos(0.5 * (theta_a + theta_b)));
}
inline double pair_magnitude(double theta_a, double theta_b, int N) {
    return 2.0 / N * std::abs(std::sin(0.5 * (theta_a - theta_b)));
}
}  // namespace detail

// |<Q'|sigma_1^z|Q>| for the two off-diagonal families.
inline double matelem_offdiag(OffDiagonalKind kind, Momentum q, Momentum qtilde, const SpectralTable& table) {
    if (q == qtilde) throw ConfigError("matelem_offdiag: momenta must differ");
    const double ta = table.mode(q).theta;
    const double tb = table.mode(qtilde).theta;
    return kind == OffDiagonalKind::Swap ? detail::swap_magnitude(ta, tb, table.N())
                                         : detail::pair_magnitude(ta, tb, table.N());
}

inline constexpr int kConfigSumDefaultCap = 10;

struct ConfigSumResult {
    double value{0.0};          // real part
    double imag_residue{0.0};   // |imaginary part| of the accumulated complex sum
};

namespace detail {

inline std::complex<double> sector_config_sum(const SpectralTable& table, double t) {
    const int n = table.N();
    const auto& modes = table.modes();
    const bool odd = table.parity() == Parity::Odd;
    const std::uint64_t limit = std::uint64_t{1} << n;

    std::vector<double> cth(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cth[static_cast<std::size_t>(i)] = safe_cos_theta(modes[static_cast<std::size_t>(i)]);

    auto phase = [&](double dE) { return std::polar(1.0, -dE * t); };

    std::complex<double> total{0.0, 0.0};
    for (std::uint64_t m = 0; m < limit; ++m) {
        if ((std::popcount(m) % 2 == 1) != odd) continue;

        // Diagonal element.
        double diag = 0.0;
        for (int i = 0; i < n; ++i) diag += ((m >> i) & 1u) ? cth[static_cast<std::size_t>(i)] : -cth[static_cast<std::size_t>(i)];
        diag /= n;
        std::complex<double> acc{diag * diag, 0.0};

        for (int i = 0; i < n; ++i) {
            const bool in_i = (m >> i) & 1u;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const bool in_j = (m >> j) & 1u;
                const double ti = modes[static_cast<std::size_t>(i)].theta;
                const double tj = modes[static_cast<std::size_t>(j)].theta;
                if (in_i && !in_j) {
                    // Swap i -> j.
                    const double amp = swap_magnitude(ti, tj, n);
                    const double dE = modes[static_cast<std::size_t>(i)].E - modes[static_cast<std::size_t>(j)].E;
                    acc += amp * amp * phase(dE);
                } else if (j > i && in_i == in_j) {
                    // Remove (both occupied) or add (both empty) the pair {i, j}.
                    const double amp = pair_magnitude(ti, tj, n);
                    const double pairE = modes[static_cast<std::size_t>(i)].E + modes[static_cast<std::size_t>(j)].E;
                    const double dE = in_i ? pairE : -pairE;
                    acc += amp * amp * phase(dE);
                }
            }
        }
        total += acc;
    }
    return total;
}

}  // namespace detail

// Brute-force eigenstate sum for p^z(t); cost O(2^N N^2) per time point.
inline ConfigSumResult pz_config_sum_detailed(const ChainParams& params, double p0z, double t,
                                              int cap = kConfigSumDefaultCap) {
    if (params.N() > cap) throw CapExceeded("pz_config_sum", params.N(), cap);
    if (!(std::abs(p0z) <= 1.0)) throw ConfigError("pz_config_sum: |p0z| must not exceed 1");
    const SpectralTable odd(params, make_sector(params.N(), Parity::Odd));
    const SpectralTable even(params, make_sector(params.N(), Parity::Even));
    const std::complex<double> sum = detail::sector_config_sum(odd, t) + detail::sector_config_sum(even, t);
    const double norm = std::ldexp(p0z, -params.N());
    return {norm * sum.real(), std::abs(norm * sum.imag())};
}

inline double pz_config_sum(const ChainParams& params, double p0z, double t, int cap = kConfigSumDefaultCap) {
    const ConfigSumResult r = pz_config_sum_detailed(params, p0z, t, cap);
    if (!(r.imag_residue < 1e-10)) {
        throw NumericalError("pz_config_sum: imaginary residue " + std::to_string(r.imag_residue) + " exceeds 1e-10");
    }
    return r.value;
}

}  // namespace xychain
