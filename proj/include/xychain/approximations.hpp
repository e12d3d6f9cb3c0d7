// approximations.hpp — Bessel-function laws for the reduced dynamics of the first spin
//
//   Niemeijer solution (XX chain, zero-temperature bath, 0 <= t < N/kappa):
//     px = J0(kt) (p0x cos ht - p0y sin ht)
//     py = J0(kt) (p0x sin ht + p0y cos ht)
//     pz = -1 + (1 + p0z) J0(kt)^2
//   regular stage (infinite-temperature bath):  pz ~ p0z J0(kt)^2
//   smoothed envelope:                          p0z / (pi k t)
//   long-time average:                          2 p0z / N

#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "xychain/bessel.hpp"
#include "xychain/chain_model.hpp"
#include "xychain/error.hpp"
#include "xychain/trajectory.hpp"

namespace xychain {

inline Polarization3 niemeijer_solution(const Polarization3& p0, double h, double kappa, double t) {
    const double j = bessel_j0(kappa * t);
    const double c = std::cos(h * t);
    const double s = std::sin(h * t);
    return {j * (p0.px * c - p0.py * s), j * (p0.px * s + p0.py * c), -1.0 + (1.0 + p0.pz) * j * j};
}

// kappa << h is read as h >= 5 kappa.
inline constexpr double kNiemeijerFieldRatio = 5.0;

// gamma = 0, h >= 5 kappa and every sample before N/kappa.
inline bool niemeijer_valid(const ChainParams& params, const std::vector<double>& grid) {
    const bool times_ok = grid.empty() || grid.back() < params.N() / params.kappa();
    return params.gamma() == 0.0 && params.h() >= kNiemeijerFieldRatio * params.kappa() && times_ok;
}

inline Trajectory niemeijer_trajectory(const ChainParams& params, const Polarization3& p0,
                                       const std::vector<double>& grid) {
    check_polarization(p0, "niemeijer_trajectory");
    check_time_grid(grid);
    Trajectory traj{.grid = grid,
                    .px = {},
                    .py = {},
                    .pz = {},
                    .meta = TrajectoryMeta{.params = params,
                                           .method = Method::Niemeijer,
                                           .bath = Bath::ZeroT,
                                           .p0 = p0,
                                           .valid_regime = niemeijer_valid(params, grid)},
                    .audit = std::nullopt};
    traj.px.reserve(grid.size());
    traj.py.reserve(grid.size());
    traj.pz.reserve(grid.size());
    for (double t : grid) {
        const Polarization3 p = niemeijer_solution(p0, params.h(), params.kappa(), t);
        traj.px.push_back(p.px);
        traj.py.push_back(p.py);
        traj.pz.push_back(p.pz);
    }
    return traj;
}

inline double regular_stage_pz(double p0z, double kappa, double t) {
    const double j = bessel_j0(kappa * t);
    return p0z * j * j;
}

inline double smoothed_envelope(double p0z, double kappa, double t) {
    if (!(t > 0.0)) throw ConfigError("smoothed_envelope: t must be > 0");
    return p0z / (std::numbers::pi * kappa * t);
}

inline double long_time_average(double p0z, int N) {
    if (N < 2 || N % 2 != 0) throw ConfigError("long_time_average: N must be even and >= 2");
    return 2.0 * p0z / N;
}

}  // namespace xychain
