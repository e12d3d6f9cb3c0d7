// trajectory.hpp — polarization vectors and sampled time evolutions
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "xychain/chain_model.hpp"
#include "xychain/error.hpp"

namespace xychain {

// Bloch vector of the first spin, rho_S = (1 + p.sigma) / 2.
struct Polarization3 {
    double px{0.0};
    double py{0.0};
    double pz{0.0};

    double norm() const noexcept { return std::sqrt(px * px + py * py + pz * pz); }
    double transverse() const noexcept { return std::hypot(px, py); }
    bool operator==(const Polarization3&) const = default;
};

enum class Method { ClosedForm, Niemeijer, EdOracle, ConfigSum };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::ClosedForm: return "closed_form";
        case Method::Niemeijer: return "niemeijer";
        case Method::EdOracle: return "ed_oracle";
        case Method::ConfigSum: return "config_sum";
    }
    return "unknown";
}

// Initial state of the environment (sites 2..N).
enum class Bath {
    InfiniteT,  // 2^{-(N-1)} identity
    ZeroT,      // |down down ... down>
};

inline const char* to_string(Bath b) { return b == Bath::InfiniteT ? "infinite_t" : "zero_t"; }

struct TrajectoryMeta {
    ChainParams params;
    Method method{Method::ClosedForm};
    Bath bath{Bath::InfiniteT};
    Polarization3 p0;
    // False when the method is being used outside the regime where it is claimed to hold.
    bool valid_regime{true};
};

// Per-sample audit quantities recorded by the dense oracle.
struct OracleAudit {
    std::vector<double> energy;  // <H>
    std::vector<double> purity;  // tr rho^2 of the full state
    std::vector<double> parity;  // <Pi>
};

struct Trajectory {
    std::vector<double> grid;
    std::vector<double> px;  // empty for pz-only trajectories
    std::vector<double> py;
    std::vector<double> pz;
    TrajectoryMeta meta;
    std::optional<OracleAudit> audit;

    std::size_t size() const noexcept { return grid.size(); }
    bool has_transverse() const noexcept { return !px.empty(); }

    Polarization3 sample(std::size_t i) const {
        if (has_transverse()) return {px[i], py[i], pz[i]};
        return {0.0, 0.0, pz[i]};
    }

    // Throws ConfigError when the structural invariants do not hold.
    void validate() const {
        if (pz.size() != grid.size()) throw ConfigError("Trajectory: pz length differs from grid length");
        if (has_transverse() && (px.size() != grid.size() || py.size() != grid.size())) {
            throw ConfigError("Trajectory: transverse components differ from grid length");
        }
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (!(grid[i] > grid[i - 1])) throw ConfigError("Trajectory: grid must be strictly increasing");
        }
    }
};

// Throws unless times are finite, non-negative and strictly increasing.
inline void check_time_grid(const std::vector<double>& grid) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]) || grid[i] < 0.0) throw ConfigError("time grid must be finite and non-negative");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("time grid must be strictly increasing");
    }
}

// n points evenly spaced on [0, t_max]; a single point gives {0}.
inline std::vector<double> uniform_grid(double t_max, std::size_t n) {
    if (n == 0) throw ConfigError("uniform_grid: need at least one point");
    if (!std::isfinite(t_max) || t_max < 0.0) throw ConfigError("uniform_grid: t_max must be finite and >= 0");
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = 0.0;
        return g;
    }
    if (t_max == 0.0) throw ConfigError("uniform_grid: t_max must be > 0 for more than one point");
    const double step = t_max / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = step * static_cast<double>(i);
    g[n - 1] = t_max;
    return g;
}

inline void check_polarization(const Polarization3& p, const char* what) {
    if (!(p.norm() <= 1.0 + 1e-12)) throw ConfigError(std::string(what) + ": |p0| must not exceed 1");
}

}  // namespace xychain
