// chain_model.hpp — XY ring parameters, momentum grids and quasiparticle spectra
//
// Momenta are stored as exact "twice the value" integers: the odd-parity grid
// holds integers {-N/2+1, ..., N/2}, the even-parity grid half-integers
// {-N/2+1/2, ..., N/2-1/2}. The angle 2*pi*q/N = pi*q2/N is only formed at
// evaluation time, with exact quadrant reduction.

#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "xychain/error.hpp"

namespace xychain {

enum class Regime {
    Strict,      // requires h > kappa
    Permissive,  // allows h <= kappa, clears the weak-coupling flag
};

class ChainParams {
public:
    ChainParams(int N, double kappa, double gamma, double h, Regime regime = Regime::Strict)
        : N_(N), kappa_(kappa), gamma_(gamma), h_(h), regime_(regime) {
        if (N < 2 || N % 2 != 0) {
            throw ConfigError("ChainParams: N must be an even integer >= 2, got " + std::to_string(N));
        }
        if (N > (1 << 24)) throw ConfigError("ChainParams: N too large");
        if (!std::isfinite(kappa) || kappa <= 0.0) throw ConfigError("ChainParams: kappa must be finite and > 0");
        if (!std::isfinite(gamma) || gamma < 0.0 || gamma > 1.0) {
            throw ConfigError("ChainParams: gamma must lie in [0, 1]");
        }
        if (!std::isfinite(h)) throw ConfigError("ChainParams: h must be finite");
        if (regime == Regime::Strict && !(h > kappa)) {
            throw ConfigError("ChainParams: strict regime requires h > kappa (use permissive mode to explore h <= kappa)");
        }
    }

    int N() const noexcept { return N_; }
    double kappa() const noexcept { return kappa_; }
    double gamma() const noexcept { return gamma_; }
    double h() const noexcept { return h_; }
    Regime regime() const noexcept { return regime_; }

    // h > kappa: the regime in which both definitions of cos(theta_q) agree.
    bool weak_coupling() const noexcept { return h_ > kappa_; }

    bool operator==(const ChainParams&) const = default;

private:
    int N_;
    double kappa_;
    double gamma_;
    double h_;
    Regime regime_;
};

enum class Parity { Odd, Even };

inline const char* to_string(Parity p) { return p == Parity::Odd ? "odd" : "even"; }

// A lattice momentum q stored as the integer 2q.
struct Momentum {
    int twice{0};

    constexpr double value() const noexcept { return 0.5 * twice; }
    constexpr Momentum operator-() const noexcept { return Momentum{-twice}; }
    constexpr auto operator<=>(const Momentum&) const = default;
};

inline std::string to_string(Momentum q) {
    if (q.twice % 2 == 0) return std::to_string(q.twice / 2);
    return std::to_string(q.twice) + "/2";
}

// cos and sin of pi*num/den with exact quadrant reduction, so quarter turns give exact 0 and +-1.
inline std::pair<double, double> unit_circle(long long num, long long den) {
    const long long period = 2 * den;
    long long r = num % period;
    if (r < 0) r += period;
    const long long quadrant = (2 * r) / den;       // 0..3
    const long long rem = 2 * r - quadrant * den;   // angle within quadrant, units of pi/(2 den)
    const double unit = std::numbers::pi / static_cast<double>(2 * den);
    double c0 = 0.0;
    double s0 = 0.0;
    if (2 * rem <= den) {
        c0 = std::cos(unit * static_cast<double>(rem));
        s0 = std::sin(unit * static_cast<double>(rem));
    } else {
        c0 = std::sin(unit * static_cast<double>(den - rem));
        s0 = std::cos(unit * static_cast<double>(den - rem));
    }
    switch (quadrant) {
        case 0: return {c0, s0};
        case 1: return {-s0, c0};
        case 2: return {-c0, -s0};
        default: return {s0, -c0};
    }
}

struct MomentumSector {
    Parity parity{Parity::Odd};
    int N{0};
    std::vector<Momentum> momenta;  // strictly increasing, size N

    std::size_t size() const noexcept { return momenta.size(); }

    bool contains(Momentum q) const noexcept { return index_of(q) < momenta.size(); }

    // Position of q in the grid, or size() if absent.
    std::size_t index_of(Momentum q) const noexcept {
        // Consecutive grid points differ by 2 in the twice-representation.
        const int first = momenta.empty() ? 0 : momenta.front().twice;
        const int offset = q.twice - first;
        if (offset < 0 || offset % 2 != 0) return momenta.size();
        const auto idx = static_cast<std::size_t>(offset / 2);
        return idx < momenta.size() ? idx : momenta.size();
    }
};

inline MomentumSector make_sector(int N, Parity parity) {
    MomentumSector s;
    s.parity = parity;
    s.N = N;
    s.momenta.reserve(static_cast<std::size_t>(N));
    const int first = parity == Parity::Odd ? -N + 2 : -N + 1;
    for (int k = 0; k < N; ++k) s.momenta.push_back(Momentum{first + 2 * k});
    return s;
}

// Returns (odd, even).
inline std::pair<MomentumSector, MomentumSector> build_sectors(const ChainParams& params) {
    return {make_sector(params.N(), Parity::Odd), make_sector(params.N(), Parity::Even)};
}

struct ModeData {
    Momentum q;
    double epsilon{0.0};  // h - kappa cos(2 pi q / N)
    double Gamma{0.0};    // gamma kappa sin(2 pi q / N)
    double E{0.0};        // sqrt(epsilon^2 + Gamma^2)
    double theta{0.0};    // Bogolyubov angle
};

class SpectralTable {
public:
    SpectralTable(const ChainParams& params, MomentumSector sector)
        : params_(params), sector_(std::move(sector)) {
        if (sector_.N != params.N()) throw ConfigError("spectral_table: sector built for a different N");
        modes_.reserve(sector_.size());
        const bool permissive = !params.weak_coupling();
        for (Momentum q : sector_.momenta) {
            const auto [c, s] = unit_circle(q.twice, params.N());
            ModeData m;
            m.q = q;
            m.epsilon = params.h() - params.kappa() * c;
            m.Gamma = params.gamma() * params.kappa() * s;
            m.E = std::hypot(m.epsilon, m.Gamma);
            if (m.E == 0.0) {
                degenerate_ = true;
                m.theta = 0.0;
            } else if (!permissive) {
                m.theta = -std::asin(m.Gamma / m.E);
            } else {
                double th = std::atan2(-m.Gamma, m.epsilon);
                if (th > std::numbers::pi / 2) th -= std::numbers::pi;
                if (th < -std::numbers::pi / 2) th += std::numbers::pi;
                m.theta = th;
            }
            modes_.push_back(m);
        }
        permissive_ = permissive;
    }

    const ChainParams& params() const noexcept { return params_; }
    const MomentumSector& sector() const noexcept { return sector_; }
    Parity parity() const noexcept { return sector_.parity; }
    int N() const noexcept { return sector_.N; }
    std::size_t size() const noexcept { return modes_.size(); }

    const std::vector<ModeData>& modes() const noexcept { return modes_; }
    const ModeData& operator[](std::size_t i) const { return modes_[i]; }

    const ModeData& mode(Momentum q) const {
        const std::size_t i = sector_.index_of(q);
        if (i >= modes_.size()) {
            throw ConfigError("momentum " + to_string(q) + " is not in the " + to_string(parity()) + " sector");
        }
        return modes_[i];
    }

    // Some E_q vanished; theta_q was set to 0 there.
    bool degenerate() const noexcept { return degenerate_; }
    // Angles came from the h <= kappa branch and are not covered by the closed-form guarantees.
    bool permissive() const noexcept { return permissive_; }

    double energy_sum() const {
        double s = 0.0;
        for (const auto& m : modes_) s += m.E;
        return s;
    }

private:
    ChainParams params_;
    MomentumSector sector_;
    std::vector<ModeData> modes_;
    bool degenerate_{false};
    bool permissive_{false};
};

inline SpectralTable spectral_table(const ChainParams& params, const MomentumSector& sector) {
    return SpectralTable(params, sector);
}

// cos(theta_q) = epsilon_q / E_q.
inline double cos_theta(const ModeData& m) {
    if (m.E == 0.0) throw DegenerateAngle("cos_theta: E_q = 0 at q = " + to_string(m.q));
    return m.epsilon / m.E;
}

inline double cos_theta(const SpectralTable& table, Momentum q) { return cos_theta(table.mode(q)); }

}  // namespace xychain
