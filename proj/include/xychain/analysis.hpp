// analysis.hpp — timescales, stage boundaries and the quiet-cold window from sampled trajectories
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "xychain/approximations.hpp"
#include "xychain/bessel.hpp"
#include "xychain/chain_model.hpp"
#include "xychain/error.hpp"
#include "xychain/exact_dynamics.hpp"
#include "xychain/trajectory.hpp"

namespace xychain {

// ---------------------------------------------------------------------------
// Envelopes and crossings

// env_i = max |x_j| over t_j in [t_i, t_i + width].
inline std::vector<double> forward_max_envelope(const std::vector<double>& grid, const std::vector<double>& x,
                                                double width) {
    const std::size_t n = grid.size();
    std::vector<double> env(n);
    std::vector<std::size_t> dq;  // monotone deque of indices, decreasing |x|
    std::size_t head = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (j < n && grid[j] <= grid[i] + width) {
            while (dq.size() > head && std::abs(x[dq.back()]) <= std::abs(x[j])) dq.pop_back();
            dq.push_back(j);
            ++j;
        }
        while (dq[head] < i) ++head;
        env[i] = std::abs(x[dq[head]]);
    }
    return env;
}

// First time env falls to level, linearly interpolated between neighbouring samples.
inline std::optional<double> first_crossing_below(const std::vector<double>& grid, const std::vector<double>& env,
                                                  double level) {
    for (std::size_t i = 0; i < env.size(); ++i) {
        if (env[i] <= level) {
            if (i == 0) return grid[0];
            const double f = (env[i - 1] - level) / (env[i - 1] - env[i]);
            return grid[i - 1] + f * (grid[i] - grid[i - 1]);
        }
    }
    return std::nullopt;
}

// Mean of x over [lo, hi] by the trapezoid rule on the samples falling inside.
inline double trapezoid_mean(const std::vector<double>& grid, const std::vector<double>& x, double lo, double hi) {
    double acc = 0.0;
    double span = 0.0;
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < lo || grid[i] > hi) continue;
        if (prev) {
            const double dt = grid[i] - grid[*prev];
            acc += 0.5 * (x[i] + x[*prev]) * dt;
            span += dt;
        }
        prev = i;
    }
    if (!prev) throw AnalysisError("trapezoid_mean: no samples in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return span > 0.0 ? acc / span : x[*prev];
}

// ---------------------------------------------------------------------------
// Decoherence vs thermalization

struct TimescaleReport {
    double tau_dec{0.0};  // transverse envelope at half its initial value
    double tau_th{0.0};   // |pz - target| envelope at half its initial value
    double ratio{0.0};    // tau_dec / tau_th
    double target{0.0};   // equilibrium value of pz
};

inline TimescaleReport timescales(const Trajectory& traj) {
    traj.validate();
    if (!traj.has_transverse()) throw AnalysisError("timescales: trajectory has no transverse components");
    const auto& p = traj.meta.params;
    if (traj.grid.empty() || traj.grid.back() < 5.0 / p.kappa()) {
        throw AnalysisError("timescales: trajectory must span at least 5/kappa");
    }
    const double width = p.h() != 0.0 ? 2.0 * std::numbers::pi / std::abs(p.h()) : 1.0 / p.kappa();

    TimescaleReport r;
    r.target = traj.meta.bath == Bath::ZeroT ? -1.0 : long_time_average(traj.meta.p0.pz, p.N());

    std::vector<double> perp(traj.size());
    std::vector<double> gap(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        perp[i] = std::hypot(traj.px[i], traj.py[i]);
        gap[i] = traj.pz[i] - r.target;
    }
    if (perp[0] == 0.0) throw AnalysisError("timescales: no initial transverse polarization");
    if (gap[0] == 0.0) throw AnalysisError("timescales: pz starts at its equilibrium value");

    const auto dec = first_crossing_below(traj.grid, forward_max_envelope(traj.grid, perp, width), 0.5 * perp[0]);
    if (!dec) throw AnalysisError("timescales: transverse polarization never decays below half");
    const auto th = first_crossing_below(traj.grid, forward_max_envelope(traj.grid, gap, width), 0.5 * std::abs(gap[0]));
    if (!th) throw AnalysisError("timescales: pz never relaxes halfway to equilibrium");
    r.tau_dec = *dec;
    r.tau_th = *th;
    if (!(r.tau_th > 0.0)) throw AnalysisError("timescales: degenerate thermalization time");
    r.ratio = r.tau_dec / r.tau_th;
    return r;
}

// J0(x) = level on the first descending branch, x in (0, first zero).
inline double bessel_j0_level_root(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("bessel_j0_level_root: level must lie in (0, 1)");
    double lo = 0.0;
    double hi = 2.404825557695773;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (bessel_j0(mid) > level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// tau_dec / tau_th of the Niemeijer law in units of 1/kappa: J0 = 1/2 against J0^2 = 1/2.
inline double niemeijer_timescale_ratio() {
    return bessel_j0_level_root(0.5) / bessel_j0_level_root(std::numbers::sqrt2 / 2.0);
}

// ---------------------------------------------------------------------------
// Stages

struct Revival {
    double time{0.0};
    double peak{0.0};  // |pz| at the maximum
    double prominence{0.0};
};

struct StageReport {
    std::optional<double> t_regular_end;
    std::vector<Revival> revivals;
    std::optional<double> chaotic_onset;
};

struct StageOptions {
    double delta_frac{0.02};            // delta = delta_frac |p0z|
    std::optional<double> sustain;      // default 1/kappa
    std::optional<double> prominence;   // default 4 |p0z| / N
};

struct Peak {
    std::size_t index;
    double value;
};

// Local maxima of |x|: strictly above the left neighbour, not below the right one.
inline std::vector<Peak> local_maxima_abs(const std::vector<double>& x) {
    std::vector<Peak> out;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        const double v = std::abs(x[i]);
        if (v > std::abs(x[i - 1]) && v >= std::abs(x[i + 1])) out.push_back({i, v});
    }
    return out;
}

// Topographic prominence of every interior local maximum of v (others get -1).
inline std::vector<double> prominences(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> out(n, -1.0);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (!(v[k] > v[k - 1] && v[k] >= v[k + 1])) continue;
        double left_min = v[k];
        for (std::size_t i = k; i-- > 0;) {
            if (v[i] > v[k]) break;
            left_min = std::min(left_min, v[i]);
        }
        double right_min = v[k];
        for (std::size_t i = k + 1; i < n; ++i) {
            if (v[i] > v[k]) break;
            right_min = std::min(right_min, v[i]);
        }
        out[k] = v[k] - std::max(left_min, right_min);
    }
    return out;
}

inline StageReport detect_stages(const Trajectory& traj, const ChainParams& params, double p0z,
                                 const StageOptions& opt = {}) {
    traj.validate();
    const auto& g = traj.grid;
    const double N = params.N();
    const double kappa = params.kappa();
    if (g.size() < 3 || !(g.back() > 3.0 * N / kappa)) throw AnalysisError("detect_stages: grid must extend past 3N/kappa");
    if (params.h() != 0.0) {
        const double limit = std::numbers::pi / (4.0 * std::abs(params.h()));
        for (std::size_t i = 1; i < g.size(); ++i) {
            if (g[i] - g[i - 1] > limit) throw AnalysisError("detect_stages: grid too coarse (step > pi/(4h))");
        }
    }
    if (p0z == 0.0) throw AnalysisError("detect_stages: p0z = 0 carries no signal");
    if (!(opt.delta_frac > 0.0)) throw ConfigError("detect_stages: delta must be > 0");
    const double delta = opt.delta_frac * std::abs(p0z);
    const double sustain = opt.sustain.value_or(1.0 / kappa);
    const double min_prominence = opt.prominence.value_or(4.0 * std::abs(p0z) / N);

    StageReport rep;

    // Regular stage: first t with |pz - p0z J0^2| > delta at every sample of [t, t + sustain].
    const std::size_t n = g.size();
    std::vector<std::size_t> next_ok(n + 1, n);
    for (std::size_t i = n; i-- > 0;) {
        const double dev = std::abs(traj.pz[i] - regular_stage_pz(p0z, kappa, g[i]));
        next_ok[i] = dev <= delta ? i : next_ok[i + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (next_ok[i] == i) continue;
        if (g[i] + sustain > g.back()) break;
        const bool held = next_ok[i] == n || g[next_ok[i]] > g[i] + sustain;
        if (held) {
            rep.t_regular_end = g[i];
            break;
        }
    }
    if (!rep.t_regular_end) return rep;

    // Revivals: prominent maxima of the |pz| peak sequence after the regular stage.
    const std::vector<Peak> peaks = local_maxima_abs(traj.pz);
    std::vector<double> heights(peaks.size());
    for (std::size_t k = 0; k < peaks.size(); ++k) heights[k] = peaks[k].value;
    const std::vector<double> prom = prominences(heights);
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        const double t = g[peaks[k].index];
        if (t > *rep.t_regular_end && prom[k] >= min_prominence) rep.revivals.push_back({t, peaks[k].value, prom[k]});
    }
    if (rep.revivals.empty()) return rep;

    // Chaotic onset: where the last strong revival has decayed to half its peak.
    const double strong = 0.5 * rep.revivals.front().peak;
    const Revival* last = &rep.revivals.front();
    for (const auto& r : rep.revivals) {
        if (r.peak >= strong) last = &r;
    }
    for (const auto& pk : peaks) {
        const double t = g[pk.index];
        if (t > last->time && pk.value < 0.5 * last->peak) {
            rep.chaotic_onset = t;
            break;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Quiet-cold window

struct QuietColdReport {
    double t_lo{0.0};
    double t_hi{0.0};
    double mean_pz_in_window{0.0};
    double long_time_avg{0.0};  // empirical mean over the final half of the trajectory
    bool is_cold{false};
    double oscillation_amplitude{0.0};  // max - min inside the window
    double pre_window_amplitude{0.0};   // max - min on [0, t_lo)
    bool smoothed_below_average{false}; // p0z/(pi kappa t) < 2 p0z/N across the window samples
};

inline QuietColdReport quiet_cold(const Trajectory& traj, const ChainParams& params, double p0z) {
    traj.validate();
    const auto& g = traj.grid;
    const double N = params.N();
    const double kappa = params.kappa();
    if (g.empty() || g.front() > N / (4.0 * std::numbers::pi * kappa) || g.back() < 3.0 * N / kappa) {
        throw AnalysisError("quiet_cold: trajectory must cover [N/(4 pi kappa), 3N/kappa]");
    }
    if (g.back() < 10.0 * N / kappa) throw AnalysisError("quiet_cold: insufficient tail (need t_max >= 10N/kappa)");

    QuietColdReport r;
    r.t_lo = N / (2.0 * std::numbers::pi * kappa);
    r.t_hi = 0.9 * N / kappa;
    r.mean_pz_in_window = trapezoid_mean(g, traj.pz, r.t_lo, r.t_hi);
    r.long_time_avg = trapezoid_mean(g, traj.pz, 0.5 * g.back(), g.back());
    r.is_cold = r.mean_pz_in_window < r.long_time_avg;

    double wmin = INFINITY, wmax = -INFINITY, pmin = INFINITY, pmax = -INFINITY;
    bool smoothed = true;
    const double avg = long_time_average(p0z, params.N());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] < r.t_lo) {
            pmin = std::min(pmin, traj.pz[i]);
            pmax = std::max(pmax, traj.pz[i]);
        } else if (g[i] <= r.t_hi) {
            wmin = std::min(wmin, traj.pz[i]);
            wmax = std::max(wmax, traj.pz[i]);
            if (!(smoothed_envelope(p0z, kappa, g[i]) < avg)) smoothed = false;
        }
    }
    r.oscillation_amplitude = wmax - wmin;
    r.pre_window_amplitude = pmax - pmin;
    r.smoothed_below_average = smoothed;
    return r;
}

// ---------------------------------------------------------------------------
// Late-time oscillations and the anisotropy/field scan

struct OscillationMetrics {
    double rms{0.0};           // standard deviation of pz about its late-time mean
    double peak_to_peak{0.0};
    double mean{0.0};
    std::size_t samples{0};
};

// Statistics of pz over samples with t > t_from.
inline OscillationMetrics late_time_metrics(const std::vector<double>& grid, const std::vector<double>& pz,
                                            double t_from) {
    OscillationMetrics m;
    double lo = INFINITY, hi = -INFINITY, sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] <= t_from) continue;
        sum += pz[i];
        lo = std::min(lo, pz[i]);
        hi = std::max(hi, pz[i]);
        ++m.samples;
    }
    if (m.samples == 0) throw AnalysisError("late_time_metrics: no samples after t = " + std::to_string(t_from));
    m.mean = sum / static_cast<double>(m.samples);
    double var = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] > t_from) var += (pz[i] - m.mean) * (pz[i] - m.mean);
    }
    m.rms = std::sqrt(var / static_cast<double>(m.samples));
    m.peak_to_peak = hi - lo;
    return m;
}

// Evaluates fn(0..count-1) on up to `jobs` threads; results come back in index order.
// The first exception thrown by any task is rethrown after all workers finish.
template <class Fn>
auto parallel_map(std::size_t count, unsigned jobs, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using R = decltype(fn(std::size_t{}));
    std::vector<std::optional<R>> slots(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < count; k = next++) {
            try {
                slots[k] = fn(k);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const auto n = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), std::max<std::size_t>(count, 1)));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < n; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<R> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

struct ScanRow {
    double gamma{0.0};
    double h{0.0};
    OscillationMetrics late;
};

struct ScanOptions {
    std::optional<double> t_max;  // default 4N/kappa
    std::size_t points{40001};
    unsigned jobs{1};
    Regime regime{Regime::Strict};
    double p0z{1.0};
};

// Closed-form pz for every (gamma, h), late-time metrics over (N/kappa, t_max].
// Rows are sorted by (gamma, h); worker count never changes the numbers.
inline std::vector<ScanRow> anisotropy_field_scan(int N, double kappa, const std::vector<double>& gammas,
                                                  const std::vector<double>& hs, const ScanOptions& opt = {}) {
    if (gammas.empty() || hs.empty()) throw ConfigError("anisotropy_field_scan: empty parameter grid");
    std::vector<ChainParams> points;
    for (double gm : gammas) {
        for (double h : hs) points.emplace_back(N, kappa, gm, h, opt.regime);
    }
    const double t_max = opt.t_max.value_or(4.0 * N / kappa);
    if (!(t_max > N / kappa)) throw ConfigError("anisotropy_field_scan: t_max must exceed N/kappa");
    const std::vector<double> grid = uniform_grid(t_max, opt.points);

    std::vector<ScanRow> rows = parallel_map(points.size(), opt.jobs, [&](std::size_t k) {
        const Trajectory tr = pz_trajectory(points[k], opt.p0z, grid);
        return ScanRow{points[k].gamma(), points[k].h(), late_time_metrics(grid, tr.pz, N / kappa)};
    });
    std::sort(rows.begin(), rows.end(), [](const ScanRow& a, const ScanRow& b) {
        return a.gamma != b.gamma ? a.gamma < b.gamma : a.h < b.h;
    });
    return rows;
}

}  // namespace xychain
