// cli_app.hpp — command-line front end: spectrum, evolve, oracle, compare, analyze, scan
//
// Exit codes: 0 success, 2 bad configuration, 3 size cap exceeded,
// 4 analysis or comparison failure, 1 anything else.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xychain/xychain.hpp"

namespace xychain::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigExit = 2, kCapExit = 3, kAnalysisExit = 4 };

inline constexpr double kCompareTolerance = 1e-9;

struct RunConfig {
    std::string command;
    std::vector<int> N;
    double kappa{1.0};
    std::vector<double> gamma{0.0};
    std::vector<double> h{5.0};
    Polarization3 p0{0.0, 0.0, 1.0};
    std::optional<double> tmax;
    std::optional<std::size_t> points;
    std::vector<double> times;
    std::string method;
    std::string out{"-"};
    std::string format{"auto"};
    std::uint64_t seed{1};
    unsigned jobs{1};
    double delta{0.02};
    std::optional<int> cap;
    std::string bath;
    bool permissive{false};
    std::string input;
    std::vector<std::string> reports;
};

// Raw text of the list-valued flags.
struct RawLists {
    std::string N;
    std::optional<std::string> gamma, h, times;
};

template <class T>
std::vector<T> parse_list(const std::string& flag, const std::string& text) {
    std::vector<T> out;
    for (const auto& cell : io::split(text, ',')) {
        const double v = [&] {
            try {
                return io::parse_double(cell);
            } catch (const ConfigError&) {
                throw ConfigError(flag + ": '" + cell + "' is not a number");
            }
        }();
        if constexpr (std::is_integral_v<T>) {
            if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(flag + ": '" + cell + "' is not an integer");
        }
        out.push_back(static_cast<T>(v));
    }
    if (out.empty()) throw ConfigError(flag + ": empty list");
    return out;
}

inline void apply_lists(RunConfig& c, const RawLists& raw) {
    c.N = parse_list<int>("--N", raw.N);
    if (raw.gamma) c.gamma = parse_list<double>("--gamma", *raw.gamma);
    if (raw.h) c.h = parse_list<double>("--h", *raw.h);
    if (raw.times) c.times = parse_list<double>("--times", *raw.times);
}

// ---------------------------------------------------------------------------
// Helpers

inline Regime regime_of(const RunConfig& c) { return c.permissive ? Regime::Permissive : Regime::Strict; }

inline ChainParams single_params(const RunConfig& c) {
    if (c.N.size() != 1 || c.gamma.size() != 1 || c.h.size() != 1) {
        throw ConfigError(c.command + ": --N, --gamma and --h take a single value (lists are for scan)");
    }
    return ChainParams(c.N[0], c.kappa, c.gamma[0], c.h[0], regime_of(c));
}

inline Bath parse_bath(const std::string& s, Bath fallback) {
    if (s.empty()) return fallback;
    if (s == "infinite") return Bath::InfiniteT;
    if (s == "zero") return Bath::ZeroT;
    throw ConfigError("--bath must be 'infinite' or 'zero'");
}

inline Method parse_method(const std::string& s) {
    if (s == "closed_form") return Method::ClosedForm;
    if (s == "niemeijer") return Method::Niemeijer;
    if (s == "ed_oracle") return Method::EdOracle;
    if (s == "config_sum") return Method::ConfigSum;
    throw ConfigError("unknown method '" + s + "'");
}

inline void check_tmax(const RunConfig& c) {
    if (c.tmax && !(std::isfinite(*c.tmax) && *c.tmax > 0.0)) throw ConfigError("--tmax must be > 0");
    if (c.points && *c.points == 0) throw ConfigError("--points must be >= 1");
}

// Explicit --times, or `points` samples on [0, tmax].
inline std::vector<double> make_grid(const RunConfig& c, double default_tmax, std::size_t default_points) {
    check_tmax(c);
    if (!c.times.empty()) {
        std::vector<double> g = c.times;
        check_time_grid(g);
        return g;
    }
    return uniform_grid(c.tmax.value_or(default_tmax), c.points.value_or(default_points));
}

// Enough samples that the step stays below pi/(8h).
inline std::size_t resolving_points(double tmax, double h) {
    const double need = std::ceil(tmax * 8.0 * std::abs(h) / std::numbers::pi) + 1.0;
    return static_cast<std::size_t>(std::max(1001.0, need));
}

inline std::string format_for(const RunConfig& c, const char* fallback) {
    const std::string f = c.format == "auto" ? fallback : c.format;
    if (f != "csv" && f != "json") throw ConfigError("--format must be csv or json");
    return f;
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json config_json(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["N"] = c.N;
    j["kappa"] = c.kappa;
    j["gamma"] = c.gamma;
    j["h"] = c.h;
    j["p0"] = {c.p0.px, c.p0.py, c.p0.pz};
    j["tmax"] = optional_json(c.tmax);
    j["points"] = c.points ? json(*c.points) : json(nullptr);
    j["times"] = c.times;
    j["method"] = c.method;
    j["format"] = c.format;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["delta"] = c.delta;
    j["cap"] = c.cap ? json(*c.cap) : json(nullptr);
    j["bath"] = c.bath;
    j["regime"] = c.permissive ? "permissive" : "strict";
    if (!c.input.empty()) j["input"] = c.input;
    return j;
}

inline io::Metadata metadata(const RunConfig& c) {
    auto list = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ';';
            if constexpr (std::is_integral_v<std::decay_t<decltype(v[i])>>) {
                s += std::to_string(v[i]);
            } else {
                s += io::format_double(v[i]);
            }
        }
        return s;
    };
    io::Metadata m{{"command", c.command},
                   {"N", list(c.N)},
                   {"kappa", io::format_double(c.kappa)},
                   {"gamma", list(c.gamma)},
                   {"h", list(c.h)},
                   {"p0x", io::format_double(c.p0.px)},
                   {"p0y", io::format_double(c.p0.py)},
                   {"p0z", io::format_double(c.p0.pz)},
                   {"regime", c.permissive ? "permissive" : "strict"}};
    if (c.tmax) m.emplace_back("tmax", io::format_double(*c.tmax));
    if (c.points) m.emplace_back("points", std::to_string(*c.points));
    if (!c.method.empty()) m.emplace_back("method", c.method);
    if (!c.bath.empty()) m.emplace_back("bath", c.bath);
    m.emplace_back("seed", std::to_string(c.seed));
    if (c.cap) m.emplace_back("cap", std::to_string(*c.cap));
    return m;
}

class Sink {
public:
    Sink(const std::string& path, std::ostream& stdout_stream) : path_(path), stdout_(stdout_stream) {}

    void write(const std::string& content) const {
        if (path_ == "-") {
            stdout_ << content;
            stdout_.flush();
            return;
        }
        std::ofstream f(path_, std::ios::binary);
        if (!f) throw ConfigError("cannot open output file '" + path_ + "'");
        f << content;
        if (!f) throw ConfigError("failed writing '" + path_ + "'");
    }

    // Writes <out>.json next to a file output; nothing for stdout.
    void sidecar(const json& j) const {
        if (path_ == "-") return;
        Sink(path_ + ".json", stdout_).write(j.dump(2) + "\n");
    }

private:
    std::string path_;
    std::ostream& stdout_;
};

inline std::string trajectory_csv(const RunConfig& c, const Trajectory& tr, bool audit) {
    io::Table t;
    t.columns = {"t"};
    if (tr.has_transverse()) t.columns.insert(t.columns.end(), {"px", "py"});
    t.columns.push_back("pz");
    if (audit) t.columns.insert(t.columns.end(), {"energy", "purity", "parity"});
    for (std::size_t i = 0; i < tr.size(); ++i) {
        std::vector<double> row{tr.grid[i]};
        if (tr.has_transverse()) row.insert(row.end(), {tr.px[i], tr.py[i]});
        row.push_back(tr.pz[i]);
        if (audit) row.insert(row.end(), {tr.audit->energy[i], tr.audit->purity[i], tr.audit->parity[i]});
        t.rows.push_back(std::move(row));
    }
    io::Metadata m = metadata(c);
    m.emplace_back("valid_regime", tr.meta.valid_regime ? "true" : "false");
    std::ostringstream os;
    io::write_csv(os, m, t);
    return os.str();
}

inline json trajectory_json(const RunConfig& c, const Trajectory& tr, const json& extra) {
    json j;
    j["version"] = io::kVersionString;
    j["config"] = config_json(c);
    j["method"] = to_string(tr.meta.method);
    j["bath"] = to_string(tr.meta.bath);
    j["valid_regime"] = tr.meta.valid_regime;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    j["t"] = tr.grid;
    if (tr.has_transverse()) {
        j["px"] = tr.px;
        j["py"] = tr.py;
    }
    j["pz"] = tr.pz;
    if (tr.audit) {
        j["energy"] = tr.audit->energy;
        j["purity"] = tr.audit->purity;
        j["parity"] = tr.audit->parity;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Report serialization

inline json to_json(const TimescaleReport& r) {
    return {{"tau_dec", r.tau_dec}, {"tau_th", r.tau_th}, {"ratio", r.ratio}, {"target", r.target}};
}

inline json to_json(const StageReport& r) {
    json rev = json::array();
    for (const auto& v : r.revivals) rev.push_back({{"time", v.time}, {"peak", v.peak}, {"prominence", v.prominence}});
    return {{"t_regular_end", optional_json(r.t_regular_end)},
            {"revivals", rev},
            {"chaotic_onset", optional_json(r.chaotic_onset)}};
}

inline json to_json(const QuietColdReport& r) {
    return {{"window", {r.t_lo, r.t_hi}},
            {"mean_pz_in_window", r.mean_pz_in_window},
            {"long_time_avg", r.long_time_avg},
            {"is_cold", r.is_cold},
            {"oscillation_amplitude", r.oscillation_amplitude},
            {"pre_window_amplitude", r.pre_window_amplitude},
            {"smoothed_below_average", r.smoothed_below_average}};
}

// key,value rows for reports requested as CSV.
inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), out);
    } else if (j.is_number_float()) {
        out.emplace_back(prefix, io::format_double(j.get<double>()));
    } else if (j.is_string()) {
        out.emplace_back(prefix, j.get<std::string>());
    } else {
        out.emplace_back(prefix, j.dump());
    }
}

inline std::string report_csv(const RunConfig& c, const json& report) {
    std::vector<std::pair<std::string, std::string>> kv;
    flatten(report, "", kv);
    std::ostringstream os;
    io::write_metadata(os, metadata(c));
    os << "key,value\n";
    for (const auto& [k, v] : kv) os << k << ',' << v << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_spectrum(const RunConfig& c, const Sink& sink) {
    const ChainParams p = single_params(c);
    const auto [odd, even] = build_sectors(p);
    const SpectralTable tables[2] = {SpectralTable(p, odd), SpectralTable(p, even)};
    if (format_for(c, "csv") == "json") {
        json j;
        j["version"] = io::kVersionString;
        j["config"] = config_json(c);
        json modes = json::array();
        for (const auto& tab : tables) {
            for (const auto& m : tab.modes()) {
                modes.push_back({{"q2", m.q.twice}, {"sector", to_string(tab.parity())}, {"epsilon", m.epsilon},
                                 {"Gamma", m.Gamma}, {"E", m.E}, {"theta", m.theta}});
            }
        }
        j["modes"] = modes;
        j["degenerate"] = tables[0].degenerate() || tables[1].degenerate();
        sink.write(j.dump(2) + "\n");
        return kOk;
    }
    std::ostringstream os;
    io::write_metadata(os, metadata(c));
    os << "q2,sector,epsilon,Gamma,E,theta\n";
    for (const auto& tab : tables) {
        for (const auto& m : tab.modes()) {
            os << m.q.twice << ',' << to_string(tab.parity()) << ',' << io::format_double(m.epsilon) << ','
               << io::format_double(m.Gamma) << ',' << io::format_double(m.E) << ',' << io::format_double(m.theta)
               << '\n';
        }
    }
    sink.write(os.str());
    return kOk;
}

inline int cmd_evolve(RunConfig c, const Sink& sink) {
    if (c.method.empty()) c.method = "closed_form";
    const Method method = parse_method(c.method);
    if (method != Method::ClosedForm && method != Method::Niemeijer) {
        throw ConfigError("evolve supports --method closed_form or niemeijer (use oracle for ed_oracle)");
    }
    const ChainParams p = single_params(c);
    const std::vector<double> grid = make_grid(c, 4.0 * p.N() / p.kappa(), 1001);
    check_polarization(c.p0, "evolve");

    json warnings = json::array();
    Trajectory tr = [&] {
        if (method == Method::ClosedForm) {
            if (parse_bath(c.bath, Bath::InfiniteT) != Bath::InfiniteT) {
                throw ConfigError("closed_form describes the infinite-temperature bath only");
            }
            if (c.p0.px != 0.0 || c.p0.py != 0.0) warnings.push_back("closed_form tracks pz only; p0x, p0y ignored");
            if (!p.weak_coupling()) warnings.push_back("h <= kappa: outside the weak-coupling regime");
            return pz_trajectory(p, c.p0.pz, grid);
        }
        if (parse_bath(c.bath, Bath::ZeroT) != Bath::ZeroT) throw ConfigError("niemeijer describes the zero-temperature bath only");
        if (p.gamma() != 0.0) warnings.push_back("niemeijer law assumes gamma = 0");
        if (p.h() < kNiemeijerFieldRatio * p.kappa()) warnings.push_back("niemeijer law assumes h >> kappa");
        if (grid.back() >= p.N() / p.kappa()) warnings.push_back("niemeijer law holds only for t < N/kappa");
        return niemeijer_trajectory(p, c.p0, grid);
    }();

    const json extra = {{"warnings", warnings}};
    if (format_for(c, "csv") == "json") {
        sink.write(trajectory_json(c, tr, extra).dump(2) + "\n");
        return kOk;
    }
    sink.write(trajectory_csv(c, tr, false));
    json side;
    side["version"] = io::kVersionString;
    side["config"] = config_json(c);
    side["method"] = to_string(tr.meta.method);
    side["bath"] = to_string(tr.meta.bath);
    side["valid_regime"] = tr.meta.valid_regime;
    side["warnings"] = warnings;
    sink.sidecar(side);
    return kOk;
}

inline int cmd_oracle(RunConfig c, const Sink& sink) {
    c.method = "ed_oracle";
    const ChainParams p = single_params(c);
    const int cap = c.cap.value_or(ed::kDefaultCap);
    ed::check_cap("oracle", p.N(), cap);
    const std::vector<double> grid = make_grid(c, 4.0 * p.N() / p.kappa(), 401);
    const Bath bath = parse_bath(c.bath, Bath::InfiniteT);
    const Trajectory tr = ed::oracle_trajectory(p, bath, c.p0, grid, cap);
    if (format_for(c, "csv") == "json") {
        sink.write(trajectory_json(c, tr, json::object()).dump(2) + "\n");
        return kOk;
    }
    sink.write(trajectory_csv(c, tr, true));
    return kOk;
}

inline std::vector<double> random_times(std::uint64_t seed, std::size_t count, double tmax) {
    std::mt19937_64 gen(seed);
    std::vector<double> t;
    t.reserve(count);
    for (std::size_t i = 0; i < count; ++i) t.push_back(static_cast<double>(gen() >> 11) * 0x1.0p-53 * tmax);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

inline int cmd_compare(RunConfig c, const Sink& sink) {
    const ChainParams p = single_params(c);
    check_tmax(c);
    if (!(std::abs(c.p0.pz) <= 1.0)) throw ConfigError("compare: |p0z| must not exceed 1");
    std::vector<double> times = c.times;
    if (times.empty()) {
        times = random_times(c.seed, c.points.value_or(20), c.tmax.value_or(4.0 * p.N() / p.kappa()));
    } else {
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
    }
    check_time_grid(times);
    const int ed_cap = c.cap.value_or(ed::kDefaultCap);
    if (ed_cap > ed::kHardCap) throw CapExceeded("compare: requested ED cap above hard cap", ed_cap, ed::kHardCap);

    std::map<std::string, std::optional<std::vector<double>>> runs;
    std::map<std::string, std::string> skipped;
    runs["closed_form"] = pz_trajectory(p, c.p0.pz, times).pz;
    if (p.N() <= kConfigSumDefaultCap) {
        std::vector<double> v;
        for (double t : times) v.push_back(pz_config_sum(p, c.p0.pz, t));
        runs["config_sum"] = v;
    } else {
        skipped["config_sum"] = "N=" + std::to_string(p.N()) + " exceeds cap " + std::to_string(kConfigSumDefaultCap);
    }
    if (p.N() <= ed_cap) {
        runs["ed_oracle"] = ed::oracle_trajectory(p, Bath::InfiniteT, {0.0, 0.0, c.p0.pz}, times, ed_cap).pz;
    } else {
        skipped["ed_oracle"] = "N=" + std::to_string(p.N()) + " exceeds cap " + std::to_string(ed_cap);
    }

    const std::pair<const char*, const char*> pairs[] = {
        {"closed_form", "ed_oracle"}, {"closed_form", "config_sum"}, {"config_sum", "ed_oracle"}};
    json report;
    report["version"] = io::kVersionString;
    report["config"] = config_json(c);
    report["times"] = times;
    report["tolerance"] = kCompareTolerance;
    json rows = json::array();
    bool all_pass = true;
    for (const auto& [a, b] : pairs) {
        json row = {{"pair", std::string(a) + "-" + b}};
        if (!runs[a] || !runs[b]) {
            row["status"] = "skipped";
            row["max_deviation"] = nullptr;
            row["reason"] = skipped.count(a) ? skipped[a] : skipped[b];
        } else {
            double worst = 0.0;
            for (std::size_t i = 0; i < times.size(); ++i) worst = std::max(worst, std::abs((*runs[a])[i] - (*runs[b])[i]));
            const bool pass = worst < kCompareTolerance;
            all_pass = all_pass && pass;
            row["status"] = pass ? "pass" : "fail";
            row["max_deviation"] = worst;
        }
        rows.push_back(row);
    }
    report["pairs"] = rows;
    report["all_pass"] = all_pass;

    if (format_for(c, "json") == "json") {
        sink.write(report.dump(2) + "\n");
    } else {
        std::ostringstream os;
        io::write_metadata(os, metadata(c));
        os << "pair,status,max_deviation\n";
        for (const auto& r : rows) {
            os << r["pair"].get<std::string>() << ',' << r["status"].get<std::string>() << ','
               << (r["max_deviation"].is_null() ? std::string("nan") : io::format_double(r["max_deviation"].get<double>()))
               << '\n';
        }
        sink.write(os.str());
    }
    return all_pass ? kOk : kAnalysisExit;
}

// Trajectory for analyze: read from --input or generated with --method.
inline Trajectory analysis_source(RunConfig& c, const ChainParams& p) {
    if (!c.input.empty()) {
        std::ifstream f(c.input);
        if (!f) throw ConfigError("cannot open input '" + c.input + "'");
        std::map<std::string, std::string> meta;
        const io::Table table = io::read_csv(f, &meta);
        std::string bath_name = c.bath;
        if (bath_name.empty() && meta.count("bath")) bath_name = meta["bath"];
        if (bath_name.empty() && meta.count("method") && meta["method"] == "niemeijer") bath_name = "zero";
        Trajectory tr{.grid = table.values("t"),
                      .px = {},
                      .py = {},
                      .pz = table.values("pz"),
                      .meta = TrajectoryMeta{.params = p,
                                             .method = meta.count("method") ? parse_method(meta["method"]) : Method::ClosedForm,
                                             .bath = parse_bath(bath_name, Bath::InfiniteT),
                                             .p0 = c.p0,
                                             .valid_regime = true},
                      .audit = std::nullopt};
        const bool has_x = std::find(table.columns.begin(), table.columns.end(), "px") != table.columns.end();
        if (has_x) {
            tr.px = table.values("px");
            tr.py = table.values("py");
        }
        tr.validate();
        return tr;
    }
    if (c.method.empty()) c.method = "closed_form";
    const Method m = parse_method(c.method);
    switch (m) {
        case Method::ClosedForm: {
            const double tmax = c.tmax.value_or(12.0 * p.N() / p.kappa());
            const auto grid = make_grid(c, tmax, resolving_points(tmax, p.h()));
            return pz_trajectory(p, c.p0.pz, grid);
        }
        case Method::Niemeijer:
            return niemeijer_trajectory(p, c.p0, make_grid(c, 6.0 / p.kappa(), 601));
        case Method::EdOracle: {
            const int cap = c.cap.value_or(ed::kDefaultCap);
            return ed::oracle_trajectory(p, parse_bath(c.bath, Bath::ZeroT), c.p0, make_grid(c, 6.0 / p.kappa(), 601), cap);
        }
        case Method::ConfigSum: break;
    }
    throw ConfigError("analyze supports --method closed_form, niemeijer or ed_oracle");
}

inline int cmd_analyze(RunConfig c, const Sink& sink) {
    const ChainParams p = single_params(c);
    check_tmax(c);
    const Trajectory tr = analysis_source(c, p);

    std::vector<std::string> wanted = c.reports;
    if (wanted.empty() || (wanted.size() == 1 && wanted[0] == "auto")) {
        wanted.clear();
        const double end = tr.grid.empty() ? 0.0 : tr.grid.back();
        if (tr.has_transverse()) wanted.push_back("timescales");
        if (end > 3.0 * p.N() / p.kappa()) wanted.push_back("stages");
        if (end >= 10.0 * p.N() / p.kappa()) wanted.push_back("quiet_cold");
        if (wanted.empty()) throw AnalysisError("analyze: trajectory too short for any report");
    }

    json report;
    report["version"] = io::kVersionString;
    report["config"] = config_json(c);
    report["samples"] = tr.size();
    for (const auto& w : wanted) {
        if (w == "timescales") {
            report["timescales"] = to_json(timescales(tr));
        } else if (w == "stages") {
            StageOptions opt;
            opt.delta_frac = c.delta;
            report["stages"] = to_json(detect_stages(tr, p, c.p0.pz, opt));
        } else if (w == "quiet_cold") {
            report["quiet_cold"] = to_json(quiet_cold(tr, p, c.p0.pz));
        } else {
            throw ConfigError("unknown report '" + w + "' (timescales, stages, quiet_cold, auto)");
        }
    }
    sink.write(format_for(c, "json") == "json" ? report.dump(2) + "\n" : report_csv(c, report));
    return kOk;
}

inline int cmd_scan(const RunConfig& c, const Sink& sink) {
    if (c.N.empty() || c.gamma.empty() || c.h.empty()) throw ConfigError("scan: empty parameter grid");
    check_tmax(c);
    if (!c.times.empty()) throw ConfigError("scan: --times is not supported; use --tmax/--points");
    std::vector<ChainParams> pts;
    for (int n : c.N) {
        for (double g : c.gamma) {
            for (double h : c.h) pts.emplace_back(n, c.kappa, g, h, regime_of(c));
        }
    }
    struct Row {
        int N;
        double gamma, h;
        OscillationMetrics late;
        std::optional<double> t_regular_end;
    };
    StageOptions opt;
    opt.delta_frac = c.delta;
    std::vector<Row> rows = parallel_map(pts.size(), c.jobs, [&](std::size_t k) {
        const ChainParams& p = pts[k];
        const double tmax = c.tmax.value_or(4.0 * p.N() / p.kappa());
        const auto grid = uniform_grid(tmax, c.points.value_or(resolving_points(tmax, p.h())));
        const Trajectory tr = pz_trajectory(p, c.p0.pz, grid);
        return Row{p.N(), p.gamma(), p.h(), late_time_metrics(grid, tr.pz, p.N() / p.kappa()),
                   detect_stages(tr, p, c.p0.pz, opt).t_regular_end};
    });
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.N != b.N) return a.N < b.N;
        return a.gamma != b.gamma ? a.gamma < b.gamma : a.h < b.h;
    });

    if (format_for(c, "csv") == "json") {
        json j;
        j["version"] = io::kVersionString;
        j["config"] = config_json(c);
        json arr = json::array();
        for (const auto& r : rows) {
            arr.push_back({{"N", r.N}, {"gamma", r.gamma}, {"h", r.h}, {"rms", r.late.rms},
                           {"peak_to_peak", r.late.peak_to_peak}, {"late_mean", r.late.mean},
                           {"t_regular_end", optional_json(r.t_regular_end)}});
        }
        j["rows"] = arr;
        sink.write(j.dump(2) + "\n");
        return kOk;
    }
    io::Table t;
    t.columns = {"N", "gamma", "h", "rms", "peak_to_peak", "late_mean", "t_regular_end"};
    for (const auto& r : rows) {
        t.rows.push_back({static_cast<double>(r.N), r.gamma, r.h, r.late.rms, r.late.peak_to_peak, r.late.mean,
                          r.t_regular_end.value_or(std::numeric_limits<double>::quiet_NaN())});
    }
    std::ostringstream os;
    io::write_csv(os, metadata(c), t);
    sink.write(os.str());
    return kOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline void add_common(CLI::App* sub, RunConfig& c, RawLists& raw) {
    sub->add_option("--N", raw.N, "chain length (comma-separated list for scan)")->required();
    sub->add_option("--kappa", c.kappa, "coupling constant")->capture_default_str();
    sub->add_option("--gamma", raw.gamma, "anisotropy in [0, 1], default 0 (list for scan)");
    sub->add_option("--h", raw.h, "magnetic field, default 5 (list for scan)");
    sub->add_option("--p0x", c.p0.px, "initial polarization, x")->capture_default_str();
    sub->add_option("--p0y", c.p0.py, "initial polarization, y")->capture_default_str();
    sub->add_option("--p0z", c.p0.pz, "initial polarization, z")->capture_default_str();
    sub->add_option("--tmax", c.tmax, "final time");
    sub->add_option("--points", c.points, "number of samples on [0, tmax]");
    sub->add_option("--times", raw.times, "explicit comma-separated sample times");
    sub->add_option("--method", c.method, "closed_form | niemeijer | ed_oracle");
    sub->add_option("--out", c.out, "output path, '-' for stdout")->capture_default_str();
    sub->add_option("--format", c.format, "csv | json (auto picks per command)")->capture_default_str();
    sub->add_option("--seed", c.seed, "seed for random sample times")->capture_default_str();
    sub->add_option("--jobs", c.jobs, "worker threads for scans")->capture_default_str();
    sub->add_option("--delta", c.delta, "regular-stage deviation threshold, fraction of |p0z|")->capture_default_str();
    sub->add_option("--cap", c.cap, "size cap for the dense oracle");
    sub->add_option("--bath", c.bath, "infinite | zero");
    sub->add_flag("--permissive", c.permissive, "allow h <= kappa");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    RunConfig c;
    RawLists raw;
    CLI::App app{"Reduced dynamics of a spin coupled to a periodic XY chain", "xychain"};
    app.set_help_flag("--help", "print help and exit");
    app.set_version_flag("--version", io::kVersionString);
    app.require_subcommand(1);

    struct Entry {
        const char* name;
        const char* help;
    };
    const Entry entries[] = {
        {"spectrum", "per-sector single-fermion spectrum"},
        {"evolve", "closed-form or Niemeijer trajectory"},
        {"oracle", "dense exact-diagonalization trajectory"},
        {"compare", "closed form vs configuration sum vs dense oracle"},
        {"analyze", "timescale, stage and quiet-cold reports"},
        {"scan", "late-time oscillations and regular-stage length over a parameter grid"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& e : entries) {
        CLI::App* s = app.add_subcommand(e.name, e.help);
        add_common(s, c, raw);
        subs.push_back(s);
    }
    subs[4]->add_option("--input", c.input, "CSV trajectory to analyze instead of generating one");
    subs[4]->add_option("--report", c.reports, "timescales | stages | quiet_cold | auto")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigExit;
    }

    try {
        apply_lists(c, raw);
        const Sink sink(c.out, out);
        for (CLI::App* s : subs) {
            if (!s->parsed()) continue;
            c.command = s->get_name();
            if (c.command == "spectrum") return cmd_spectrum(c, sink);
            if (c.command == "evolve") return cmd_evolve(c, sink);
            if (c.command == "oracle") return cmd_oracle(c, sink);
            if (c.command == "compare") return cmd_compare(c, sink);
            if (c.command == "analyze") return cmd_analyze(c, sink);
            if (c.command == "scan") return cmd_scan(c, sink);
        }
        return kFailure;
    } catch (const CapExceeded& e) {
        err << "error: " << e.what() << '\n';
        return kCapExit;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigExit;
    } catch (const AnalysisError& e) {
        err << "analysis failed: " << e.what() << '\n';
        return kAnalysisExit;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace xychain::cli
