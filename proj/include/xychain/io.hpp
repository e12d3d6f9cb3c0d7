// io.hpp — round-trip CSV for trajectories and tables
//
// Floats are written with 17 significant digits. Lines starting with '#' are
// metadata and are skipped on input; the first other line is the column header.

#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xychain/error.hpp"

namespace xychain::io {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kVersionString = "xychain 1.0.0";

inline std::string format_double(double x) {
    if (x == 0.0) x = 0.0;  // no "-0"
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    // Index of a named column; throws ConfigError when absent.
    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw ConfigError("csv: missing column '" + name + "'");
    }

    std::vector<double> values(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

inline void write_metadata(std::ostream& os, const Metadata& meta) {
    os << "# " << kVersionString << '\n';
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
}

inline void write_csv(std::ostream& os, const Metadata& meta, const Table& table) {
    write_metadata(os, meta);
    for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
    os << '\n';
    for (const auto& r : table.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
        os << '\n';
    }
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("csv: not a number: '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("csv: trailing characters in '" + s + "'");
    return v;
}

// Reads a numeric CSV; '#' lines are returned through meta as key=value pairs when present.
inline Table read_csv(std::istream& is, std::map<std::string, std::string>* meta = nullptr) {
    Table t;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (meta && eq != std::string::npos) {
                const std::size_t start = line.find_first_not_of("# ");
                (*meta)[line.substr(start, eq - start)] = line.substr(eq + 1);
            }
            continue;
        }
        if (!header) {
            t.columns = split(line, ',');
            header = true;
            continue;
        }
        const auto cells = split(line, ',');
        if (cells.size() != t.columns.size()) throw ConfigError("csv: row has " + std::to_string(cells.size()) + " cells");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    if (!header) throw ConfigError("csv: no header line");
    return t;
}

}  // namespace xychain::io
