#pragma once

#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "asymptotics.hpp"
#include "designs.hpp"
#include "error.hpp"

namespace blockuniv::io {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text, std::string_view context) {
    const std::string s(trim(text));
    if (s.empty()) throw ParseError(std::string(context) + ": empty numeric field");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) {
        throw ParseError(std::string(context) + ": not a number: '" + s + "'");
    }
    return v;
}

template <class Int>
Int parse_integer(std::string_view text, std::string_view context) {
    const auto s = trim(text);
    Int v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ParseError(std::string(context) + ": not an integer: '" + std::string(s) + "'");
    }
    return v;
}

inline bool parse_bool(std::string_view text, std::string_view context) {
    const auto s = trim(text);
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ParseError(std::string(context) + ": not a boolean: '" + std::string(s) + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write to '" + path + "' failed");
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::vector<std::string_view> lines(std::string_view text) {
    std::vector<std::string_view> out;
    for (auto line : split(text, '\n')) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back(line);
    }
    while (!out.empty() && trim(out.back()).empty()) out.pop_back();
    return out;
}

// ---------------------------------------------------------------------------
// Matrices and vectors
// ---------------------------------------------------------------------------

/// Row-major CSV, no header.
inline std::string format_matrix(const MatrixXd& m) {
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline MatrixXd parse_matrix(std::string_view text, std::string_view context = "matrix") {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    for (auto line : lines(text)) {
        ++line_no;
        if (trim(line).empty()) throw ParseError(std::string(context) + ": blank line " + std::to_string(line_no));
        std::vector<double> row;
        for (auto field : split(line, ',')) {
            row.push_back(parse_double(field, std::string(context) + " line " + std::to_string(line_no)));
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(std::string(context) + ": ragged row at line " + std::to_string(line_no));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(std::string(context) + ": empty matrix");
    MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
}

/// One value per line.
inline std::string format_vector(const VectorXd& v) {
    std::string out;
    for (Index i = 0; i < v.size(); ++i) {
        out += format_double(v[i]);
        out += '\n';
    }
    return out;
}

inline VectorXd parse_vector(std::string_view text, std::string_view context = "vector") {
    std::vector<double> values;
    std::size_t line_no = 0;
    for (auto line : lines(text)) {
        ++line_no;
        values.push_back(parse_double(line, std::string(context) + " line " + std::to_string(line_no)));
    }
    return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

inline MatrixXd read_matrix(const std::string& path) { return parse_matrix(read_file(path), path); }
inline VectorXd read_vector(const std::string& path) { return parse_vector(read_file(path), path); }
inline void write_matrix(const std::string& path, const MatrixXd& m) { write_file(path, format_matrix(m)); }
inline void write_vector(const std::string& path, const VectorXd& v) { write_file(path, format_vector(v)); }

// ---------------------------------------------------------------------------
// key=value text
// ---------------------------------------------------------------------------

/// Ordered key=value pairs. '#' starts a comment line; blank lines are ignored;
/// duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::string_view text, std::string_view context = "key=value") {
    KeyValues kv;
    std::size_t line_no = 0;
    for (auto raw : lines(text)) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(std::string(context) + " line " + std::to_string(line_no) + ": expected key=value");
        }
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(std::string(context) + " line " + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, std::move(value)).second) {
            throw ParseError(std::string(context) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

inline std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string out;
    for (const auto& [k, v] : pairs) out += k + "=" + v + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Spectrum files
// ---------------------------------------------------------------------------

/// First line "ratio=<r>,sigma=<s>", then one "mu0,omega" pair per line.
inline std::string format_spectrum(const SignalSpectrum& s) {
    std::string out = "ratio=" + format_double(s.ratio) + ",sigma=" + format_double(s.sigma) + "\n";
    for (Index i = 0; i < s.p(); ++i) out += format_double(s.mu0[i]) + "," + format_double(s.omega[i]) + "\n";
    return out;
}

inline SignalSpectrum parse_spectrum(std::string_view text, std::string_view context = "spectrum") {
    const auto ls = lines(text);
    if (ls.empty()) throw ParseError(std::string(context) + ": missing header line");
    SignalSpectrum s;
    bool have_ratio = false;
    bool have_sigma = false;
    for (auto field : split(ls.front(), ',')) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) throw ParseError(std::string(context) + ": malformed header");
        const auto key = trim(field.substr(0, eq));
        const auto value = field.substr(eq + 1);
        if (key == "ratio") {
            s.ratio = parse_double(value, context);
            have_ratio = true;
        } else if (key == "sigma") {
            s.sigma = parse_double(value, context);
            have_sigma = true;
        } else {
            throw ParseError(std::string(context) + ": unknown header key '" + std::string(key) + "'");
        }
    }
    if (!have_ratio || !have_sigma) throw ParseError(std::string(context) + ": header needs ratio and sigma");
    const auto p = static_cast<Index>(ls.size() - 1);
    s.mu0.resize(p);
    s.omega.resize(p);
    for (Index i = 0; i < p; ++i) {
        const auto fields = split(ls[static_cast<std::size_t>(i + 1)], ',');
        const std::string where = std::string(context) + " line " + std::to_string(i + 2);
        if (fields.size() != 2) throw ParseError(where + ": expected two columns");
        s.mu0[i] = parse_double(fields[0], where);
        s.omega[i] = parse_double(fields[1], where);
    }
    if (s.ratio < 0.0) throw ParseError(std::string(context) + ": ratio must be nonnegative");
    if ((s.omega.array() <= 0.0).any()) throw ParseError(std::string(context) + ": omega must be positive");
    return s;
}

inline SignalSpectrum read_spectrum(const std::string& path) { return parse_spectrum(read_file(path), path); }

}  // namespace blockuniv::io
