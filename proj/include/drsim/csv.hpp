#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "drsim/core.hpp"

// Minimal comma-separated reading/writing. Fields never contain quotes or commas in the
// formats this library exchanges, so no quoting rules are implemented.

namespace drsim::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Streams rows of a headed CSV, checking the header and the field count of every row.
class Reader {
public:
    Reader(std::istream& in, std::vector<std::string> expected_header) : in_(in), header_(std::move(expected_header)) {
        std::string line;
        if (!std::getline(in_, line)) throw ParseError("empty input, expected header", 1);
        line_no_ = 1;
        const auto fields = split(line);
        bool ok = fields.size() == header_.size();
        for (std::size_t i = 0; ok && i < fields.size(); ++i) ok = fields[i] == header_[i];
        if (!ok) throw ParseError("unexpected header '" + std::string(trim(line)) + "'", 1);
    }

    /// Reads the next non-empty row; returns false at end of input.
    bool next(std::vector<std::string_view>& fields) {
        while (std::getline(in_, current_)) {
            ++line_no_;
            if (trim(current_).empty()) continue;
            fields = split(current_);
            if (fields.size() != header_.size())
                throw ParseError("expected " + std::to_string(header_.size()) + " fields, got " +
                                     std::to_string(fields.size()),
                                 line_no_);
            return true;
        }
        return false;
    }

    std::size_t line() const { return line_no_; }

private:
    std::istream& in_;
    std::vector<std::string> header_;
    std::string current_;
    std::size_t line_no_ = 0;
};

inline double parse_double(std::string_view s, std::size_t line) {
    std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw ParseError("not a number: '" + tmp + "'", line);
    return v;
}

inline long long parse_int(std::string_view s, std::size_t line) {
    std::string tmp(s);
    char* end = nullptr;
    const long long v = std::strtoll(tmp.c_str(), &end, 10);
    if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw ParseError("not an integer: '" + tmp + "'", line);
    return v;
}

/// Shortest decimal text that round-trips the double exactly.
inline std::string num(double x) {
    char buf[32];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ValidationError("cannot open '" + p.string() + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw ValidationError("cannot open '" + p.string() + "' for writing");
    return out;
}

/// Writes a dense matrix without header, one row per line.
inline void write_matrix(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << num(m(i, j));
        out << '\n';
    }
}

inline Matrix read_matrix(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (auto f : split(line)) row.push_back(parse_double(f, n));
        if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged matrix row", n);
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

}  // namespace drsim::csv
