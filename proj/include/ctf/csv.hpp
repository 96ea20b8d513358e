#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ctf/errors.hpp"

namespace ctf {

// Minimal CSV: UTF-8, comma separated, one header row, '.' decimal point.
// Fields never contain commas or quotes in this project, so no escaping.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw ParseError("csv: no column named '" + name + "'");
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_csv: cannot open " + path.string());
    CsvTable table;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (line_no == 1) {
            table.header = fields;
        } else {
            if (fields.size() != table.header.size())
                throw ParseError("csv: line " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(table.header.size()),
                                 line_no);
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty()) throw ParseError("csv: empty file " + path.string(), 0);
    if (table.rows.empty())
        throw ParseError("csv: no data rows in " + path.string(), line_no);
    return table;
}

inline void write_csv(const CsvTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_csv: cannot open " + path.string());
    auto write_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) write_row(row);
    if (!out) throw IoError("write_csv: write failed for " + path.string());
}

// Fixed formatting keeps CSV output byte-stable across runs.
inline std::string format_real(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

inline double parse_real(const std::string& s, long line_no = -1) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("csv: bad numeric field '" + s + "'", line_no);
    }
}

inline long parse_int(const std::string& s, long line_no = -1) {
    try {
        std::size_t used = 0;
        long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("csv: bad integer field '" + s + "'", line_no);
    }
}

} // namespace ctf
