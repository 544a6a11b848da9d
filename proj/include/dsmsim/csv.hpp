#pragma once

#include <cstddef>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "dsmsim/common.hpp"

namespace dsmsim::csvio {

struct RawCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> cells;  // data rows, header excluded
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

inline RawCsv read_raw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open csv file: " + path);
    RawCsv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            csv.header = split_line(line);
            first = false;
        } else {
            csv.cells.push_back(split_line(line));
        }
    }
    if (first) throw DataError("empty csv file: " + path);
    return csv;
}

// `line` is 1-based and counts the header row, matching editors.
inline double parse_number(const std::string& cell, const std::string& path, std::size_t line,
                           std::size_t column) {
    std::size_t used = 0;
    double value = 0.0;
    bool bad = cell.empty();
    if (!bad) {
        try {
            value = std::stod(cell, &used);
        } catch (const std::exception&) {
            bad = true;
        }
    }
    if (bad || used != cell.size()) {
        throw DataError(path + ":" + std::to_string(line) + ": column " +
                        std::to_string(column + 1) + ": cannot parse '" + cell + "' as a number");
    }
    return value;
}

struct NumericCsv {
    std::vector<std::string> header;
    Table rows;
};

inline NumericCsv read_numeric(const std::string& path) {
    RawCsv raw = read_raw(path);
    NumericCsv out;
    out.header = raw.header;
    out.rows.reserve(raw.cells.size());
    for (std::size_t r = 0; r < raw.cells.size(); ++r) {
        if (raw.cells[r].size() != raw.header.size()) {
            throw DataError(path + ":" + std::to_string(r + 2) + ": expected " +
                            std::to_string(raw.header.size()) + " columns, found " +
                            std::to_string(raw.cells[r].size()));
        }
        Series row(raw.cells[r].size());
        for (std::size_t c = 0; c < row.size(); ++c) {
            row[c] = parse_number(raw.cells[r][c], path, r + 2, c);
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

// Writes with enough digits that reading the file back recovers every
// value exactly.
inline void write_numeric(const std::string& path, const std::vector<std::string>& header,
                          const Table& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << std::setprecision(17);
    for (std::size_t c = 0; c < header.size(); ++c) {
        out << (c ? "," : "") << header[c];
    }
    out << '\n';
    for (const Series& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c ? "," : "") << row[c];
        }
        out << '\n';
    }
    if (!out) throw IoError("failed while writing file: " + path);
}

}  // namespace dsmsim::csvio
