#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "walklab/common.hpp"

namespace walklab {

// CSV emission contract: header row always present, numbers carried at 17
// significant digits, "\n" line ends regardless of platform. Identical data
// therefore serializes to identical bytes.

inline std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::vector<std::string>& add_row() { return rows.emplace_back(); }
};

inline void write_csv(const std::filesystem::path& path, const Csv& csv) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), Errc::io_error, "cannot open '" + path.string() + "' for writing");
    for (std::size_t i = 0; i < csv.header.size(); ++i) {
        if (i) out << ',';
        out << csv.header[i];
    }
    out << '\n';
    for (const auto& row : csv.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    out.flush();
    require(out.good(), Errc::io_error, "write to '" + path.string() + "' failed");
}

}  // namespace walklab
