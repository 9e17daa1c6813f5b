#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qwalk/errors.hpp"

namespace qwalk {

// Round-trip-safe decimal rendering (17 significant digits).
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ConfigError("csv: missing column '" + name + "'");
    }

    std::vector<double> col(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
    }
};

// Numeric CSV with a header row, comma separated, LF line endings.
inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF on all platforms
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_full(row[i]);
        out << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path.string());
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path.string());
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;

    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = s.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(s.substr(start));
                break;
            }
            fields.push_back(s.substr(start, comma - start));
            start = comma + 1;
        }
        return fields;
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line);
        if (lineno == 1) {
            table.header = fields;
            continue;
        }
        if (fields.size() != table.header.size())
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected " + std::to_string(table.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            std::size_t consumed = 0;
            double v = 0.0;
            try {
                v = std::stod(f, &consumed);
            } catch (const std::exception&) {
                consumed = 0;
            }
            if (consumed != f.size() || f.empty())
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": bad numeric field '" + f + "'");
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty())
        throw ConfigError(path.string() + ":1: missing header row");
    return table;
}

}  // namespace qwalk
