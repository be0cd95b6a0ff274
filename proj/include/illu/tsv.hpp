#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "illu/errors.hpp"

namespace illu {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

// Reads a TSV file into rows of cells. LF line endings; a trailing CR (from
// foreign files) is stripped. Empty trailing line ignored.
inline std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == EOF) break;
        rows.push_back(split_tabs(line));
    }
    return rows;
}

class TsvWriter {
  public:
    explicit TsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot write " + path.string());
        path_ = path.string();
    }

    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << '\t';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw DataError("write failed: " + path_);
    }

  private:
    std::ofstream out_;
    std::string path_;
};

// 9 significant digits, the neural-codes file precision.
inline std::string fmt_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// percentages with 2 decimals, the report-table precision
inline std::string fmt_f2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("cannot parse " + what + ": '" + s + "'");
    }
}

inline long parse_long(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("cannot parse " + what + ": '" + s + "'");
    }
}

}  // namespace illu
