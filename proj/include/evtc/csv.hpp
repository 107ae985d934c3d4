#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evtc/errors.hpp"

// Minimal CSV support. Values in this project never contain commas or quotes
// (ids are plain tokens, routes use ';' separators), so no quoting layer.

namespace evtc::csv {

// Fixed-precision formatting keeps output files byte-stable across runs.
inline std::string num(double v, int precision = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

inline std::string num(long long v) { return std::to_string(v); }
inline std::string num(long v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open for writing: " + path.string());
        path_ = path.string();
    }

    void row(std::initializer_list<std::string_view> cells) {
        bool first = true;
        for (auto c : cells) {
            if (!first) out_ << ',';
            out_ << c;
            first = false;
        }
        out_ << '\n';
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (out_.fail()) throw DataError("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Table {
public:
    static Table read(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open: " + path.string());
        Table t;
        t.path_ = path.string();
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> cells = split(line);
            if (header) {
                for (std::size_t i = 0; i < cells.size(); ++i) t.col_index_[cells[i]] = i;
                t.header_ = std::move(cells);
                header = false;
            } else {
                t.rows_.push_back(std::move(cells));
            }
        }
        if (header) throw DataError("empty csv: " + path.string());
        return t;
    }

    std::size_t col(const std::string& name) const {
        auto it = col_index_.find(name);
        if (it == col_index_.end())
            throw DataError("missing column '" + name + "' in " + path_);
        return it->second;
    }

    std::size_t size() const { return rows_.size(); }
    const std::vector<std::string>& row(std::size_t r) const { return rows_[r]; }

    const std::string& at(std::size_t r, std::size_t c) const {
        const auto& cells = rows_[r];
        if (c >= cells.size()) throw DataError("short row in " + path_);
        return cells[c];
    }

    double num_at(std::size_t r, std::size_t c) const {
        try {
            return std::stod(at(r, c));
        } catch (const std::exception&) {
            throw DataError("bad number '" + at(r, c) + "' in " + path_);
        }
    }

    long long int_at(std::size_t r, std::size_t c) const {
        try {
            return std::stoll(at(r, c));
        } catch (const std::exception&) {
            throw DataError("bad integer '" + at(r, c) + "' in " + path_);
        }
    }

    static std::vector<std::string> split(const std::string& line, char sep = ',') {
        std::vector<std::string> out;
        std::string cur;
        for (char c : line) {
            if (c == sep) {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        out.push_back(cur);
        return out;
    }

private:
    std::string path_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
    std::unordered_map<std::string, std::size_t> col_index_;
};

} // namespace evtc::csv
