#include "vrmc/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vrmc/errors.hpp"

namespace vrmc {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) {
        return false;
    }
    const char* first = t.data();
    const char* last = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

}  // namespace

Dataset::Dataset(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows_ == 0 || cols_ == 0) {
        throw std::invalid_argument("dataset must have at least one row and one column");
    }
    if (values_.size() != rows_ * cols_) {
        throw std::invalid_argument("dataset storage size does not match rows * cols");
    }
}

Dataset Dataset::from_column(std::vector<double> values) {
    const std::size_t n = values.size();
    return Dataset(n, 1, std::move(values));
}

Dataset Dataset::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open dataset file: " + path);
    }
    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t lineno = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split_cells(line);
        double value = 0.0;
        if (first_content_line) {
            first_content_line = false;
            if (!parse_double(cells.front(), value)) {
                continue;  // header row
            }
        }
        if (cols == 0) {
            cols = cells.size();
        } else if (cells.size() != cols) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(cols) + " columns, got " +
                              std::to_string(cells.size()));
        }
        for (const auto& cell : cells) {
            if (!parse_double(cell, value)) {
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": not a number: '" + trim(cell) + "'");
            }
            values.push_back(value);
        }
        ++rows;
    }
    if (rows == 0) {
        throw ConfigError(path + ": no data rows");
    }
    return Dataset(rows, cols, std::move(values));
}

std::vector<double> Dataset::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        out[r] = at(r, c);
    }
    return out;
}

}  // namespace vrmc
