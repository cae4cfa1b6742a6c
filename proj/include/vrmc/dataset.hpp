#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vrmc {

/// Row-major numeric table, one row per datum. Immutable once a chain starts
/// (nothing in the library mutates a dataset after model construction).
class Dataset {
public:
    Dataset() = default;

    Dataset(std::size_t rows, std::size_t cols, std::vector<double> values);

    /// Single-column dataset from a flat vector.
    static Dataset from_column(std::vector<double> values);

    /// Parses comma-separated 64-bit reals, one row per datum; a header row
    /// is detected (and skipped) when the first cell is non-numeric.
    /// Throws ConfigError on I/O failure, ragged rows, or bad numbers.
    static Dataset from_csv(const std::string& path);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    const double* row(std::size_t r) const { return values_.data() + r * cols_; }

    std::vector<double> column(std::size_t c) const;

    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

}  // namespace vrmc
