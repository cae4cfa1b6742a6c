#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace vrmc {

/// A chain coordinate became non-finite; carries the iteration and step size.
class DivergedChainError : public std::runtime_error {
public:
    static constexpr std::size_t unknown_iteration = std::numeric_limits<std::size_t>::max();

    DivergedChainError(std::size_t iteration, double step_size)
        : std::runtime_error("chain diverged at iteration " +
                             (iteration == unknown_iteration ? std::string("?")
                                                             : std::to_string(iteration)) +
                             " (h=" + std::to_string(step_size) + ")"),
          iteration_(iteration),
          step_size_(step_size) {}

    std::size_t iteration() const noexcept { return iteration_; }
    double step_size() const noexcept { return step_size_; }

private:
    std::size_t iteration_;
    double step_size_;
};

/// Gradient accumulation produced a non-finite value; names the culprit datum.
/// datum_index() == prior_term means the log-prior gradient overflowed.
class NumericOverflowError : public std::runtime_error {
public:
    static constexpr std::size_t prior_term = std::numeric_limits<std::size_t>::max();

    explicit NumericOverflowError(std::size_t datum_index)
        : std::runtime_error(datum_index == prior_term
                                 ? std::string("non-finite log-prior gradient")
                                 : "non-finite gradient contribution from datum " +
                                       std::to_string(datum_index)),
          datum_index_(datum_index) {}

    std::size_t datum_index() const noexcept { return datum_index_; }

private:
    std::size_t datum_index_;
};

/// An operation was called outside its documented protocol
/// (e.g. a vr gradient requested before any anchor refresh).
class ContractViolationError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Exhaustive enumeration would exceed the subset-count guard.
class EnumerationLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace vrmc
