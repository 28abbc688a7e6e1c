#ifndef LBAL_ERRORS_HPP
#define LBAL_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lbal {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wrong magic, version or dtype in a binary header.
struct FormatError : Error {
    using Error::Error;
};

struct TruncationError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ArgumentError : Error {
    using Error::Error;
};

// Invalid content: non-finite values, out-of-range labels, shape mismatch.
struct DataError : Error {
    DataError(const std::string& what) : Error(what) {}
    DataError(const std::string& what, std::size_t row, std::size_t col)
        : Error(what + " at row " + std::to_string(row) + ", col " + std::to_string(col)),
          row(row), col(col), has_location(true) {}

    std::size_t row = 0;
    std::size_t col = 0;
    bool has_location = false;
};

struct DivergenceError : Error {
    explicit DivergenceError(std::size_t epoch)
        : Error("non-finite loss in epoch " + std::to_string(epoch)), epoch(epoch) {}
    std::size_t epoch;
};

// Raised when a probe would be trained on fewer than two classes.
struct DegenerateModelError : Error {
    using Error::Error;
};

}  // namespace lbal

#endif  // LBAL_ERRORS_HPP
