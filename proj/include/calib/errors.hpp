#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calib {

/// Rejected argument or violated precondition.
class invalid_argument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file. Carries the 1-based data row (0 when not row-specific).
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& what, std::size_t row)
        : std::runtime_error(row ? "row " + std::to_string(row) + ": " + what : what),
          row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// A quadrature, series, or root search failed to reach its tolerance.
class accuracy_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool ok, const char* msg) {
    if (!ok) throw invalid_argument(msg);
}
}  // namespace detail

}  // namespace calib
