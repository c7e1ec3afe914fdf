#pragma once

#include <stdexcept>
#include <string>

namespace scomo {

enum class ErrorKind {
    invalid_argument,  // caller passed something outside the documented contract
    invalid_data,      // input file or series failed validation
    numerical,         // solver failed to converge or hit a singular system
    protocol,          // experiment-protocol rule violated
    not_found,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace scomo
