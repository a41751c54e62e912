#pragma once

/// @file error.hpp
/// @brief Exception type shared by every aerosem module.

#include <stdexcept>
#include <string>

namespace aerosem {

/// Error categories. The CLI reports these as the `code` field of its JSON
/// error object, so the spelling is part of the external interface.
enum class ErrorCode {
    invalid_argument,
    degenerate_element,
    not_found,
    solver_failure,
    schema,
    io,
    non_finite,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::degenerate_element: return "degenerate_element";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::solver_failure: return "solver_failure";
        case ErrorCode::schema: return "schema";
        case ErrorCode::io: return "io";
        case ErrorCode::non_finite: return "non_finite";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) throw Error(code, what);
}

} // namespace detail
} // namespace aerosem
