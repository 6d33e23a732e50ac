#pragma once

#include <stdexcept>
#include <string>

namespace tsmix {

enum class ErrorKind {
    invalid_argument,
    parse,
    io,
    numeric,
    degenerate,
    stale,
    external,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind drives
/// the CLI exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Marks a single trial as failed. The study records the cause and keeps going.
class TrialFailure : public Error {
public:
    explicit TrialFailure(const std::string& message, ErrorKind kind = ErrorKind::numeric)
        : Error(kind, message) {}
};

}  // namespace tsmix
