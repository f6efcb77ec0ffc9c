#ifndef SSMVPR_ERROR_HPP
#define SSMVPR_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssmvpr {

/// Failure categories raised by the library. The CLI maps `Io` to exit code 2
/// and every other kind to exit code 3 (data contract violation).
enum class ErrorKind {
    Io,
    BadMagic,
    Truncated,
    SizeMismatch,
    NonFinite,
    Parse,
    DuplicateFrame,
    DimensionMismatch,
    InvalidArgument,
    Degenerate,
    UnknownFrame,
    MissingGroundTruth,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::Truncated: return "truncated";
    case ErrorKind::SizeMismatch: return "size-mismatch";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::DuplicateFrame: return "duplicate-frame";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::UnknownFrame: return "unknown-frame";
    case ErrorKind::MissingGroundTruth: return "missing-ground-truth";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

} // namespace ssmvpr

#endif
