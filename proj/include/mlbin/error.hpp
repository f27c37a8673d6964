#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlbin {

enum class ErrorKind {
    io,
    validation,
    dimension,
    config,
    numeric,
    // file-format failures
    magic,
    version,
    size_mismatch,
    truncated,
    structural,
};

inline constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::io:
            return "io";
        case ErrorKind::validation:
            return "validation";
        case ErrorKind::dimension:
            return "dimension";
        case ErrorKind::config:
            return "config";
        case ErrorKind::numeric:
            return "numeric";
        case ErrorKind::magic:
            return "magic";
        case ErrorKind::version:
            return "version";
        case ErrorKind::size_mismatch:
            return "size_mismatch";
        case ErrorKind::truncated:
            return "truncated";
        case ErrorKind::structural:
            return "structural";
    }
    return "unknown";
}

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Process exit code for an error class. 0 is success, 1 is reserved for
/// unexpected failures (usage errors come from the argument parser).
inline constexpr int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::io:
            return 2;
        case ErrorKind::validation:
        case ErrorKind::dimension:
        case ErrorKind::magic:
        case ErrorKind::version:
        case ErrorKind::size_mismatch:
        case ErrorKind::truncated:
        case ErrorKind::structural:
            return 3;
        case ErrorKind::config:
            return 4;
        case ErrorKind::numeric:
            return 5;
    }
    return 1;
}

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

// string_view so literal messages cost nothing on the success path
inline void require(bool cond, ErrorKind kind, std::string_view what) {
    if (!cond) fail(kind, std::string(what));
}

}  // namespace detail

}  // namespace mlbin
