#pragma once

#include <stdexcept>
#include <string>

namespace dvhsmooth {

enum class ErrorCode {
    InvalidArgument,
    DegenerateCriticalPoint,
    TrackingLost,
    BracketInvalid,
    FitFailed,
    IllConditionedStep,
    NumericalDomain,
    InsufficientData,
    Config,
    Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above; the C
/// API maps them one-to-one onto dvhs_status values.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace dvhsmooth
