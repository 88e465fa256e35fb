#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gsync {

enum class ErrorCode {
    NonFinite,
    RoundTripFailure,
    DomainViolation,
    DimensionMismatch,
    NotAContraction,
    RegionEscape,
    NoConvergence,
    DisjointRanges,
    LengthMismatch,
    InsufficientPairs,
    InvalidArgument,
    Config,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::RoundTripFailure: return "RoundTripFailure";
        case ErrorCode::DomainViolation: return "DomainViolation";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotAContraction: return "NotAContraction";
        case ErrorCode::RegionEscape: return "RegionEscape";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::DisjointRanges: return "DisjointRanges";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::InsufficientPairs: return "InsufficientPairs";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Config: return "Config";
    }
    return "Unknown";
}

/// Library exception. `index()` carries the offending step, substep or
/// trajectory index when one is meaningful.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what), index_(index) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] std::optional<std::size_t> index() const noexcept { return index_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
    std::optional<std::size_t> index_;
};

}  // namespace gsync
